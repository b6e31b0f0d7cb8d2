use muon_flow::harness::RngStream;
use muon_flow::product::{avg_inner, block_dissipation, block_orth_eps, block_psi_eps};
use muon_flow::spectral::{dissipation_density, orth_eps, phi_eps};
use muon_flow::{BlockPoint, BlockShape, EpsParam};
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = BlockShape> {
    prop::collection::vec((1usize..=5, 1usize..=5), 1..=3).prop_map(|b| BlockShape::new(b).unwrap())
}

fn point(rng: &mut RngStream, shape: &BlockShape) -> BlockPoint {
    let blocks = shape.blocks().iter().map(|&(m, n)| rng.gaussian_matrix(m, n, 1.0).unwrap()).collect();
    BlockPoint::new(shape, blocks).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn block_orth_is_separable(seed in any::<u64>(), shape in shape(), e in 0.05f64..4.0) {
        let eps = EpsParam::new(e).unwrap();
        let p = point(&mut RngStream::new(seed), &shape);
        let joint = block_orth_eps(&p, eps).unwrap();
        let parts: Vec<_> = p.blocks().iter().map(|b| orth_eps(b, eps).unwrap()).collect();
        prop_assert_eq!(joint, BlockPoint::new(&shape, parts).unwrap());
    }

    #[test]
    fn product_fenchel_equality(seed in any::<u64>(), shape in shape(), e in 0.05f64..4.0) {
        let eps = EpsParam::new(e).unwrap();
        let p = point(&mut RngStream::new(seed), &shape);
        let phi: f64 = p.blocks().iter().map(|b| phi_eps(&orth_eps(b, eps).unwrap(), eps).unwrap()).sum();
        let d: f64 = p.blocks().iter().map(|b| dissipation_density(b, eps).unwrap()).sum();
        prop_assert!((block_psi_eps(&p, eps).unwrap() + phi - d).abs() <= 1e-9);
        prop_assert!((block_dissipation(&p, eps).unwrap() - d).abs() <= 1e-12 * d.max(1.0));
    }

    #[test]
    fn avg_inner_is_symmetric_and_bilinear(seed in any::<u64>(), shape in shape(), n in 1usize..6, a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let mut rng = RngStream::new(seed);
        let u: Vec<_> = (0..n).map(|_| point(&mut rng, &shape)).collect();
        let v: Vec<_> = (0..n).map(|_| point(&mut rng, &shape)).collect();
        let w: Vec<_> = (0..n).map(|_| point(&mut rng, &shape)).collect();
        prop_assert_eq!(avg_inner(&u, &v).unwrap(), avg_inner(&v, &u).unwrap());
        let combo: Vec<_> = u.iter().zip(&w).map(|(x, y)| x.scale(a).add(&y.scale(b))).collect();
        let lhs = avg_inner(&combo, &v).unwrap();
        let rhs = a * avg_inner(&u, &v).unwrap() + b * avg_inner(&w, &v).unwrap();
        let size = (a.abs() + b.abs()) * avg_inner(&v, &v).unwrap().sqrt() * (avg_inner(&u, &u).unwrap() + avg_inner(&w, &w).unwrap()).sqrt();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * size.max(1.0));
    }
}
