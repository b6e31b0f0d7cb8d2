use muon_flow::harness::RngStream;
use muon_flow::spectral::{dissipation_density, grad_phi_eps, norms, orth_eps, orth_hard, phi_eps, psi_eps};
use muon_flow::svd::{singular_values, DEFAULT_RANK_TOL};
use muon_flow::{EpsParam, Matrix};
use proptest::prelude::*;

fn draw(seed: u64, rows: usize, cols: usize, scale: f64) -> Matrix {
    RngStream::new(seed).gaussian_matrix(rows, cols, scale).unwrap()
}

fn eps_of(e: f64) -> EpsParam {
    EpsParam::new(e).unwrap()
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (1usize..=6, 1usize..=6)
}

fn well_conditioned(p: &Matrix) -> bool {
    singular_values(p).last().is_some_and(|&s| s > 0.05)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn orth_eps_is_lipschitz(seed in any::<u64>(), (m, n) in dims(), e in prop::sample::select(vec![0.1, 1.0]), scale in 0.01f64..3.0) {
        let mut rng = RngStream::new(seed);
        let p = rng.gaussian_matrix(m, n, 1.0).unwrap();
        let q = p.add(&rng.gaussian_matrix(m, n, scale).unwrap());
        let lhs = orth_eps(&p, eps_of(e)).unwrap().sub(&orth_eps(&q, eps_of(e)).unwrap()).fro_norm();
        prop_assert!(lhs <= p.sub(&q).fro_norm() / e * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn nuclear_operator_duality(seed in any::<u64>(), (m, n) in dims(), shrink in 0.0f64..=1.0) {
        let p = draw(seed, m, n, 1.0);
        let nuc = norms(&p).unwrap().nuc;
        prop_assert!((p.dot(&orth_hard(&p, DEFAULT_RANK_TOL).unwrap()) - nuc).abs() <= 1e-9);
        let g = draw(seed ^ 0x9e37, m, n, 1.0);
        let g = g.scale(shrink / norms(&g).unwrap().op);
        prop_assert!(p.dot(&g) <= nuc + 1e-12);
    }

    #[test]
    fn psi_gradient_is_orth_eps(seed in any::<u64>(), (m, n) in dims(), e in prop::sample::select(vec![0.1, 1.0, 4.0])) {
        let p = draw(seed, m, n, 1.0);
        prop_assume!(well_conditioned(&p));
        let eps = eps_of(e);
        let g = orth_eps(&p, eps).unwrap();
        let step = 1e-5;
        for k in 0..m * n {
            let mut plus = p.clone();
            plus.as_mut_slice()[k] += step;
            let mut minus = p.clone();
            minus.as_mut_slice()[k] -= step;
            let fd = (psi_eps(&plus, eps).unwrap() - psi_eps(&minus, eps).unwrap()) / (2.0 * step);
            let exact = g.as_slice()[k];
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "entry {k}: fd {fd}, exact {exact}");
        }
    }

    #[test]
    fn mirror_map_inverts_orth_eps(seed in any::<u64>(), (m, n) in dims(), e in prop::sample::select(vec![0.1, 1.0])) {
        let p = draw(seed, m, n, 1.0);
        prop_assume!(well_conditioned(&p));
        let back = grad_phi_eps(&orth_eps(&p, eps_of(e)).unwrap(), eps_of(e)).unwrap();
        prop_assert!(back.sub(&p).fro_norm() <= 1e-8 * p.fro_norm());
    }

    #[test]
    fn fenchel_equality(seed in any::<u64>(), (m, n) in dims(), e in 0.05f64..5.0, scale in 0.1f64..3.0) {
        let p = draw(seed, m, n, scale);
        let eps = eps_of(e);
        let g = orth_eps(&p, eps).unwrap();
        let gap = psi_eps(&p, eps).unwrap() + phi_eps(&g, eps).unwrap() - dissipation_density(&p, eps).unwrap();
        prop_assert!(gap.abs() <= 1e-9);
    }

    #[test]
    fn argmin_certificate(seed in any::<u64>(), (m, n) in dims(), e in prop::sample::select(vec![0.1, 1.0])) {
        let p = draw(seed, m, n, 1.0);
        prop_assume!(well_conditioned(&p));
        let eps = eps_of(e);
        let g_star = orth_eps(&p, eps).unwrap().scale(-1.0);
        let residual = p.add(&grad_phi_eps(&g_star, eps).unwrap());
        prop_assert!(residual.fro_norm() <= 1e-8 * p.fro_norm().max(1.0));

        let value = |g: &Matrix| p.dot(g) + phi_eps(g, eps).unwrap();
        let best = value(&g_star);
        let mut rng = RngStream::new(seed.wrapping_add(1));
        let mut tried = 0;
        while tried < 100 {
            let delta = rng.gaussian_matrix(m, n, 1.0).unwrap();
            let t = 10f64.powf(-1.0 - 3.0 * (tried as f64 / 100.0));
            let g = g_star.add(&delta.scale(t / delta.fro_norm()));
            if norms(&g).unwrap().op >= 1.0 - 1e-9 {
                continue;
            }
            tried += 1;
            prop_assert!(value(&g) > best, "perturbation {t:e}: {} <= {}", value(&g), best);
        }
    }

    #[test]
    fn hard_limit_is_approached_monotonically(seed in any::<u64>(), (m, n) in dims()) {
        let p = draw(seed, m, n, 1.0);
        prop_assume!(singular_values(&p).last().is_some_and(|&s| s > 0.2));
        let hard = orth_hard(&p, DEFAULT_RANK_TOL).unwrap();
        let gaps: Vec<f64> = (1..=8)
            .map(|k| orth_eps(&p, eps_of(10f64.powi(-k))).unwrap().sub(&hard).fro_norm())
            .collect();
        for w in gaps.windows(2) {
            prop_assert!(w[1] < w[0], "{gaps:?}");
        }
    }
}
