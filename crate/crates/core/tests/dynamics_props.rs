use muon_flow::diagnostics::{
    kinetic_constants, kinetic_violations, pl_estimator, simulate, trajectory_records, EnergyParams, Kinetic, RunSpec,
};
use muon_flow::dynamics::{discrete_step, inertial_params, integrate_rk4, UpdateRule};
use muon_flow::harness::RngStream;
use muon_flow::objectives::{ce_grad, fd_force_check, MeanMatch, Objective};
use muon_flow::{BlockPoint, BlockShape, EpsParam, Ensemble};
use proptest::prelude::*;

fn instance(seed: u64, rows: usize, cols: usize, n: usize, p_scale: f64) -> (MeanMatch, Ensemble) {
    let mut rng = RngStream::new(seed);
    let obj = MeanMatch::new(rng.gaussian_matrix(rows, cols, 0.5).unwrap()).unwrap();
    let pos = (0..n).map(|_| BlockPoint::single(rng.gaussian_matrix(rows, cols, 1.0).unwrap())).collect();
    let mom = (0..n).map(|_| BlockPoint::single(rng.gaussian_matrix(rows, cols, p_scale).unwrap())).collect();
    (obj.clone(), Ensemble::new(obj.shape().clone(), pos, mom).unwrap())
}

fn rule() -> impl Strategy<Value = UpdateRule> {
    prop_oneof![
        Just(UpdateRule::EuclideanMomentum),
        Just(UpdateRule::HardMuon),
        Just(UpdateRule::newton_schulz()),
        (-3i32..=1).prop_map(|k| UpdateRule::regularized(10f64.powi(k)).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mean_match_forces_are_shared_and_consistent(seed in any::<u64>(), rows in 1usize..5, cols in 1usize..5, n in 1usize..6) {
        let (obj, ens) = instance(seed, rows, cols, n, 1.0);
        let forces = obj.forces(&ens).unwrap();
        prop_assert!(forces.iter().all(|f| f == &forces[0]));
        prop_assert!(fd_force_check(&obj, &ens, 1e-5).unwrap() <= 1e-6);
    }

    #[test]
    fn cross_entropy_gradient_bounds(z in prop::collection::vec(-20.0f64..20.0, 2..8), dz in prop::collection::vec(-5.0f64..5.0, 8), y in 0usize..8) {
        let y = y % z.len();
        let g = ce_grad(&z, y);
        prop_assert!(g.iter().map(|x| x * x).sum::<f64>().sqrt() <= 2f64.sqrt() + 1e-12);
        let w: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + b).collect();
        let gw = ce_grad(&w, y);
        let lhs = g.iter().zip(&gw).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let rhs = dz[..z.len()].iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!(lhs <= rhs + 1e-12);
    }

    #[test]
    fn regularized_displacement_is_bounded(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..6, h in 0.001f64..0.5, e in 0.01f64..3.0) {
        let (obj, ens) = instance(seed, rows, cols, 4, 2.0);
        let sp = inertial_params(h, 1.0).unwrap();
        let next = discrete_step(&obj, &ens, &sp, &UpdateRule::regularized(e).unwrap()).unwrap();
        let bound = sp.eta * (obj.shape().q_total() as f64).sqrt();
        for (a, b) in next.positions.iter().zip(&ens.positions) {
            prop_assert!(a.sub(b).norm() <= bound * (1.0 + 1e-12));
        }
    }

    #[test]
    fn records_satisfy_energy_identities(seed in any::<u64>(), rule in rule(), alpha in 0.0f64..1.0, stride in 1usize..5) {
        let (obj, ens) = instance(seed, 3, 2, 5, 0.5);
        let spec = RunSpec { params: inertial_params(0.05, 1.5).unwrap(), rule, n_steps: 20, stride, alpha };
        let out = simulate(&obj, &ens, &spec).unwrap();
        prop_assert!(out.error.is_none());
        for r in &out.records {
            prop_assert_eq!(r.H, r.K + 1.5 * r.U);
            prop_assert_eq!(r.L, r.H - alpha * r.C);
            prop_assert!(r.K >= 0.0 && r.D >= 0.0 && r.A >= 0.0 && r.U >= 0.0);
        }
    }

    #[test]
    fn hamiltonian_is_non_increasing_along_rk4(seed in any::<u64>(), e in 0.1f64..2.0, gamma in 0.5f64..2.0) {
        let (obj, ens) = instance(seed, 3, 2, 4, 1.0);
        let traj = integrate_rk4(&obj, &ens, gamma, e, 0.01, 1.0, 1).unwrap();
        let ep = EnergyParams { kinetic: Kinetic::Regularized(EpsParam::new(e).unwrap()), gamma, alpha: 0.0, j_star: 0.0 };
        let recs = trajectory_records(&obj, &traj, &ep).unwrap();
        let slack = 1e-8 * recs[0].H.abs();
        for w in recs.windows(2) {
            prop_assert!(w[1].H <= w[0].H + slack, "{} -> {}", w[0].H, w[1].H);
        }
    }

    #[test]
    fn kinetic_inequalities_hold_on_the_ball(seed in any::<u64>(), b_p in 0.1f64..5.0, e in 0.01f64..3.0) {
        let shape = BlockShape::new(vec![(3, 2), (2, 4)]).unwrap();
        let eps = EpsParam::new(e).unwrap();
        let kc = kinetic_constants(b_p, e).unwrap();
        let mut rng = RngStream::new(seed);
        for k in 0..20 {
            let blocks = shape.blocks().iter().map(|&(m, n)| rng.gaussian_matrix(m, n, 1.0).unwrap()).collect();
            let p = BlockPoint::new(&shape, blocks).unwrap();
            let radius = b_p * (k as f64 + 1.0) / 20.0;
            let p = p.scale(radius / p.norm());
            prop_assert_eq!(kinetic_violations(&p, eps, &kc).unwrap(), 0);
        }
    }

    #[test]
    fn alignment_is_bounded_by_the_hamiltonian(seed in any::<u64>(), e in 0.05f64..2.0, alpha in 0.01f64..0.5) {
        let gamma = 1.0;
        let (obj, ens) = instance(seed, 3, 2, 6, 1.0);
        let spec = RunSpec { params: inertial_params(0.02, gamma).unwrap(), rule: UpdateRule::regularized(e).unwrap(), n_steps: 200, stride: 1, alpha };
        let out = simulate(&obj, &ens, &spec).unwrap();
        let floor = 1e-12 * out.records[0].U;
        let (_, big_lambda) = pl_estimator(&out.records, floor).unwrap();
        let kc = kinetic_constants(out.max_p_norm, e).unwrap();
        let m_c = (big_lambda / (gamma * kc.kappa_k)).sqrt();
        for r in out.records.iter().filter(|r| r.U > floor) {
            prop_assert!(r.C.abs() <= m_c * r.H * (1.0 + 1e-9), "|C| {} vs M_C H {}", r.C.abs(), m_c * r.H);
        }
    }
}
