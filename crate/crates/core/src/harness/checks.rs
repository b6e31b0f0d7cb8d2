//! Quick oracle suite behind `muon-flow check`.

use super::rng::RngStream;
use crate::diagnostics::{continuous_rate, discrete_rate, kinetic_constants, KineticConstants, RateInputs};
use crate::dynamics::ode_limit_check;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::objectives::{fd_force_check, GatedMoE, MeanMatch, Objective, TeacherStudent};
use crate::product::{BlockPoint, BlockShape, Ensemble};
use crate::spectral::{dissipation_density, grad_phi_eps, norms, orth, orth_eps, phi_eps, psi_eps, EpsParam};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &'static str, worst: f64, tol: f64) -> CheckOutcome {
    CheckOutcome { name, passed: worst <= tol, detail: format!("worst {worst:.3e} (tolerance {tol:.0e})") }
}

fn fenchel_and_mirror(rng: &mut RngStream) -> Result<Vec<CheckOutcome>> {
    let mut fenchel = 0.0f64;
    let mut mirror = 0.0f64;
    let mut duality = 0.0f64;
    for &(m, n) in &[(2, 2), (8, 4), (16, 8)] {
        for &e in &[0.1, 1.0, 4.0] {
            let eps = EpsParam::new(e)?;
            for _ in 0..20 {
                let p = rng.gaussian_matrix(m, n, 1.0)?;
                let g = orth_eps(&p, eps)?;
                let lhs = psi_eps(&p, eps)? + phi_eps(&g, eps)?;
                let d = dissipation_density(&p, eps)?;
                fenchel = fenchel.max((lhs - d).abs() / d.max(1.0));
                let back = grad_phi_eps(&g, eps)?;
                mirror = mirror.max(back.sub(&p).fro_norm() / p.fro_norm());
                duality = duality.max((p.dot(&orth(&p)?) - norms(&p)?.nuc).abs());
            }
        }
    }
    Ok(vec![
        outcome("fenchel equality", fenchel, 1e-9),
        outcome("mirror round trip", mirror, 1e-8),
        outcome("nuclear duality", duality, 1e-9),
    ])
}

fn force_oracles(rng: &mut RngStream) -> Result<Vec<CheckOutcome>> {
    let target = rng.gaussian_matrix(4, 3, 0.5)?;
    let mm = MeanMatch::new(target)?;
    let pos = (0..3).map(|_| Ok(BlockPoint::single(rng.gaussian_matrix(4, 3, 1.0)?))).collect::<Result<Vec<_>>>()?;
    let ens = Ensemble::at_rest(mm.shape().clone(), pos)?;
    let mean_match = fd_force_check(&mm, &ens, 1e-5)?;

    let (d, r, p) = (3, 2, 2);
    let shape = BlockShape::new(vec![(p, r), (r, d)])?;
    let draw = |rng: &mut RngStream| -> Result<BlockPoint> {
        BlockPoint::new(&shape, vec![rng.gaussian_matrix(p, r, 0.7)?, rng.gaussian_matrix(r, d, 0.7)?])
    };
    let teacher = vec![draw(rng)?];
    let inputs = (0..6).map(|_| (0..d).map(|_| rng.gaussian()).collect()).collect();
    let ts = TeacherStudent::from_teacher(d, r, p, &teacher, inputs)?;
    let students = (0..3).map(|_| draw(rng)).collect::<Result<Vec<_>>>()?;
    let teacher_student = fd_force_check(&ts, &Ensemble::at_rest(shape.clone(), students)?, 1e-5)?;

    let (dim, classes) = (3, 3);
    let inputs: Vec<Vec<f64>> = (0..5).map(|_| (0..dim).map(|_| rng.gaussian()).collect()).collect();
    let labels = (0..5).map(|i| i % classes).collect();
    let moe = GatedMoE::new(dim, classes, inputs, labels, 1e-6)?;
    let moe_shape = BlockShape::new(vec![(dim, classes), (dim, 1)])?;
    let experts = (0..3)
        .map(|_| BlockPoint::new(&moe_shape, vec![rng.gaussian_matrix(dim, classes, 1.0)?, rng.gaussian_matrix(dim, 1, 1.0)?]))
        .collect::<Result<Vec<_>>>()?;
    let gated = fd_force_check(&moe, &Ensemble::at_rest(moe_shape.clone(), experts)?, 1e-5)?;

    Ok(vec![
        outcome("mean-match forces", mean_match, 1e-6),
        outcome("teacher-student forces", teacher_student, 1e-6),
        outcome("gated-MoE forces", gated, 1e-6),
    ])
}

fn discretization(rng: &mut RngStream) -> Result<CheckOutcome> {
    let obj = MeanMatch::new(rng.gaussian_matrix(4, 3, 0.5)?)?;
    let shape = obj.shape().clone();
    let pos = (0..4).map(|_| Ok(BlockPoint::single(rng.gaussian_matrix(4, 3, 1.0)?))).collect::<Result<Vec<_>>>()?;
    let mom = (0..4).map(|_| Ok(BlockPoint::single(rng.gaussian_matrix(4, 3, 0.3)?))).collect::<Result<Vec<_>>>()?;
    let ens = Ensemble::new(shape, pos, mom)?;
    let hs = [0.04, 0.02, 0.01];
    let errs = ode_limit_check(&obj, &ens, 1.0, 1.0, 1.0, &hs)?;
    let slope = (errs[2].ln() - errs[0].ln()) / (hs[2].ln() - hs[0].ln());
    Ok(CheckOutcome {
        name: "first-order discretization",
        passed: (0.8..=1.2).contains(&slope),
        detail: format!("log-log slope {slope:.3}"),
    })
}

fn rates() -> Result<CheckOutcome> {
    let ri = RateInputs {
        gamma: 1.0,
        alpha: 0.5,
        r: 1.0,
        sigma: 0.0,
        lambda: 1.0,
        big_lambda: 1.0,
        kinetic: KineticConstants { kappa_k: 1.0, kappa_d: 1.0, l_g: 1.0, chi: 1.0 },
    };
    let c = continuous_rate(&ri);
    let d = discrete_rate(&ri, 0.1, 0.0)?;
    let k = kinetic_constants(3f64.sqrt(), 1.0)?;
    let worst = [
        (c.m_c - 1.0).abs(),
        (c.d_ar - 0.75).abs(),
        (c.c_ar - 1.0 / 3.0).abs(),
        (d.d_h - 2.0 / 3.0).abs(),
        (k.kappa_k - 0.125).abs(),
        (k.kappa_d - 0.5).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    Ok(outcome("rate constants", worst, 1e-12))
}

/// Runs every check; `Err` only on an unexpected numerical error.
pub fn run_checks(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = RngStream::new(seed);
    let mut out = fenchel_and_mirror(&mut rng)?;
    out.extend(force_oracles(&mut rng)?);
    out.push(discretization(&mut rng)?);
    out.push(rates()?);
    let zero = Matrix::zeros(3, 2);
    out.push(CheckOutcome {
        name: "zero momentum",
        passed: orth_eps(&zero, EpsParam::new(1.0)?)?.is_zero() && psi_eps(&zero, EpsParam::new(1.0)?)? == 0.0,
        detail: "Orth_ε(0) = 0, Ψ_ε(0) = 0".into(),
    });
    Ok(out)
}
