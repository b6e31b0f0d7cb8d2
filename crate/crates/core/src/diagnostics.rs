//! Energy bookkeeping along particle trajectories and the rate-constant
//! calculators for the Lyapunov analysis.

use std::ops::Range;

use crate::dynamics::{advance, StepParams, UpdateRule};
use crate::error::{Error, Result};
use crate::objectives::{check_shape, Objective};
use crate::product::{block_inner, BlockPoint, Ensemble};
use crate::spectral::{dissipation_scalar, psi_eps_scalar, EpsParam};
use crate::svd::singular_values;

/// Energies of one ensemble state.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: u64,
    pub t: f64,
    /// Objective `J_N`.
    pub J: f64,
    /// Kinetic energy `(1/N) Σ Ψ(Pᵢ)`.
    pub K: f64,
    /// Dissipation `(1/N) Σ ⟨Pᵢ, G(Pᵢ)⟩`.
    pub D: f64,
    /// Force energy `(1/N) Σ ‖aᵢ‖²`.
    pub A: f64,
    /// Alignment `(1/N) Σ ⟨aᵢ, Pᵢ⟩`.
    pub C: f64,
    /// Gap `J − J⋆`.
    pub U: f64,
    /// `K + γU`
    pub H: f64,
    /// `H − αC`
    pub L: f64,
}

impl DiagnosticsRecord {
    pub const FIELDS: [&'static str; 10] = ["step", "t", "J", "K", "D", "A", "C", "U", "H", "L"];

    pub fn values(&self) -> [f64; 8] {
        [self.J, self.K, self.D, self.A, self.C, self.U, self.H, self.L]
    }

    pub fn field(&self, f: Field) -> f64 {
        match f {
            Field::U => self.U,
            Field::H => self.H,
            Field::L => self.L,
        }
    }
}

/// Record fields that can be fitted by [`exp_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    U,
    H,
    L,
}

/// Kinetic potential paired with an update rule: `Ψ_ε` for regularized
/// Muon, the nuclear norm for the hard and Newton-Schulz rules (the `ε → 0`
/// limit), `½‖P‖²` for Euclidean momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kinetic {
    Regularized(EpsParam),
    Nuclear,
    Quadratic,
}

impl Kinetic {
    pub fn for_rule(rule: &UpdateRule) -> Self {
        match rule {
            UpdateRule::RegularizedMuon(e) => Self::Regularized(*e),
            UpdateRule::HardMuon | UpdateRule::NewtonSchulzMuon(_) => Self::Nuclear,
            UpdateRule::EuclideanMomentum => Self::Quadratic,
        }
    }

    /// `(Ψ(P), d(P))` for one block point.
    pub fn energy(&self, p: &BlockPoint) -> (f64, f64) {
        if let Self::Quadratic = self {
            let n2 = p.norm_sq();
            return (0.5 * n2, n2);
        }
        let mut k = 0.0;
        let mut d = 0.0;
        for block in p.blocks() {
            for s in singular_values(block) {
                match self {
                    Self::Regularized(e) => {
                        k += psi_eps_scalar(s, e.get());
                        d += dissipation_scalar(s, e.get());
                    }
                    _ => {
                        k += s;
                        d += s;
                    }
                }
            }
        }
        (k, d)
    }
}

/// Constants shared by every record of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub kinetic: Kinetic,
    pub gamma: f64,
    pub alpha: f64,
    pub j_star: f64,
}

pub(crate) fn record_from_forces(obj: &dyn Objective, ens: &Ensemble, forces: &[BlockPoint], ep: &EnergyParams) -> DiagnosticsRecord {
    use rayon::prelude::*;
    let n = ens.n_particles() as f64;
    let per: Vec<(f64, f64, f64, f64)> = ens
        .momenta
        .par_iter()
        .zip(forces.par_iter())
        .map(|(p, a)| {
            let (k, d) = ep.kinetic.energy(p);
            let c = block_inner(a, p).expect("forces share the ensemble shape");
            (k, d, a.norm_sq(), c)
        })
        .collect();
    let (mut k, mut d, mut a, mut c) = (0.0, 0.0, 0.0, 0.0);
    for &(ki, di, ai, ci) in &per {
        k += ki;
        d += di;
        a += ai;
        c += ci;
    }
    let j = obj.value_at(&ens.positions);
    let (k, d, a, c) = (k / n, d / n, a / n, c / n);
    let u = j - ep.j_star;
    let h = k + ep.gamma * u;
    DiagnosticsRecord { step: ens.step, t: ens.time, J: j, K: k, D: d, A: a, C: c, U: u, H: h, L: h - ep.alpha * c }
}

/// Diagnostics of `ens` with the regularized kinetic energy `Ψ_ε`.
pub fn energies(obj: &dyn Objective, ens: &Ensemble, eps: f64, gamma: f64, alpha: f64, j_star: f64) -> Result<DiagnosticsRecord> {
    let ep = EnergyParams { kinetic: Kinetic::Regularized(EpsParam::new(eps)?), gamma, alpha, j_star };
    energies_with(obj, ens, &ep)
}

pub fn energies_with(obj: &dyn Objective, ens: &Ensemble, ep: &EnergyParams) -> Result<DiagnosticsRecord> {
    let forces = obj.forces(ens)?;
    Ok(record_from_forces(obj, ens, &forces, ep))
}

/// Records for each state of a stored trajectory.
pub fn trajectory_records(obj: &dyn Objective, traj: &[Ensemble], ep: &EnergyParams) -> Result<Vec<DiagnosticsRecord>> {
    traj.iter().map(|e| energies_with(obj, e, ep)).collect()
}

/// Settings of a recorded discrete run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub params: StepParams,
    pub rule: UpdateRule,
    pub n_steps: usize,
    /// Record every `stride`-th step; the last step is always recorded.
    pub stride: usize,
    pub alpha: f64,
}

/// Result of [`simulate`]. On a non-finite state `error` is set and the
/// records gathered up to that point are kept.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub final_ensemble: Ensemble,
    /// Largest `‖Pᵢ‖_Θ` seen at any step.
    pub max_p_norm: f64,
    pub error: Option<Error>,
}

/// Runs the discrete scheme and records energies along the way.
pub fn simulate(obj: &dyn Objective, ens0: &Ensemble, spec: &RunSpec) -> Result<RunOutput> {
    simulate_observed(obj, ens0, spec, |_, _| {})
}

/// As [`simulate`], calling `observe` on every recorded state.
pub fn simulate_observed(
    obj: &dyn Objective,
    ens0: &Ensemble,
    spec: &RunSpec,
    mut observe: impl FnMut(&Ensemble, &DiagnosticsRecord),
) -> Result<RunOutput> {
    spec.rule.validate()?;
    check_shape(obj.shape(), ens0)?;
    if spec.stride == 0 {
        return Err(Error::InvalidInput("stride must be at least 1".into()));
    }
    let ep = EnergyParams {
        kinetic: Kinetic::for_rule(&spec.rule),
        gamma: spec.params.gamma,
        alpha: spec.alpha,
        j_star: obj.infimum(),
    };
    let mut ens = ens0.clone();
    let mut records = Vec::with_capacity(spec.n_steps / spec.stride + 2);
    let mut max_p_norm = ens.max_momentum_norm();
    for k in 0..=spec.n_steps {
        let forces = obj.forces_at(&ens.positions);
        if k % spec.stride == 0 || k == spec.n_steps {
            let rec = record_from_forces(obj, &ens, &forces, &ep);
            observe(&ens, &rec);
            records.push(rec);
        }
        if k == spec.n_steps {
            break;
        }
        match advance(&ens, &forces, &spec.params, &spec.rule) {
            Ok(next) => ens = next,
            Err(e @ Error::NonFiniteState { .. }) => {
                return Ok(RunOutput { records, final_ensemble: ens, max_p_norm, error: Some(e) });
            }
            Err(e) => return Err(e),
        }
        max_p_norm = max_p_norm.max(ens.max_momentum_norm());
    }
    Ok(RunOutput { records, final_ensemble: ens, max_p_norm, error: None })
}

/// `max_k |(H_{k+1} − H_{k−1}) / (t_{k+1} − t_{k−1}) + γ D_k|` over interior samples.
pub fn dissipation_residual(records: &[DiagnosticsRecord], gamma: f64) -> Result<f64> {
    if records.len() < 3 {
        return Err(Error::TooFewRecords { needed: 3, got: records.len() });
    }
    Ok(records
        .windows(3)
        .map(|w| ((w[2].H - w[0].H) / (w[2].t - w[0].t) + gamma * w[1].D).abs())
        .fold(0.0, f64::max))
}

/// Bounded-momentum constants of the regularized kinetic energy on `‖P‖ ≤ B_P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticConstants {
    pub kappa_k: f64,
    pub kappa_d: f64,
    pub l_g: f64,
    pub chi: f64,
}

pub fn kinetic_constants(b_p: f64, eps: f64) -> Result<KineticConstants> {
    if !(b_p >= 0.0 && b_p.is_finite()) {
        return Err(Error::InvalidInput(format!("momentum bound must be finite and nonnegative, got {b_p}")));
    }
    let e = EpsParam::new(eps)?.get();
    let s = b_p * b_p + e * e;
    Ok(KineticConstants { kappa_k: e * e / (s * s.sqrt()), kappa_d: 1.0 / s.sqrt(), l_g: 1.0 / e, chi: 1.0 })
}

/// Number of violated kinetic inequalities at one momentum `P` with
/// `‖P‖ ≤ B_P`: `Ψ_ε ≥ (κ_K/2)‖P‖²`, `d_ε ≥ κ_D‖P‖²`, `Ψ_ε ≤ χ d_ε`,
/// `‖Orth_ε(P)‖ ≤ L_G‖P‖`. A relative slack of `1e-12` absorbs rounding.
pub fn kinetic_violations(p: &BlockPoint, eps: EpsParam, kc: &KineticConstants) -> Result<usize> {
    const SLACK: f64 = 1e-12;
    let n2 = p.norm_sq();
    let (psi, d) = Kinetic::Regularized(eps).energy(p);
    let g = crate::product::block_orth_eps(p, eps)?.norm();
    let checks = [
        psi >= 0.5 * kc.kappa_k * n2 * (1.0 - SLACK),
        d >= kc.kappa_d * n2 * (1.0 - SLACK),
        psi <= kc.chi * d * (1.0 + SLACK),
        g <= kc.l_g * n2.sqrt() * (1.0 + SLACK),
    ];
    Ok(checks.iter().filter(|ok| !**ok).count())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateInputs {
    pub gamma: f64,
    pub alpha: f64,
    pub r: f64,
    /// Curvature remainder constant `σ`.
    pub sigma: f64,
    /// PL lower constant `λ`.
    pub lambda: f64,
    /// PL upper constant `Λ`.
    pub big_lambda: f64,
    pub kinetic: KineticConstants,
}

impl RateInputs {
    pub fn validate(&self) -> Result<()> {
        let k = &self.kinetic;
        let ok = self.gamma > 0.0
            && self.lambda > 0.0
            && self.big_lambda >= self.lambda
            && self.r > 0.0
            && self.r < 2.0
            && self.alpha > 0.0
            && self.sigma >= 0.0
            && k.kappa_k > 0.0
            && k.kappa_d > 0.0
            && k.l_g > 0.0
            && k.chi > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("rate inputs out of range: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousRate {
    pub m_c: f64,
    pub d_ar: f64,
    pub c_ar: f64,
    pub feasible: bool,
}

/// `M_C = √(Λ/(γκ_K))`, `d_{α,r} = γ − ασ − αγ/(2rκ_D)` and
/// `c_{α,r} = min{d_{α,r}/χ, 2λα(1 − r/2)} / (1 + αM_C)`.
pub fn continuous_rate(ri: &RateInputs) -> ContinuousRate {
    let k = &ri.kinetic;
    let m_c = (ri.big_lambda / (ri.gamma * k.kappa_k)).sqrt();
    let d_ar = ri.gamma - ri.alpha * ri.sigma - ri.alpha * ri.gamma / (2.0 * ri.r * k.kappa_d);
    let c_ar = (d_ar / k.chi).min(2.0 * ri.lambda * ri.alpha * (1.0 - ri.r / 2.0)) / (1.0 + ri.alpha * m_c);
    ContinuousRate { m_c, d_ar, c_ar, feasible: ri.alpha * m_c < 1.0 && d_ar > 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteRate {
    pub beta: f64,
    pub d_h: f64,
    pub a_h: f64,
    pub q_h: f64,
    pub c_h: f64,
    pub h_star: f64,
    pub feasible: bool,
}

/// Fixed-step contraction constants of the discrete map at step `h`, plus
/// the admissible step bound `h⋆`.
pub fn discrete_rate(ri: &RateInputs, h: f64, b_curv: f64) -> Result<DiscreteRate> {
    let g = ri.gamma;
    if !(h > 0.0 && g * h < 1.0) {
        return Err(Error::InvalidInput(format!("need 0 < h < 1/γ, got h={h}, γ={g}")));
    }
    if !(b_curv >= 0.0) {
        return Err(Error::InvalidInput(format!("B_curv must be nonnegative, got {b_curv}")));
    }
    let k = &ri.kinetic;
    let (a, r, lg) = (ri.alpha, ri.r, k.l_g);
    let beta = 1.0 - g * h;
    let m_c = continuous_rate(ri).m_c;

    let d_h = g - a * ri.sigma - a * g / (2.0 * r * beta * k.kappa_d)
        - h * lg * lg / (2.0 * k.kappa_d) * (g * g / beta + g * b_curv);
    let a_h = a * g * (1.0 - r / (2.0 * beta)) - g * g * h / (2.0 * beta);
    let q_h = (d_h * beta * beta * k.kappa_d / lg)
        .min(a_h / (g / (2.0 * ri.lambda) + lg * g * g * h * h / (beta * beta)));
    let c_h = q_h / (1.0 + a * m_c);

    let d0 = g - a * ri.sigma - a * g / (2.0 * r * k.kappa_d);
    let a0 = a * g * (1.0 - r / 2.0);
    let b_d = a * g * g / (r * k.kappa_d) + lg * lg / (2.0 * k.kappa_d) * (2.0 * g * g + g * b_curv);
    let b_a = g * g * (1.0 + a * r);
    let q_star = (d0 * k.kappa_d / (8.0 * lg)).min(a0 / (2.0 * (g / (2.0 * ri.lambda) + 4.0 * lg * g * g)));
    let c_star = q_star / (1.0 + a * m_c);
    let ratio = |num: f64, den: f64| if den == 0.0 { f64::INFINITY } else { num / (2.0 * den) };
    let h_star = if c_star > 0.0 {
        [1.0, 1.0 / (2.0 * g), ratio(d0, b_d), ratio(a0, b_a), 1.0 / c_star].into_iter().fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    Ok(DiscreteRate { beta, d_h, a_h, q_h, c_h, h_star, feasible: d_h > 0.0 && a_h > 0.0 && h * c_h <= 1.0 })
}

/// Curvature remainder `σ = L_G (M_D² M_{R,2} + M_R M_{D,2}) / κ_D`.
pub fn curvature_sigma(kc: &KineticConstants, b_curv: f64) -> f64 {
    kc.l_g * b_curv / kc.kappa_d
}

/// Default floor for [`pl_estimator`]: `1e-12 · U₀`.
pub fn default_u_floor(records: &[DiagnosticsRecord]) -> f64 {
    records.first().map_or(0.0, |r| 1e-12 * r.U)
}

/// Empirical PL constants `(min, max)` of `A/(2U)` over samples with `U > u_floor`.
pub fn pl_estimator(records: &[DiagnosticsRecord], u_floor: f64) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in records.iter().filter(|r| r.U > u_floor) {
        let q = r.A / (2.0 * r.U);
        lo = lo.min(q);
        hi = hi.max(q);
    }
    if lo.is_finite() {
        Ok((lo, hi))
    } else {
        Err(Error::NoRetainedSamples)
    }
}

/// Least-squares decay rate `−d log(field)/dt` over `window`.
pub fn exp_fit(records: &[DiagnosticsRecord], field: Field, window: Range<usize>) -> Result<f64> {
    let w = records.get(window.clone()).ok_or(Error::TooFewRecords { needed: window.end, got: records.len() })?;
    if w.len() < 2 {
        return Err(Error::TooFewRecords { needed: 2, got: w.len() });
    }
    let mut pts = Vec::with_capacity(w.len());
    for r in w {
        let v = r.field(field);
        if !(v > 0.0) {
            return Err(Error::NonPositiveField);
        }
        pts.push((r.t, v.ln()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("window has a single time value".into()));
    }
    Ok(-sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{inertial_params, integrate_rk4};
    use crate::matrix::Matrix;
    use crate::objectives::MeanMatch;
    use crate::product::BlockShape;

    fn diag34() -> Matrix {
        Matrix::from_diag(4, 3, &[3.0, 4.0])
    }

    fn synth(ts: &[f64], f: impl Fn(f64) -> f64) -> Vec<DiagnosticsRecord> {
        ts.iter()
            .enumerate()
            .map(|(k, &t)| {
                let v = f(t);
                DiagnosticsRecord { step: k as u64, t, J: v, K: 0.0, D: 0.0, A: 2.0 * v, C: 0.0, U: v, H: v, L: v }
            })
            .collect()
    }

    fn lcg_ensemble(n: usize, seed: u64) -> Ensemble {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let shape = BlockShape::single(4, 3).unwrap();
        let pos = (0..n).map(|_| BlockPoint::single(Matrix::from_fn(4, 3, |_, _| next()))).collect();
        let mom = (0..n).map(|_| BlockPoint::single(Matrix::from_fn(4, 3, |_, _| 0.3 * next()))).collect();
        Ensemble::new(shape, pos, mom).unwrap()
    }

    #[test]
    fn energies_examples() {
        let target = Matrix::from_fn(4, 3, |i, j| (i + j) as f64 * 0.1);
        let obj = MeanMatch::new(target.clone()).unwrap();
        let shape = obj.shape().clone();
        let at_min = Ensemble::at_rest(shape.clone(), vec![BlockPoint::single(target.clone())]).unwrap();
        let r = energies(&obj, &at_min, 1.0, 1.0, 0.01, 0.0).unwrap();
        assert_eq!(r.values(), [0.0; 8]);

        let off = Ensemble::at_rest(shape.clone(), vec![BlockPoint::single(target.add(&diag34()))]).unwrap();
        let r = energies(&obj, &off, 1.0, 2.0, 0.01, 0.0).unwrap();
        assert_eq!((r.K, r.D, r.C), (0.0, 0.0, 0.0));
        assert_eq!(r.H, 2.0 * r.U);

        let moving = Ensemble::new(shape, vec![BlockPoint::single(target)], vec![BlockPoint::single(diag34())]).unwrap();
        let r = energies(&obj, &moving, 4.0, 1.0, 0.01, 0.0).unwrap();
        assert!((r.K - 2.6568542).abs() < 1e-7);
        assert!((r.D - 4.6284271).abs() < 1e-7);
        assert_eq!(r.C, 0.0);
        assert_eq!(r.H, r.K + r.U);
        assert_eq!(r.L, r.H - 0.01 * r.C);
    }

    #[test]
    fn kinetic_for_comparators() {
        let p = BlockPoint::single(diag34());
        assert_eq!(Kinetic::Quadratic.energy(&p), (12.5, 25.0));
        let (k, d) = Kinetic::Nuclear.energy(&p);
        assert!((k - 7.0).abs() < 1e-14 && (d - 7.0).abs() < 1e-14);
    }

    #[test]
    fn residual_examples() {
        let flat = synth(&[0.0, 0.1, 0.2, 0.3], |_| 1.0);
        let flat: Vec<_> = flat.into_iter().map(|mut r| {
            r.D = 0.0;
            r
        }).collect();
        assert_eq!(dissipation_residual(&flat, 1.0).unwrap(), 0.0);
        assert!(matches!(dissipation_residual(&flat[..2], 1.0), Err(Error::TooFewRecords { .. })));
    }

    #[test]
    fn rk4_run_satisfies_dissipation_identity() {
        let obj = MeanMatch::new(Matrix::zeros(4, 3)).unwrap();
        let ens = lcg_ensemble(5, 3);
        let traj = integrate_rk4(&obj, &ens, 1.0, 1.0, 1e-3, 0.5, 1).unwrap();
        let ep = EnergyParams { kinetic: Kinetic::Regularized(EpsParam::new(1.0).unwrap()), gamma: 1.0, alpha: 0.01, j_star: 0.0 };
        let recs = trajectory_records(&obj, &traj, &ep).unwrap();
        let res = dissipation_residual(&recs, 1.0).unwrap();
        assert!(res <= 1e-4 * recs[0].H.abs().max(1.0), "residual {res}");
        for w in recs.windows(2) {
            assert!(w[1].H <= w[0].H + 1e-8 * recs[0].H.abs());
        }
    }

    #[test]
    fn discrete_residual_is_first_order() {
        let obj = MeanMatch::new(Matrix::zeros(4, 3)).unwrap();
        let ens = lcg_ensemble(4, 11);
        let resid = |h: f64| {
            let spec = RunSpec {
                params: inertial_params(h, 1.0).unwrap(),
                rule: UpdateRule::regularized(1.0).unwrap(),
                n_steps: (1.0 / h).round() as usize,
                stride: 1,
                alpha: 0.01,
            };
            dissipation_residual(&simulate(&obj, &ens, &spec).unwrap().records, 1.0).unwrap()
        };
        let ratio = resid(0.02) / resid(0.01);
        assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn kinetic_constant_examples() {
        let k = kinetic_constants(0.0, 0.5).unwrap();
        assert!((k.kappa_k - 2.0).abs() < 1e-15 && (k.kappa_d - 2.0).abs() < 1e-15 && k.l_g == 2.0);
        let k = kinetic_constants(3f64.sqrt(), 1.0).unwrap();
        assert!((k.kappa_k - 0.125).abs() < 1e-15);
        assert!((k.kappa_d - 0.5).abs() < 1e-15);
        assert_eq!((k.l_g, k.chi), (1.0, 1.0));
        assert!(kinetic_constants(-1.0, 1.0).is_err());
        assert!(kinetic_constants(1.0, 0.0).is_err());
    }

    #[test]
    fn kinetic_audit_on_ball() {
        let eps = EpsParam::new(0.3).unwrap();
        let b = 2.0;
        let kc = kinetic_constants(b, eps.get()).unwrap();
        let ens = lcg_ensemble(200, 5);
        for p in &ens.positions {
            let p = p.scale(b / p.norm() * 0.999);
            assert_eq!(kinetic_violations(&p, eps, &kc).unwrap(), 0);
        }
    }

    fn unit_inputs(alpha: f64) -> RateInputs {
        RateInputs {
            gamma: 1.0,
            alpha,
            r: 1.0,
            sigma: 0.0,
            lambda: 1.0,
            big_lambda: 1.0,
            kinetic: KineticConstants { kappa_k: 1.0, kappa_d: 1.0, l_g: 1.0, chi: 1.0 },
        }
    }

    #[test]
    fn continuous_rate_examples() {
        let c = continuous_rate(&unit_inputs(0.5));
        assert!((c.m_c - 1.0).abs() < 1e-12);
        assert!((c.d_ar - 0.75).abs() < 1e-12);
        assert!((c.c_ar - 1.0 / 3.0).abs() < 1e-12);
        assert!(c.feasible);

        let tiny = continuous_rate(&unit_inputs(1e-12));
        assert!((tiny.d_ar - 1.0).abs() < 1e-11 && tiny.c_ar < 1e-11 && tiny.feasible);

        assert!(!continuous_rate(&unit_inputs(1.0)).feasible);
    }

    #[test]
    fn discrete_rate_examples() {
        let d = discrete_rate(&unit_inputs(0.5), 0.1, 0.0).unwrap();
        assert!((d.beta - 0.9).abs() < 1e-15);
        let expect = 1.0 - 0.5 / (2.0 * 0.9) - 0.1 * (1.0 / 0.9) / 2.0;
        assert!((d.d_h - expect).abs() < 1e-12);
        assert!((d.d_h - 2.0 / 3.0).abs() < 1e-12);

        let tiny = discrete_rate(&unit_inputs(1e-14), 0.1, 0.0).unwrap();
        assert!((tiny.d_h - (1.0 - 0.1 / (2.0 * 0.9))).abs() < 1e-12);

        assert!(discrete_rate(&unit_inputs(0.5), 1.0, 0.0).is_err());
        assert!(discrete_rate(&unit_inputs(0.5), 0.1, -1.0).is_err());
    }

    #[test]
    fn h_star_takes_the_smallest_bound() {
        let ri = unit_inputs(0.5);
        let d = discrete_rate(&ri, 0.01, 0.0).unwrap();
        // d0 = 0.75, a0 = 0.25, B_d = 0.5 + 1 = 1.5, B_a = 1.5,
        // q⋆ = min(0.75/8, 0.25/(2·4.5)) = 0.25/9, c⋆ = q⋆/1.5.
        let expect = [1.0, 0.5, 0.75 / 3.0, 0.25 / 3.0, 1.5 * 9.0 / 0.25].into_iter().fold(f64::INFINITY, f64::min);
        assert!((d.h_star - expect).abs() < 1e-12);
    }

    #[test]
    fn pl_examples() {
        let target = Matrix::from_fn(4, 3, |i, j| (i * j) as f64 * 0.2);
        let obj = MeanMatch::new(target).unwrap();
        let spec = RunSpec {
            params: inertial_params(0.01, 1.0).unwrap(),
            rule: UpdateRule::regularized(0.1).unwrap(),
            n_steps: 300,
            stride: 5,
            alpha: 0.01,
        };
        let out = simulate(&obj, &lcg_ensemble(4, 2), &spec).unwrap();
        let (lo, hi) = pl_estimator(&out.records, default_u_floor(&out.records)).unwrap();
        assert!((lo - 1.0).abs() < 1e-9 && (hi - 1.0).abs() < 1e-9);
        assert!(matches!(pl_estimator(&out.records, f64::INFINITY), Err(Error::NoRetainedSamples)));
    }

    #[test]
    fn exp_fit_examples() {
        let ts: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let recs = synth(&ts, |t| (-2.0 * t).exp());
        assert!((exp_fit(&recs, Field::U, 0..50).unwrap() - 2.0).abs() < 1e-6);
        let flat = synth(&ts, |_| 3.0);
        assert!(exp_fit(&flat, Field::H, 0..50).unwrap().abs() < 1e-12);
        let zero = synth(&ts, |_| 0.0);
        assert!(matches!(exp_fit(&zero, Field::L, 0..50), Err(Error::NonPositiveField)));
    }

    #[test]
    fn simulate_keeps_partial_records_on_blowup() {
        let obj = MeanMatch::new(Matrix::zeros(4, 3)).unwrap();
        let spec = RunSpec {
            params: StepParams { eta: 1e300, beta: 0.5, gamma: 0.5, h: 1.0 },
            rule: UpdateRule::EuclideanMomentum,
            n_steps: 50,
            stride: 1,
            alpha: 0.0,
        };
        let out = simulate(&obj, &lcg_ensemble(2, 1), &spec).unwrap();
        assert!(matches!(out.error, Some(Error::NonFiniteState { .. })));
        assert!(!out.records.is_empty() && out.records.len() < 51);
    }

    #[test]
    fn zero_step_run_has_one_record() {
        let obj = MeanMatch::new(Matrix::zeros(4, 3)).unwrap();
        let spec = RunSpec {
            params: inertial_params(0.01, 1.0).unwrap(),
            rule: UpdateRule::HardMuon,
            n_steps: 0,
            stride: 10,
            alpha: 0.01,
        };
        let out = simulate(&obj, &lcg_ensemble(2, 1), &spec).unwrap();
        assert_eq!(out.records.len(), 1);
    }
}
