//! Time evolution of particle ensembles.
//!
//! The discrete scheme updates momentum first and then transports positions
//! along the rule's map of the *new* momentum:
//!
//! ```text
//! P⁺ᵢ = β Pᵢ + (1 − β) aᵢ(θ)
//! θ⁺ᵢ = θᵢ − η G(P⁺ᵢ)
//! ```
//!
//! Under the inertial scaling `η = h`, `β = 1 − γh` this is a first-order
//! discretization of the finite-particle ODE
//! `θ̇ᵢ = −Orth_ε(Pᵢ)`, `Ṗᵢ = γ(aᵢ − Pᵢ)`.

use std::fmt;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objectives::Objective;
use crate::product::{block_orth_eps, BlockPoint, Ensemble};
use crate::spectral::{self, EpsParam, NS_DEFAULT_ITERS};
use crate::svd::DEFAULT_RANK_TOL;

/// Momentum-to-update map `G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UpdateRule {
    RegularizedMuon(EpsParam),
    HardMuon,
    NewtonSchulzMuon(usize),
    EuclideanMomentum,
}

impl UpdateRule {
    pub fn regularized(eps: f64) -> Result<Self> {
        Ok(Self::RegularizedMuon(EpsParam::new(eps)?))
    }

    pub fn newton_schulz() -> Self {
        Self::NewtonSchulzMuon(NS_DEFAULT_ITERS)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::NewtonSchulzMuon(0) => Err(Error::InvalidInput("Newton-Schulz needs at least one iteration".into())),
            _ => Ok(()),
        }
    }

    /// Applies `G` blockwise.
    pub fn apply(&self, p: &BlockPoint) -> Result<BlockPoint> {
        match *self {
            Self::RegularizedMuon(e) => block_orth_eps(p, e),
            Self::HardMuon => p.map_blocks(|m| spectral::orth_hard(m, DEFAULT_RANK_TOL)),
            Self::NewtonSchulzMuon(iters) => p.map_blocks(|m| spectral::newton_schulz5(m, iters)),
            Self::EuclideanMomentum => Ok(p.clone()),
        }
    }

    /// Short machine-friendly name used in file names and CSV columns.
    pub fn label(&self) -> &'static str {
        match self {
            Self::RegularizedMuon(_) => "regularized",
            Self::HardMuon => "hard",
            Self::NewtonSchulzMuon(_) => "newton_schulz",
            Self::EuclideanMomentum => "euclidean",
        }
    }

    pub fn eps(&self) -> Option<f64> {
        match self {
            Self::RegularizedMuon(e) => Some(e.get()),
            _ => None,
        }
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, Self::RegularizedMuon(_) | Self::EuclideanMomentum)
    }
}

impl fmt::Display for UpdateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::RegularizedMuon(e) => write!(f, "regularized(eps={:e})", e.get()),
            Self::NewtonSchulzMuon(k) => write!(f, "newton_schulz({k})"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    /// Position step `η`.
    pub eta: f64,
    /// Momentum retention `β`.
    pub beta: f64,
    /// Damping `γ`.
    pub gamma: f64,
    /// Physical time per step.
    pub h: f64,
}

/// Inertial scaling `η = h`, `β = 1 − γh`.
pub fn inertial_params(h: f64, gamma: f64) -> Result<StepParams> {
    let gh = gamma * h;
    if !(h > 0.0 && gamma > 0.0 && gh < 1.0) {
        return Err(Error::InvalidScaling(gh));
    }
    Ok(StepParams { eta: h, beta: 1.0 - gh, gamma, h })
}

/// Applies one discrete step given precomputed forces at the current positions.
pub(crate) fn advance(ens: &Ensemble, forces: &[BlockPoint], sp: &StepParams, rule: &UpdateRule) -> Result<Ensemble> {
    let updated: Vec<(BlockPoint, BlockPoint)> = ens
        .positions
        .par_iter()
        .zip(ens.momenta.par_iter())
        .zip(forces.par_iter())
        .map(|((theta, p), a)| {
            let mut p_next = p.scale(sp.beta);
            p_next.axpy(1.0 - sp.beta, a);
            let g = rule.apply(&p_next)?;
            let mut theta_next = theta.clone();
            theta_next.axpy(-sp.eta, &g);
            Ok((theta_next, p_next))
        })
        .collect::<Result<_>>()?;
    let (positions, momenta): (Vec<_>, Vec<_>) = updated.into_iter().unzip();
    let next = ens.with_state(positions, momenta, ens.step + 1, (ens.step + 1) as f64 * sp.h);
    if !next.is_finite() {
        return Err(Error::NonFiniteState { step: next.step });
    }
    Ok(next)
}

/// One step of the momentum-first scheme with forces at the current positions.
pub fn discrete_step(obj: &dyn Objective, ens: &Ensemble, sp: &StepParams, rule: &UpdateRule) -> Result<Ensemble> {
    rule.validate()?;
    let forces = obj.forces(ens)?;
    advance(ens, &forces, sp, rule)
}

/// Runs `n_steps` discrete steps and returns the final ensemble.
pub fn run_discrete(obj: &dyn Objective, ens0: &Ensemble, sp: &StepParams, rule: &UpdateRule, n_steps: usize) -> Result<Ensemble> {
    let mut ens = ens0.clone();
    for _ in 0..n_steps {
        ens = discrete_step(obj, &ens, sp, rule)?;
    }
    Ok(ens)
}

/// Phase-space vector field of the finite-particle ODE.
#[derive(Debug, Clone)]
pub struct PhaseField {
    pub d_theta: Vec<BlockPoint>,
    pub d_p: Vec<BlockPoint>,
}

fn field_with_dual(
    obj: &dyn Objective,
    positions: &[BlockPoint],
    momenta: &[BlockPoint],
    gamma: f64,
    rule: &UpdateRule,
    dual: &[f64],
) -> Result<PhaseField> {
    let forces = obj.forces_for_dual(positions, dual);
    let pairs: Vec<(BlockPoint, BlockPoint)> = momenta
        .par_iter()
        .zip(forces.par_iter())
        .map(|(p, a)| {
            let d_theta = rule.apply(p)?.scale(-1.0);
            let d_p = a.sub(p).scale(gamma);
            Ok((d_theta, d_p))
        })
        .collect::<Result<_>>()?;
    let (d_theta, d_p) = pairs.into_iter().unzip();
    Ok(PhaseField { d_theta, d_p })
}

/// `θ̇ᵢ = −G(Pᵢ)`, `Ṗᵢ = γ(aᵢ − Pᵢ)`.
pub fn ode_rhs(obj: &dyn Objective, ens: &Ensemble, gamma: f64, rule: &UpdateRule) -> Result<PhaseField> {
    rule.validate()?;
    crate::objectives::check_shape(obj.shape(), ens)?;
    let dual = obj.risk_grad(&obj.moment(&ens.positions));
    field_with_dual(obj, &ens.positions, &ens.momenta, gamma, rule, &dual)
}

/// Source of the moment used at each RK4 stage.
pub(crate) enum StageMoments<'a> {
    /// Computed from the integrated particles themselves.
    SelfConsistent,
    /// Replayed from a stored path (mean-field copies).
    Frozen(&'a [Vec<f64>; 4]),
}

fn shifted(base: &[BlockPoint], dir: &[BlockPoint], h: f64) -> Vec<BlockPoint> {
    base.iter()
        .zip(dir)
        .map(|(b, d)| {
            let mut out = b.clone();
            out.axpy(h, d);
            out
        })
        .collect()
}

/// One classical RK4 step; returns the new ensemble and the four stage moments.
pub(crate) fn rk4_step(
    obj: &dyn Objective,
    ens: &Ensemble,
    gamma: f64,
    rule: &UpdateRule,
    h: f64,
    source: StageMoments<'_>,
) -> Result<(Ensemble, [Vec<f64>; 4])> {
    let mut moments: [Vec<f64>; 4] = Default::default();
    let mut stage = |k: usize, pos: &[BlockPoint], mom: &[BlockPoint]| -> Result<PhaseField> {
        let m = match &source {
            StageMoments::SelfConsistent => obj.moment(pos),
            StageMoments::Frozen(path) => path[k].clone(),
        };
        let dual = obj.risk_grad(&m);
        moments[k] = m;
        field_with_dual(obj, pos, mom, gamma, rule, &dual)
    };
    let k1 = stage(0, &ens.positions, &ens.momenta)?;
    let k2 = stage(1, &shifted(&ens.positions, &k1.d_theta, h / 2.0), &shifted(&ens.momenta, &k1.d_p, h / 2.0))?;
    let k3 = stage(2, &shifted(&ens.positions, &k2.d_theta, h / 2.0), &shifted(&ens.momenta, &k2.d_p, h / 2.0))?;
    let k4 = stage(3, &shifted(&ens.positions, &k3.d_theta, h), &shifted(&ens.momenta, &k3.d_p, h))?;

    let combine = |base: &[BlockPoint], a: &[BlockPoint], b: &[BlockPoint], c: &[BlockPoint], d: &[BlockPoint]| {
        (0..base.len())
            .map(|i| {
                let mut incr = a[i].clone();
                incr.axpy(2.0, &b[i]);
                incr.axpy(2.0, &c[i]);
                incr.axpy(1.0, &d[i]);
                let mut out = base[i].clone();
                out.axpy(h / 6.0, &incr);
                out
            })
            .collect::<Vec<_>>()
    };
    let positions = combine(&ens.positions, &k1.d_theta, &k2.d_theta, &k3.d_theta, &k4.d_theta);
    let momenta = combine(&ens.momenta, &k1.d_p, &k2.d_p, &k3.d_p, &k4.d_p);
    let next = ens.with_state(positions, momenta, ens.step + 1, ens.time + h);
    if !next.is_finite() {
        return Err(Error::NonFiniteState { step: next.step });
    }
    Ok((next, moments))
}

/// Number of fixed steps of size `h` covering `[0, t_end]`.
pub(crate) fn step_count(t_end: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !(t_end >= 0.0) {
        return Err(Error::InvalidInput(format!("need h > 0 and t_end >= 0, got h={h}, t_end={t_end}")));
    }
    let n = (t_end / h).round();
    if (n * h - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::InvalidInput(format!("t_end={t_end} is not a multiple of h={h}")));
    }
    Ok(n as usize)
}

/// Trajectory of the regularized finite-particle ODE with classical RK4.
///
/// Stores the initial state and every `stride`-th state (plus the final one).
/// On a non-finite state the samples collected so far are returned inside
/// [`PartialTrajectory`].
pub fn integrate_rk4(
    obj: &dyn Objective,
    ens: &Ensemble,
    gamma: f64,
    eps: f64,
    h_ode: f64,
    t_end: f64,
    stride: usize,
) -> std::result::Result<Vec<Ensemble>, PartialTrajectory> {
    let wrap = |error: Error| PartialTrajectory { samples: Vec::new(), error };
    let rule = UpdateRule::regularized(eps).map_err(wrap)?;
    integrate_rk4_rule(obj, ens, gamma, &rule, h_ode, t_end, stride)
}

/// As [`integrate_rk4`] with an explicit smooth rule (regularized or Euclidean).
pub fn integrate_rk4_rule(
    obj: &dyn Objective,
    ens: &Ensemble,
    gamma: f64,
    rule: &UpdateRule,
    h_ode: f64,
    t_end: f64,
    stride: usize,
) -> std::result::Result<Vec<Ensemble>, PartialTrajectory> {
    let wrap = |error: Error| PartialTrajectory { samples: Vec::new(), error };
    if !rule.is_smooth() {
        return Err(wrap(Error::InvalidInput(format!("RK4 needs a Lipschitz field; {rule} is not"))));
    }
    if stride == 0 {
        return Err(wrap(Error::InvalidInput("stride must be at least 1".into())));
    }
    crate::objectives::check_shape(obj.shape(), ens).map_err(wrap)?;
    let n = step_count(t_end, h_ode).map_err(wrap)?;
    let mut samples = vec![ens.clone()];
    let mut cur = ens.clone();
    for k in 1..=n {
        match rk4_step(obj, &cur, gamma, rule, h_ode, StageMoments::SelfConsistent) {
            Ok((next, _)) => cur = next,
            Err(error) => return Err(PartialTrajectory { samples, error }),
        }
        if k % stride == 0 || k == n {
            samples.push(cur.clone());
        }
    }
    Ok(samples)
}

/// Samples gathered before a run aborted.
#[derive(Debug, Clone)]
pub struct PartialTrajectory {
    pub samples: Vec<Ensemble>,
    pub error: Error,
}

impl From<PartialTrajectory> for Error {
    fn from(p: PartialTrajectory) -> Self {
        p.error
    }
}

/// Endpoint errors of the discrete scheme against a fine RK4 reference
/// (`h_ode = min(h_list) / 20`), in the root-mean-square phase distance.
pub fn ode_limit_check(obj: &dyn Objective, ens0: &Ensemble, gamma: f64, eps: f64, t_end: f64, h_list: &[f64]) -> Result<Vec<f64>> {
    if h_list.is_empty() {
        return Ok(Vec::new());
    }
    if h_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("h_list must be strictly decreasing".into()));
    }
    if t_end == 0.0 {
        return Ok(vec![0.0; h_list.len()]);
    }
    let h_min = h_list[h_list.len() - 1];
    let h_ode = h_min / 20.0;
    let reference = integrate_rk4(obj, ens0, gamma, eps, h_ode, t_end, usize::MAX)?;
    let reference = reference.last().expect("trajectory has the initial sample");
    let rule = UpdateRule::regularized(eps)?;
    h_list
        .iter()
        .map(|&h| {
            let sp = inertial_params(h, gamma)?;
            let end = run_discrete(obj, ens0, &sp, &rule, step_count(t_end, h)?)?;
            end.avg_distance(reference)
        })
        .collect()
}

/// Outcome of an ε-sweep.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub rule: UpdateRule,
    pub final_ensemble: Ensemble,
    /// Objective value after each step, starting with the initial value.
    pub objective: Vec<f64>,
    /// `max_k` root-mean-square phase distance to the hard-Muon run at step `k`.
    pub divergence_from_hard: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub hard: SweepRun,
    pub regularized: Vec<SweepRun>,
}

/// Runs hard Muon and each regularized `ε` in lockstep from the same start.
pub fn eps_sweep(obj: &dyn Objective, ens0: &Ensemble, sp: &StepParams, eps_list: &[f64], n_steps: usize) -> Result<SweepResult> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("eps_list must be strictly decreasing".into()));
    }
    let rules: Vec<UpdateRule> = std::iter::once(Ok(UpdateRule::HardMuon))
        .chain(eps_list.iter().map(|&e| UpdateRule::regularized(e)))
        .collect::<Result<_>>()?;
    let j0 = obj.value(ens0)?;
    let mut states: Vec<Ensemble> = vec![ens0.clone(); rules.len()];
    let mut traces: Vec<Vec<f64>> = vec![vec![j0]; rules.len()];
    let mut divergence = vec![0.0f64; rules.len()];
    for _ in 0..n_steps {
        for (k, rule) in rules.iter().enumerate() {
            states[k] = discrete_step(obj, &states[k], sp, rule)?;
            traces[k].push(obj.value(&states[k])?);
        }
        for k in 1..rules.len() {
            divergence[k] = divergence[k].max(states[k].avg_distance(&states[0])?);
        }
    }
    let mut runs = rules.into_iter().zip(states).zip(traces).zip(divergence).map(
        |(((rule, final_ensemble), objective), divergence_from_hard)| SweepRun {
            rule,
            final_ensemble,
            objective,
            divergence_from_hard,
        },
    );
    let hard = runs.next().expect("hard run is always present");
    Ok(SweepResult { hard, regularized: runs.collect() })
}
