//! Empirical propagation of chaos.
//!
//! A large reference ensemble stands in for the mean-field law. The
//! `N`-particle system and `N` independent copies driven by the reference
//! moment path start from the same initial states; their mean squared phase
//! gap should shrink like `1/N`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;

use crate::dynamics::{rk4_step, step_count, StageMoments, UpdateRule};
use crate::error::{Error, Result};
use crate::harness::rng::RngStream;
use crate::objectives::Objective;
use crate::product::{BlockPoint, Ensemble};

#[derive(Debug, Clone, PartialEq)]
pub struct ChaosConfig {
    pub n_list: Vec<usize>,
    /// Size of the reference ensemble used as the mean-field surrogate.
    pub n_ref: usize,
    pub t_end: f64,
    pub h_ode: f64,
    pub n_seeds: usize,
    pub eps: f64,
    pub gamma: f64,
    /// Base seed; replicate `s` draws from stream `s + 1` of this seed.
    pub seed: u64,
    /// Standard deviation of the initial positions and momenta.
    pub init_scale: f64,
}

impl Default for ChaosConfig {
    fn default() -> Self {
        Self {
            n_list: vec![8, 16, 32, 64, 128],
            n_ref: 1024,
            t_end: 2.0,
            h_ode: 0.01,
            n_seeds: 8,
            eps: 1.0,
            gamma: 1.0,
            seed: 0,
            init_scale: 1.0,
        }
    }
}

impl ChaosConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let max_n = self.n_list.iter().copied().max().unwrap_or(0);
        if self.n_list.is_empty() || self.n_list.contains(&0) {
            return bad("n_list must be nonempty with positive entries".into());
        }
        if self.n_ref < 8 * max_n {
            return bad(format!("n_ref = {} must be at least 8 · max(n_list) = {}", self.n_ref, 8 * max_n));
        }
        if self.n_seeds == 0 {
            return bad("n_seeds must be positive".into());
        }
        if !(self.t_end >= 0.0 && self.h_ode > 0.0 && self.eps > 0.0 && self.gamma > 0.0 && self.init_scale > 0.0) {
            return bad("t_end, h_ode, eps, gamma and init_scale must be positive".into());
        }
        step_count(self.t_end, self.h_ode).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

/// Order-sensitive hash of the bit patterns of an ensemble's phase state.
pub fn state_hash(ens: &Ensemble) -> u64 {
    let mut h = DefaultHasher::new();
    for p in ens.positions.iter().chain(&ens.momenta) {
        for b in p.blocks() {
            b.shape().hash(&mut h);
            for x in b.as_slice() {
                x.to_bits().hash(&mut h);
            }
        }
    }
    h.finish()
}

/// I.i.d. Gaussian phase states for replicate `seed`, in particle order.
fn draw_initial(obj: &dyn Objective, cfg: &ChaosConfig, seed: usize) -> Result<Ensemble> {
    let shape = obj.shape().clone();
    let mut rng = RngStream::with_stream(cfg.seed, seed as u64 + 1);
    let mut draw = || -> Result<BlockPoint> {
        let blocks = shape
            .blocks()
            .iter()
            .map(|&(m, n)| rng.gaussian_matrix(m, n, cfg.init_scale))
            .collect::<Result<Vec<_>>>()?;
        BlockPoint::new(&shape, blocks)
    };
    let mut positions = Vec::with_capacity(cfg.n_ref);
    let mut momenta = Vec::with_capacity(cfg.n_ref);
    for _ in 0..cfg.n_ref {
        positions.push(draw()?);
        momenta.push(draw()?);
    }
    Ensemble::new(shape, positions, momenta)
}

/// Reference run of one replicate: initial states and the stage moments of
/// every RK4 step.
pub struct Reference {
    pub initial: Ensemble,
    pub path: Vec<[Vec<f64>; 4]>,
}

pub fn reference_run(obj: &dyn Objective, cfg: &ChaosConfig, seed: usize) -> Result<Reference> {
    cfg.validate()?;
    let rule = UpdateRule::regularized(cfg.eps)?;
    let initial = draw_initial(obj, cfg, seed)?;
    let steps = step_count(cfg.t_end, cfg.h_ode)?;
    let mut path = Vec::with_capacity(steps);
    let mut cur = initial.clone();
    for _ in 0..steps {
        let (next, moments) = rk4_step(obj, &cur, cfg.gamma, &rule, cfg.h_ode, StageMoments::SelfConsistent)?;
        path.push(moments);
        cur = next;
    }
    Ok(Reference { initial, path })
}

/// `sup_t (1/N) Σᵢ ‖θᵢᴺ − θ̄ᵢ‖² + ‖Pᵢᴺ − P̄ᵢ‖²` against a precomputed reference.
pub fn coupled_error_with(obj: &dyn Objective, cfg: &ChaosConfig, reference: &Reference, n: usize) -> Result<f64> {
    let rule = UpdateRule::regularized(cfg.eps)?;
    let start = reference.initial.prefix(n)?;
    let mut system = start.clone();
    let mut copies = start;
    if state_hash(&system) != state_hash(&reference.initial.prefix(n)?) {
        return Err(Error::InvalidInput("coupled systems do not share initial states".into()));
    }
    let mut sup = 0.0f64;
    for stages in &reference.path {
        system = rk4_step(obj, &system, cfg.gamma, &rule, cfg.h_ode, StageMoments::SelfConsistent)?.0;
        copies = rk4_step(obj, &copies, cfg.gamma, &rule, cfg.h_ode, StageMoments::Frozen(stages))?.0;
        sup = sup.max(system.mean_sq_distance(&copies)?);
    }
    Ok(sup)
}

/// Coupled error of an `N`-particle system for replicate `seed`.
pub fn coupled_error(obj: &dyn Objective, cfg: &ChaosConfig, n: usize, seed: usize) -> Result<f64> {
    let reference = reference_run(obj, cfg, seed)?;
    coupled_error_with(obj, cfg, &reference, n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChaosReport {
    pub slope: f64,
    pub intercept: f64,
    /// `(N, seed-averaged coupled error)` rows.
    pub errors: Vec<(usize, f64)>,
    /// Largest `N · error` over the table, an empirical `C_poc(T, ε)`.
    pub c_poc: f64,
}

/// Least-squares fit of `log(error) = intercept + slope · log(N)`.
pub fn fit_rate(errors: &[(usize, f64)]) -> Result<(f64, f64)> {
    if errors.len() < 2 {
        return Err(Error::TooFewRecords { needed: 2, got: errors.len() });
    }
    if errors.iter().any(|&(_, e)| !(e > 0.0)) {
        return Err(Error::NonPositiveField);
    }
    let pts: Vec<(f64, f64)> = errors.iter().map(|&(n, e)| ((n as f64).ln(), e.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("need at least two distinct N".into()));
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    Ok((slope, my - slope * mx))
}

/// Seed-averaged coupled errors over `n_list` and their log-log slope.
pub fn chaos_rate(obj: &dyn Objective, cfg: &ChaosConfig) -> Result<ChaosReport> {
    cfg.validate()?;
    let per_seed: Vec<Vec<f64>> = (0..cfg.n_seeds)
        .into_par_iter()
        .map(|s| {
            let reference = reference_run(obj, cfg, s)?;
            cfg.n_list.par_iter().map(|&n| coupled_error_with(obj, cfg, &reference, n)).collect()
        })
        .collect::<Result<_>>()?;
    let errors: Vec<(usize, f64)> = cfg
        .n_list
        .iter()
        .enumerate()
        .map(|(j, &n)| (n, per_seed.iter().map(|row| row[j]).sum::<f64>() / cfg.n_seeds as f64))
        .collect();
    let (slope, intercept) = fit_rate(&errors)?;
    let c_poc = errors.iter().map(|&(n, e)| n as f64 * e).fold(0.0, f64::max);
    Ok(ChaosReport { slope, intercept, errors, c_poc })
}
