//! Probability objectives in moment form `J(ρ) = R(∫F dρ)` and their particle
//! lifts `J_N = R((1/N) Σᵢ F(θᵢ))`.
//!
//! Forces follow the mean-field convention `aᵢ = DF(θᵢ)* ∇R(m_N)`: there is no
//! `1/N` on `aᵢ`, so `aᵢ = N · ∂J_N/∂θᵢ`. The discrete scheme and the ODE
//! consume these forces unmodified.

mod gated_moe;
mod mean_match;
mod teacher_student;

pub use gated_moe::{ce_grad, ce_loss, GatedMoE, DEFAULT_DENOM_FLOOR};
pub use mean_match::MeanMatch;
pub use teacher_student::TeacherStudent;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::product::{BlockPoint, BlockShape, Ensemble};

/// Bounds used by the curvature remainder `σ = L_G (M_D² M_{R,2} + M_R M_{D,2}) / κ_D`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothness {
    /// `‖DF‖`
    pub m_d: f64,
    /// `‖D²F‖`
    pub m_d2: f64,
    /// `‖D²R‖`
    pub m_r2: f64,
}

impl Smoothness {
    /// `B_curv = M_R M_{D,2} + M_D² M_{R,2}`; `m_r` only matters when `M_{D,2} > 0`.
    pub fn b_curv(&self, m_r: f64) -> f64 {
        let first = if self.m_d2 == 0.0 { 0.0 } else { m_r * self.m_d2 };
        first + self.m_d * self.m_d * self.m_r2
    }
}

pub trait Objective: Send + Sync {
    fn name(&self) -> &str;

    fn shape(&self) -> &BlockShape;

    /// Dimension of the flattened feature codomain `ℋ`.
    fn moment_dim(&self) -> usize;

    /// `acc += F(θ)`.
    fn add_feature(&self, theta: &BlockPoint, acc: &mut [f64]);

    /// Outer loss `R(m)`.
    fn risk(&self, moment: &[f64]) -> f64;

    /// `∇R(m)` in the Euclidean geometry of the flattened moment.
    fn risk_grad(&self, moment: &[f64]) -> Vec<f64>;

    /// `DF(θ)* u`.
    fn pullback(&self, theta: &BlockPoint, u: &[f64]) -> BlockPoint;

    /// Known infimum `J⋆`.
    fn infimum(&self) -> f64 {
        0.0
    }

    fn smoothness(&self) -> Option<Smoothness> {
        None
    }

    /// Empirical moment `(1/N) Σᵢ F(θᵢ)`. Features may be computed in
    /// parallel; the sum runs sequentially in particle order.
    fn moment(&self, positions: &[BlockPoint]) -> Vec<f64> {
        let dim = self.moment_dim();
        let feats: Vec<Vec<f64>> = positions
            .par_iter()
            .map(|theta| {
                let mut f = vec![0.0; dim];
                self.add_feature(theta, &mut f);
                f
            })
            .collect();
        let mut m = vec![0.0; dim];
        for f in &feats {
            for (a, b) in m.iter_mut().zip(f) {
                *a += b;
            }
        }
        let inv = 1.0 / positions.len() as f64;
        m.iter_mut().for_each(|x| *x *= inv);
        m
    }

    fn value_at(&self, positions: &[BlockPoint]) -> f64 {
        self.risk(&self.moment(positions))
    }

    /// Forces `DF(θᵢ)* u` for a fixed dual vector `u = ∇R(m)`.
    fn forces_for_dual(&self, positions: &[BlockPoint], u: &[f64]) -> Vec<BlockPoint> {
        positions.par_iter().map(|theta| self.pullback(theta, u)).collect()
    }

    fn forces_at(&self, positions: &[BlockPoint]) -> Vec<BlockPoint> {
        let u = self.risk_grad(&self.moment(positions));
        self.forces_for_dual(positions, &u)
    }

    fn value(&self, ens: &Ensemble) -> Result<f64> {
        check_shape(self.shape(), ens)?;
        Ok(self.value_at(&ens.positions))
    }

    fn forces(&self, ens: &Ensemble) -> Result<Vec<BlockPoint>> {
        check_shape(self.shape(), ens)?;
        Ok(self.forces_at(&ens.positions))
    }
}

pub(crate) fn check_shape(expected: &BlockShape, ens: &Ensemble) -> Result<()> {
    if ens.shape() != expected {
        return Err(Error::ShapeMismatch(format!(
            "objective expects {:?}, ensemble has {:?}",
            expected.blocks(),
            ens.shape().blocks()
        )));
    }
    Ok(())
}

/// Central-difference check of the forces: compares `N · ∂J_N/∂θᵢ` against
/// `aᵢ` over every particle coordinate and returns
/// `max |fd − a| / max(‖a‖_∞, 1e-300)`.
pub fn fd_force_check(obj: &dyn Objective, ens: &Ensemble, step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {step}")));
    }
    let forces = obj.forces(ens)?;
    let n = ens.n_particles() as f64;
    let dim = obj.shape().dim();
    let mut positions = ens.positions.clone();
    let mut max_diff = 0.0f64;
    let mut max_force = 0.0f64;
    for i in 0..positions.len() {
        let flat_force = forces[i].to_flat();
        for k in 0..dim {
            let orig = *positions[i].coord_mut(k);
            *positions[i].coord_mut(k) = orig + step;
            let plus = obj.value_at(&positions);
            *positions[i].coord_mut(k) = orig - step;
            let minus = obj.value_at(&positions);
            *positions[i].coord_mut(k) = orig;
            let fd = n * (plus - minus) / (2.0 * step);
            max_diff = max_diff.max((fd - flat_force[k]).abs());
            max_force = max_force.max(flat_force[k].abs());
        }
    }
    Ok(max_diff / max_force.max(1e-300))
}
