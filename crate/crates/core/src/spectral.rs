//! Single-block spectral maps: hard and regularized orthogonalization, the
//! Fenchel pair `(Ψ_ε, Φ_ε)`, the inverse mirror map `∇Φ_ε`, the dissipation
//! density and the quintic Newton-Schulz comparator.
//!
//! All maps act on singular values only and keep the singular subspaces:
//!
//! | map                | `σ ↦`                         |
//! |--------------------|-------------------------------|
//! | `orth_hard`        | `1` (σ > 0), `0` otherwise    |
//! | `orth_eps`         | `σ / √(σ² + ε²)`              |
//! | `grad_phi_eps`     | `ε σ / √(1 − σ²)`             |
//!
//! and the scalar potentials are sums over the `min(m, n)` singular values.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::svd::{self, singular_values, SvdFactors, DEFAULT_RANK_TOL};

/// Operator norms above `1 + PHI_BOUNDARY_SLACK` are outside `dom Φ_ε`.
pub const PHI_BOUNDARY_SLACK: f64 = 1e-12;
/// `∇Φ_ε` rejects `σ₁(G) ≥ 1 − GRAD_PHI_MARGIN`.
pub const GRAD_PHI_MARGIN: f64 = 1e-12;
/// Quintic Newton-Schulz coefficients used by practical Muon implementations.
pub const NS_COEFFS: (f64, f64, f64) = (3.4445, -4.7750, 2.0315);
pub const NS_DEFAULT_ITERS: usize = 5;

/// Regularization scale `ε > 0`, in the units of the singular values.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EpsParam(f64);

impl EpsParam {
    pub fn new(eps: f64) -> Result<Self> {
        if eps.is_finite() && eps > 0.0 {
            Ok(Self(eps))
        } else {
            Err(Error::InvalidEps(eps))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for EpsParam {
    type Error = Error;

    fn try_from(eps: f64) -> Result<Self> {
        Self::new(eps)
    }
}

/// Frobenius, operator and nuclear norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub fro: f64,
    pub op: f64,
    pub nuc: f64,
}

fn check_finite(p: &Matrix) -> Result<()> {
    if p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidMatrix("non-finite entry".into()))
    }
}

pub fn norms(p: &Matrix) -> Result<Norms> {
    check_finite(p)?;
    let s = singular_values(p);
    Ok(Norms { fro: p.fro_norm(), op: s.first().copied().unwrap_or(0.0), nuc: s.iter().sum() })
}

/// Polar factor `UVᵀ` with the canonical `Z = 0` selection on the null space.
pub fn orth_hard(p: &Matrix, rank_tol: f64) -> Result<Matrix> {
    let f = svd::svd(p, rank_tol)?;
    Ok(f.spectral_apply(|_| 1.0))
}

/// `σ / √(σ² + ε²)`
#[inline]
pub fn orth_eps_scalar(sigma: f64, eps: f64) -> f64 {
    sigma / sigma.hypot(eps)
}

/// `√(σ² + ε²) − ε`, written to avoid cancellation for `σ ≪ ε`.
#[inline]
pub fn psi_eps_scalar(sigma: f64, eps: f64) -> f64 {
    sigma * sigma / (sigma.hypot(eps) + eps)
}

/// `σ² / √(σ² + ε²)`
#[inline]
pub fn dissipation_scalar(sigma: f64, eps: f64) -> f64 {
    sigma * sigma / sigma.hypot(eps)
}

/// `ε (1 − √(1 − σ²))` for `σ ∈ [0, 1]`.
#[inline]
pub fn phi_eps_scalar(sigma: f64, eps: f64) -> f64 {
    let s = sigma.min(1.0);
    eps * s * s / (1.0 + ((1.0 - s) * (1.0 + s)).sqrt())
}

/// Regularized orthogonalization `Orth_ε(P) = ∇Ψ_ε(P)`.
pub fn orth_eps(p: &Matrix, e: EpsParam) -> Result<Matrix> {
    let f = svd::svd(p, 0.0)?;
    Ok(orth_eps_from_factors(&f, e))
}

pub fn orth_eps_from_factors(f: &SvdFactors, e: EpsParam) -> Matrix {
    let eps = e.get();
    f.spectral_apply(|s| orth_eps_scalar(s, eps))
}

/// Kinetic potential `Ψ_ε(P) = Σ (√(σᵢ² + ε²) − ε)`.
pub fn psi_eps(p: &Matrix, e: EpsParam) -> Result<f64> {
    check_finite(p)?;
    Ok(singular_values(p).iter().map(|&s| psi_eps_scalar(s, e.get())).sum())
}

/// Conjugate potential `Φ_ε(G) = ε Σ (1 − √(1 − σᵢ(G)²))` on the closed unit
/// spectral ball; `OutsideDomain` is the `+∞` branch.
pub fn phi_eps(g: &Matrix, e: EpsParam) -> Result<f64> {
    check_finite(g)?;
    let s = singular_values(g);
    let op = s.first().copied().unwrap_or(0.0);
    if op > 1.0 + PHI_BOUNDARY_SLACK {
        return Err(Error::OutsideDomain { op_norm: op });
    }
    Ok(s.iter().map(|&x| phi_eps_scalar(x, e.get())).sum())
}

/// Inverse mirror map `∇Φ_ε(G) = Ũ diag(ε σ / √(1 − σ²)) Ṽᵀ` on the open ball.
pub fn grad_phi_eps(g: &Matrix, e: EpsParam) -> Result<Matrix> {
    let f = svd::svd(g, 0.0)?;
    let op = f.sigma.first().copied().unwrap_or(0.0);
    if op >= 1.0 - GRAD_PHI_MARGIN {
        return Err(Error::OutsideDomain { op_norm: op });
    }
    let eps = e.get();
    Ok(f.spectral_apply(|s| eps * s / ((1.0 - s) * (1.0 + s)).sqrt()))
}

/// `d_ε(P) = ⟨P, Orth_ε(P)⟩_F = Σ σᵢ² / √(σᵢ² + ε²)`.
pub fn dissipation_density(p: &Matrix, e: EpsParam) -> Result<f64> {
    check_finite(p)?;
    Ok(singular_values(p).iter().map(|&s| dissipation_scalar(s, e.get())).sum())
}

/// Quintic Newton-Schulz approximation of the polar factor, starting from
/// the Frobenius-normalized input. Zero maps to zero.
pub fn newton_schulz5(p: &Matrix, iters: usize) -> Result<Matrix> {
    check_finite(p)?;
    if iters == 0 {
        return Err(Error::InvalidInput("newton_schulz5 needs at least one iteration".into()));
    }
    let norm = p.fro_norm();
    if norm == 0.0 {
        return Ok(Matrix::zeros(p.rows(), p.cols()));
    }
    // Iterate on the wide orientation so the Gram matrix is the small one.
    let tall = p.rows() > p.cols();
    let mut x = if tall { p.transpose() } else { p.clone() }.scale(1.0 / norm);
    let (a, b, c) = NS_COEFFS;
    for _ in 0..iters {
        let gram = x.matmul(&x.transpose());
        let mut poly = gram.scale(b);
        poly.axpy(c, &gram.matmul(&gram));
        let mut next = x.scale(a);
        next.axpy(1.0, &poly.matmul(&x));
        x = next;
    }
    Ok(if tall { x.transpose() } else { x })
}

/// Convenience wrapper using the default relative rank tolerance.
pub fn orth(p: &Matrix) -> Result<Matrix> {
    orth_hard(p, DEFAULT_RANK_TOL)
}
