//! Regularized Muon as a spectral mirror method.
//!
//! The crate is organised bottom-up:
//!
//! * [`svd`], [`spectral`]: single-matrix spectral maps (`Orth`, `Orth_ε`,
//!   the Fenchel pair `Ψ_ε`/`Φ_ε`, Newton-Schulz).
//! * [`product`]: block tuples over `Θ = Π_b ℝ^{m_b×n_b}` and particle ensembles.
//! * [`objectives`]: moment-form objectives `J(ρ) = R(∫F dρ)` with exact forces.
//! * [`dynamics`]: the discrete particle scheme, the finite-particle ODE and RK4.
//! * [`diagnostics`]: energies, dissipation residuals and rate constants.
//! * [`chaos`]: the empirical propagation-of-chaos study.
//! * [`harness`]: RNG, presets, CSV and SVG output.

pub mod chaos;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod objectives;
pub mod product;
pub mod spectral;
pub mod svd;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use product::{BlockPoint, BlockShape, Ensemble};
pub use spectral::EpsParam;
pub use svd::SvdFactors;
