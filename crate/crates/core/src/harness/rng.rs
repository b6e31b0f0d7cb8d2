use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Seeded, counter-based random stream with Box-Muller Gaussians.
///
/// A `(seed, stream)` pair names an independent sequence, so each grid cell
/// or chaos replicate can own its own stream regardless of scheduling.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, rng, spare: None }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform on `(0, 1]`.
    fn open_uniform(&mut self) -> f64 {
        1.0 - self.rng.random::<f64>()
    }

    /// Standard normal draw.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let r = (-2.0 * self.open_uniform().ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * self.rng.random::<f64>()).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// Row-major matrix of i.i.d. `N(0, scale²)` entries.
    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize, scale: f64) -> Result<Matrix> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidScale(scale));
        }
        let data = (0..rows * cols).map(|_| scale * self.gaussian()).collect();
        Matrix::new(rows, cols, data)
    }
}

/// I.i.d. `N(0, scale²)` matrix drawn from `rng`.
pub fn gaussian_matrix(rng: &mut RngStream, rows: usize, cols: usize, scale: f64) -> Result<Matrix> {
    rng.gaussian_matrix(rows, cols, scale)
}
