//! Shared fixtures for the benchmarks in `benches/`.

use muon_flow::harness::{exp1_problem, ExperimentConfig, Preset, RngStream};
use muon_flow::objectives::MeanMatch;
use muon_flow::{Ensemble, Matrix, Result};

/// Standard Gaussian `rows × cols` matrix from a fixed seed.
pub fn gaussian(seed: u64, rows: usize, cols: usize) -> Matrix {
    RngStream::new(seed).gaussian_matrix(rows, cols, 1.0).expect("unit scale is valid")
}

/// The larger Experiment 1 setting (4 targets, 32 particles, 16 × 8 blocks).
pub fn mean_match_fixture() -> Result<(MeanMatch, Ensemble)> {
    let cfg = Preset::Exp1.default_configs().pop().expect("exp1 has two settings");
    exp1_problem(&ExperimentConfig { seed: 0, ..cfg })
}
