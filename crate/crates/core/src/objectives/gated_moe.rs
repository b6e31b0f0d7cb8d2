use super::Objective;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::product::{BlockPoint, BlockShape, Ensemble};

/// Softmax-gated mixture of linear experts with cross-entropy loss.
///
/// Particle `θ = (Ω, g)` with expert logits `ψ(x) = Ωᵀx ∈ ℝ^C` and router
/// score `s(x) = gᵀx`. The augmented feature is
/// `F(θ) = ((e^{s(x_r)} ψ(x_r))_r, (e^{s(x_r)})_r)`, whose mean is the pair
/// `(N_ρ, D_ρ)`; the loss applies `Γ = N / max(D, δ)` followed by token-level
/// cross-entropy. For an empirical measure the `1/N` factors cancel in `Γ`.
#[derive(Debug, Clone)]
pub struct GatedMoE {
    shape: BlockShape,
    d: usize,
    classes: usize,
    inputs: Vec<Vec<f64>>,
    labels: Vec<usize>,
    delta: f64,
}

pub const DEFAULT_DENOM_FLOOR: f64 = 1e-6;

impl GatedMoE {
    pub fn new(d: usize, classes: usize, inputs: Vec<Vec<f64>>, labels: Vec<usize>, delta: f64) -> Result<Self> {
        let shape = BlockShape::new(vec![(d, classes), (d, 1)])?;
        if inputs.is_empty() {
            return Err(Error::InvalidInput("gated MoE needs at least one input".into()));
        }
        if inputs.len() != labels.len() {
            return Err(Error::LengthMismatch { expected: inputs.len(), got: labels.len() });
        }
        if inputs.iter().any(|x| x.len() != d || x.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidInput(format!("inputs must be finite vectors of length {d}")));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::InvalidInput(format!("label {y} outside [0, {classes})")));
        }
        if !(delta > 0.0) {
            return Err(Error::InvalidInput(format!("denominator floor must be positive, got {delta}")));
        }
        Ok(Self { shape, d, classes, inputs, labels, delta })
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    fn expert_and_weight(&self, theta: &BlockPoint, x: &[f64]) -> (Vec<f64>, f64) {
        let psi = theta.block(0).matvec_t(x);
        let score: f64 = theta.block(1).as_slice().iter().zip(x).map(|(g, v)| g * v).sum();
        (psi, score.exp())
    }

    /// True when some token's gate denominator was clamped at the floor `δ`.
    pub fn floor_hit(&self, ens: &Ensemble) -> Result<bool> {
        super::check_shape(&self.shape, ens)?;
        let m = self.moment(&ens.positions);
        let off = self.inputs.len() * self.classes;
        Ok(m[off..].iter().any(|&den| den < self.delta))
    }

    pub fn gated_moe_value(&self, ens: &Ensemble) -> Result<f64> {
        self.value(ens)
    }

    pub fn gated_moe_forces(&self, ens: &Ensemble) -> Result<Vec<BlockPoint>> {
        self.forces(ens)
    }

    /// Normalized logits `Γ_r = N_r / max(D_r, δ)` and the clamped denominators.
    fn normalize<'a>(&'a self, moment: &'a [f64]) -> impl Iterator<Item = (Vec<f64>, f64, bool)> + 'a {
        let c = self.classes;
        let off = self.inputs.len() * c;
        (0..self.inputs.len()).map(move |r| {
            let den = moment[off + r];
            let clamped = den < self.delta;
            let den = den.max(self.delta);
            (moment[r * c..(r + 1) * c].iter().map(|v| v / den).collect(), den, clamped)
        })
    }
}

/// Token cross-entropy `−z_y + log Σ_c e^{z_c}`.
pub fn ce_loss(z: &[f64], y: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    lse - z[y]
}

/// `softmax(z) − e_y`
pub fn ce_grad(z: &[f64], y: usize) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = e.iter().sum();
    let mut g: Vec<f64> = e.iter().map(|v| v / total).collect();
    g[y] -= 1.0;
    g
}

impl Objective for GatedMoE {
    fn name(&self) -> &str {
        "gated_moe"
    }

    fn shape(&self) -> &BlockShape {
        &self.shape
    }

    fn moment_dim(&self) -> usize {
        self.inputs.len() * (self.classes + 1)
    }

    fn add_feature(&self, theta: &BlockPoint, acc: &mut [f64]) {
        let c = self.classes;
        let off = self.inputs.len() * c;
        for (r, x) in self.inputs.iter().enumerate() {
            let (psi, w) = self.expert_and_weight(theta, x);
            for (a, v) in acc[r * c..(r + 1) * c].iter_mut().zip(&psi) {
                *a += w * v;
            }
            acc[off + r] += w;
        }
    }

    fn risk(&self, moment: &[f64]) -> f64 {
        let total: f64 = self.normalize(moment).zip(&self.labels).map(|((gamma, _, _), &y)| ce_loss(&gamma, y)).sum();
        total / self.inputs.len() as f64
    }

    fn risk_grad(&self, moment: &[f64]) -> Vec<f64> {
        let c = self.classes;
        let n = self.inputs.len();
        let inv_n = 1.0 / n as f64;
        let mut g = vec![0.0; moment.len()];
        for (r, ((gamma, den, clamped), &y)) in self.normalize(moment).zip(&self.labels).enumerate() {
            let ce = ce_grad(&gamma, y);
            for (k, v) in ce.iter().enumerate() {
                g[r * c + k] = v * inv_n / den;
            }
            if !clamped {
                let dot: f64 = ce.iter().zip(&gamma).map(|(a, b)| a * b).sum();
                g[n * c + r] = -dot * inv_n / den;
            }
        }
        g
    }

    fn pullback(&self, theta: &BlockPoint, u: &[f64]) -> BlockPoint {
        let c = self.classes;
        let off = self.inputs.len() * c;
        let mut g_expert = Matrix::zeros(self.d, c);
        let mut g_router = Matrix::zeros(self.d, 1);
        for (r, x) in self.inputs.iter().enumerate() {
            let (psi, w) = self.expert_and_weight(theta, x);
            let un = &u[r * c..(r + 1) * c];
            g_expert.axpy(w, &Matrix::outer(x, un));
            let coeff = w * (un.iter().zip(&psi).map(|(a, b)| a * b).sum::<f64>() + u[off + r]);
            for (gv, xv) in g_router.as_mut_slice().iter_mut().zip(x) {
                *gv += coeff * xv;
            }
        }
        BlockPoint::from_blocks(vec![g_expert, g_router])
    }
}
