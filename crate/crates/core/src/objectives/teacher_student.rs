use super::Objective;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::product::{BlockPoint, BlockShape, Ensemble};

/// Two-block teacher-student regression with particles `θ = (A, B) ∈ ℝ^{p×r} × ℝ^{r×d}`.
///
/// `F(A, B) = (A tanh(B x_s / √d))_{s=1..S}` and
/// `R(Z) = (1/(2Sp)) Σ_s ‖Z_s − y_s‖²`.
#[derive(Debug, Clone)]
pub struct TeacherStudent {
    shape: BlockShape,
    d: usize,
    r: usize,
    p: usize,
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
}

impl TeacherStudent {
    pub fn new(d: usize, r: usize, p: usize, inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        let shape = BlockShape::new(vec![(p, r), (r, d)])?;
        if inputs.is_empty() {
            return Err(Error::InvalidInput("teacher-student needs at least one sample".into()));
        }
        if inputs.len() != targets.len() {
            return Err(Error::LengthMismatch { expected: inputs.len(), got: targets.len() });
        }
        if inputs.iter().any(|x| x.len() != d) || targets.iter().any(|y| y.len() != p) {
            return Err(Error::ShapeMismatch(format!("inputs must be length {d}, targets length {p}")));
        }
        if inputs.iter().chain(&targets).flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("samples must be finite".into()));
        }
        Ok(Self { shape, d, r, p, inputs, targets })
    }

    /// Targets from the teacher `f⋆(x) = (1/M) Σ_j A_{j,⋆} tanh(B_{j,⋆} x / √d)`.
    pub fn from_teacher(d: usize, r: usize, p: usize, teacher: &[BlockPoint], inputs: Vec<Vec<f64>>) -> Result<Self> {
        if teacher.is_empty() {
            return Err(Error::InvalidInput("teacher needs at least one particle".into()));
        }
        let shape = BlockShape::new(vec![(p, r), (r, d)])?;
        if let Some(bad) = teacher.iter().find(|t| t.shape() != shape) {
            return Err(Error::ShapeMismatch(format!("teacher particle has shape {:?}", bad.shape())));
        }
        if inputs.iter().any(|x| x.len() != d) {
            return Err(Error::ShapeMismatch(format!("inputs must be length {d}")));
        }
        let inv_m = 1.0 / teacher.len() as f64;
        let targets = inputs
            .iter()
            .map(|x| {
                let mut y = vec![0.0; p];
                for t in teacher {
                    for (acc, v) in y.iter_mut().zip(predict(d, t, x)) {
                        *acc += v;
                    }
                }
                y.iter_mut().for_each(|v| *v *= inv_m);
                y
            })
            .collect();
        Self::new(d, r, p, inputs, targets)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.d, self.r, self.p)
    }

    pub fn n_samples(&self) -> usize {
        self.inputs.len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    /// Hidden activations `tanh(B x_s / √d)` for every sample.
    fn hidden(&self, b: &Matrix) -> Vec<Vec<f64>> {
        let inv = 1.0 / (self.d as f64).sqrt();
        self.inputs.iter().map(|x| b.matvec(x).into_iter().map(|z| (z * inv).tanh()).collect()).collect()
    }

    /// Single-particle network output `A tanh(B x / √d)`.
    pub fn predict(&self, theta: &BlockPoint, x: &[f64]) -> Vec<f64> {
        predict(self.d, theta, x)
    }

    pub fn teacher_student_value(&self, ens: &Ensemble) -> Result<f64> {
        self.value(ens)
    }

    pub fn teacher_student_forces(&self, ens: &Ensemble) -> Result<Vec<BlockPoint>> {
        self.forces(ens)
    }
}

impl Objective for TeacherStudent {
    fn name(&self) -> &str {
        "teacher_student"
    }

    fn shape(&self) -> &BlockShape {
        &self.shape
    }

    fn moment_dim(&self) -> usize {
        self.inputs.len() * self.p
    }

    fn add_feature(&self, theta: &BlockPoint, acc: &mut [f64]) {
        let a = theta.block(0);
        for (s, h) in self.hidden(theta.block(1)).iter().enumerate() {
            let out = a.matvec(h);
            for (o, v) in acc[s * self.p..(s + 1) * self.p].iter_mut().zip(out) {
                *o += v;
            }
        }
    }

    fn risk(&self, moment: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (s, y) in self.targets.iter().enumerate() {
            for (k, yk) in y.iter().enumerate() {
                let r = moment[s * self.p + k] - yk;
                acc += r * r;
            }
        }
        acc / (2.0 * (self.inputs.len() * self.p) as f64)
    }

    fn risk_grad(&self, moment: &[f64]) -> Vec<f64> {
        let scale = 1.0 / (self.inputs.len() * self.p) as f64;
        let mut g = vec![0.0; moment.len()];
        for (s, y) in self.targets.iter().enumerate() {
            for (k, yk) in y.iter().enumerate() {
                g[s * self.p + k] = (moment[s * self.p + k] - yk) * scale;
            }
        }
        g
    }

    fn pullback(&self, theta: &BlockPoint, u: &[f64]) -> BlockPoint {
        let a = theta.block(0);
        let inv = 1.0 / (self.d as f64).sqrt();
        let mut ga = Matrix::zeros(self.p, self.r);
        let mut gb = Matrix::zeros(self.r, self.d);
        for (s, h) in self.hidden(theta.block(1)).iter().enumerate() {
            let us = &u[s * self.p..(s + 1) * self.p];
            ga.axpy(1.0, &Matrix::outer(us, h));
            let back = a.matvec_t(us);
            let delta: Vec<f64> = back.iter().zip(h).map(|(b, hj)| b * (1.0 - hj * hj) * inv).collect();
            gb.axpy(1.0, &Matrix::outer(&delta, &self.inputs[s]));
        }
        BlockPoint::from_blocks(vec![ga, gb])
    }
}

fn predict(d: usize, theta: &BlockPoint, x: &[f64]) -> Vec<f64> {
    let inv = 1.0 / (d as f64).sqrt();
    let h: Vec<f64> = theta.block(1).matvec(x).into_iter().map(|z| (z * inv).tanh()).collect();
    theta.block(0).matvec(&h)
}
