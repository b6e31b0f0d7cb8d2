use super::{Objective, Smoothness};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::product::{BlockPoint, BlockShape, Ensemble};

/// Matrix mean matching: `F(W) = W`, `R(A) = ½‖A − W̄⋆‖_F²`.
///
/// Every particle sees the same force `(1/N) Σ W_ℓ − W̄⋆`.
#[derive(Debug, Clone)]
pub struct MeanMatch {
    shape: BlockShape,
    target: Matrix,
}

impl MeanMatch {
    pub fn new(target: Matrix) -> Result<Self> {
        let target = Matrix::new(target.rows(), target.cols(), target.into_vec())?;
        Ok(Self { shape: BlockShape::single(target.rows(), target.cols())?, target })
    }

    /// Target is the average of the given matrices (`W̄⋆ = (1/M) Σ W_{j,⋆}`).
    pub fn from_targets(targets: &[Matrix]) -> Result<Self> {
        let first = targets.first().ok_or_else(|| crate::Error::InvalidInput("need at least one target".into()))?;
        let mut acc = Matrix::zeros(first.rows(), first.cols());
        for t in targets {
            if t.shape() != first.shape() {
                return Err(crate::Error::ShapeMismatch("targets have different shapes".into()));
            }
            acc.axpy(1.0, t);
        }
        Self::new(acc.scale(1.0 / targets.len() as f64))
    }

    pub fn target(&self) -> &Matrix {
        &self.target
    }

    /// `½‖(1/N) Σ Wᵢ − W̄⋆‖_F²`
    pub fn mean_match_value(&self, ens: &Ensemble) -> Result<f64> {
        self.value(ens)
    }

    pub fn mean_match_forces(&self, ens: &Ensemble) -> Result<Vec<BlockPoint>> {
        self.forces(ens)
    }
}

impl Objective for MeanMatch {
    fn name(&self) -> &str {
        "mean_match"
    }

    fn shape(&self) -> &BlockShape {
        &self.shape
    }

    fn moment_dim(&self) -> usize {
        self.shape.dim()
    }

    fn add_feature(&self, theta: &BlockPoint, acc: &mut [f64]) {
        for (a, w) in acc.iter_mut().zip(theta.block(0).as_slice()) {
            *a += w;
        }
    }

    fn risk(&self, moment: &[f64]) -> f64 {
        0.5 * moment.iter().zip(self.target.as_slice()).map(|(m, t)| (m - t) * (m - t)).sum::<f64>()
    }

    fn risk_grad(&self, moment: &[f64]) -> Vec<f64> {
        moment.iter().zip(self.target.as_slice()).map(|(m, t)| m - t).collect()
    }

    fn pullback(&self, _theta: &BlockPoint, u: &[f64]) -> BlockPoint {
        BlockPoint::single(Matrix::from_raw(self.target.rows(), self.target.cols(), u.to_vec()))
    }

    /// `DF = I`, `D²F = 0`, `D²R = I`.
    fn smoothness(&self) -> Option<Smoothness> {
        Some(Smoothness { m_d: 1.0, m_d2: 0.0, m_r2: 1.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::fd_force_check;

    fn target() -> Matrix {
        Matrix::from_fn(4, 3, |i, j| (i as f64 - 1.5) * 0.3 + j as f64 * 0.1)
    }

    fn ens(ws: Vec<Matrix>) -> Ensemble {
        let shape = BlockShape::single(4, 3).unwrap();
        Ensemble::at_rest(shape, ws.into_iter().map(BlockPoint::single).collect()).unwrap()
    }

    fn e_with_norm_two() -> Matrix {
        Matrix::from_fn(4, 3, |i, j| if (i, j) == (0, 0) || (i, j) == (2, 1) { 2f64.sqrt() } else { 0.0 })
    }

    #[test]
    fn value_examples() {
        let obj = MeanMatch::new(target()).unwrap();
        let t = target();
        assert!(obj.mean_match_value(&ens(vec![t.clone(); 3])).unwrap() < 1e-30);
        let e = e_with_norm_two();
        let v = obj.mean_match_value(&ens(vec![t.add(&e)])).unwrap();
        assert!((v - 2.0).abs() < 1e-15);
        let v = obj.mean_match_value(&ens(vec![t.add(&e), t.sub(&e)])).unwrap();
        assert!(v < 1e-30);
    }

    #[test]
    fn forces_are_shared_and_match_differences() {
        let obj = MeanMatch::new(target()).unwrap();
        let t = target();
        let zero = obj.mean_match_forces(&ens(vec![t.clone(); 2])).unwrap();
        assert!(zero.iter().all(|f| f.block(0).is_zero()));

        let ws: Vec<Matrix> = (0..4).map(|k| Matrix::from_fn(4, 3, |i, j| ((i * 3 + j + k) % 7) as f64 * 0.2)).collect();
        let e = ens(ws);
        let f = obj.mean_match_forces(&e).unwrap();
        assert!(f.windows(2).all(|w| w[0] == w[1]));
        assert!(fd_force_check(&obj, &e, 1e-5).unwrap() <= 1e-8);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let obj = MeanMatch::new(target()).unwrap();
        let wrong = Ensemble::at_rest(BlockShape::single(2, 2).unwrap(), vec![BlockPoint::single(Matrix::zeros(2, 2))]).unwrap();
        assert!(matches!(obj.value(&wrong), Err(crate::Error::ShapeMismatch(_))));
    }
}
