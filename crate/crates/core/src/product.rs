//! Finite products of matrix blocks and particle ensembles over them.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::spectral::{self, EpsParam};

/// Ordered block dimensions of `Θ = Π_b ℝ^{m_b×n_b}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BlockShape {
    blocks: Vec<(usize, usize)>,
}

impl BlockShape {
    pub fn new(blocks: Vec<(usize, usize)>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::ShapeMismatch("block shape needs at least one block".into()));
        }
        if blocks.iter().any(|&(m, n)| m == 0 || n == 0) {
            return Err(Error::ShapeMismatch(format!("block dimensions must be positive: {blocks:?}")));
        }
        Ok(Self { blocks })
    }

    pub fn single(rows: usize, cols: usize) -> Result<Self> {
        Self::new(vec![(rows, cols)])
    }

    pub fn blocks(&self) -> &[(usize, usize)] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Total block rank `q_Θ = Σ_b min(m_b, n_b)`.
    pub fn q_total(&self) -> usize {
        self.blocks.iter().map(|&(m, n)| m.min(n)).sum()
    }

    /// Total number of scalar coordinates.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|&(m, n)| m * n).sum()
    }
}

/// A point `θ = (θ⁽¹⁾, …, θ⁽ᴮ⁾)` of the product space.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPoint {
    blocks: Vec<Matrix>,
}

impl BlockPoint {
    pub fn new(shape: &BlockShape, blocks: Vec<Matrix>) -> Result<Self> {
        if blocks.len() != shape.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} blocks, got {}",
                shape.len(),
                blocks.len()
            )));
        }
        for (b, (m, &dims)) in blocks.iter().zip(shape.blocks()).enumerate() {
            if m.shape() != dims {
                return Err(Error::ShapeMismatch(format!("block {b}: expected {dims:?}, got {:?}", m.shape())));
            }
            if !m.is_finite() {
                return Err(Error::InvalidMatrix(format!("block {b} has non-finite entries")));
            }
        }
        Ok(Self { blocks })
    }

    pub fn single(m: Matrix) -> Self {
        Self { blocks: vec![m] }
    }

    /// Unchecked assembly for results of arithmetic on already-valid points.
    pub(crate) fn from_blocks(blocks: Vec<Matrix>) -> Self {
        Self { blocks }
    }

    pub fn zeros(shape: &BlockShape) -> Self {
        Self { blocks: shape.blocks().iter().map(|&(m, n)| Matrix::zeros(m, n)).collect() }
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Matrix] {
        &mut self.blocks
    }

    pub fn block(&self, b: usize) -> &Matrix {
        &self.blocks[b]
    }

    pub fn shape(&self) -> BlockShape {
        BlockShape { blocks: self.blocks.iter().map(Matrix::shape).collect() }
    }

    fn same_shape(&self, other: &BlockPoint) -> bool {
        self.blocks.len() == other.blocks.len()
            && self.blocks.iter().zip(&other.blocks).all(|(a, b)| a.shape() == b.shape())
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(Matrix::is_finite)
    }

    pub fn norm_sq(&self) -> f64 {
        self.blocks.iter().map(Matrix::fro_norm_sq).sum()
    }

    /// Product norm `‖θ‖_Θ`.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_blocks(self.blocks.iter().map(|m| m.scale(s)).collect())
    }

    pub fn add(&self, other: &BlockPoint) -> Self {
        assert!(self.same_shape(other), "block add shape mismatch");
        Self::from_blocks(self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.add(b)).collect())
    }

    pub fn sub(&self, other: &BlockPoint) -> Self {
        assert!(self.same_shape(other), "block sub shape mismatch");
        Self::from_blocks(self.blocks.iter().zip(&other.blocks).map(|(a, b)| a.sub(b)).collect())
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &BlockPoint) {
        assert!(self.same_shape(x), "block axpy shape mismatch");
        for (a, b) in self.blocks.iter_mut().zip(&x.blocks) {
            a.axpy(alpha, b);
        }
    }

    /// Blockwise map.
    pub fn map_blocks(&self, mut f: impl FnMut(&Matrix) -> Result<Matrix>) -> Result<Self> {
        Ok(Self::from_blocks(self.blocks.iter().map(&mut f).collect::<Result<_>>()?))
    }

    /// Flattened coordinates, block by block in row-major order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks.iter().flat_map(|m| m.as_slice().iter().copied()).collect()
    }

    pub fn from_flat(shape: &BlockShape, flat: &[f64]) -> Result<Self> {
        if flat.len() != shape.dim() {
            return Err(Error::LengthMismatch { expected: shape.dim(), got: flat.len() });
        }
        let mut off = 0;
        let mut blocks = Vec::with_capacity(shape.len());
        for &(m, n) in shape.blocks() {
            blocks.push(Matrix::new(m, n, flat[off..off + m * n].to_vec())?);
            off += m * n;
        }
        Ok(Self { blocks })
    }

    /// Mutable access to the `k`-th flattened coordinate.
    pub fn coord_mut(&mut self, mut k: usize) -> &mut f64 {
        for m in &mut self.blocks {
            let len = m.rows() * m.cols();
            if k < len {
                return &mut m.as_mut_slice()[k];
            }
            k -= len;
        }
        panic!("coordinate index out of range");
    }
}

/// `⟨a, b⟩_Θ = Σ_b ⟨a⁽ᵇ⁾, b⁽ᵇ⁾⟩_F`.
pub fn block_inner(a: &BlockPoint, b: &BlockPoint) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(a.blocks.iter().zip(&b.blocks).map(|(x, y)| x.dot(y)).sum())
}

/// Mean-field pairing `(1/N) Σᵢ ⟨uᵢ, vᵢ⟩_Θ`.
pub fn avg_inner(u: &[BlockPoint], v: &[BlockPoint]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { expected: u.len(), got: v.len() });
    }
    if u.is_empty() {
        return Err(Error::InvalidInput("avg_inner needs at least one particle".into()));
    }
    let mut acc = 0.0;
    for (a, b) in u.iter().zip(v) {
        acc += block_inner(a, b)?;
    }
    Ok(acc / u.len() as f64)
}

/// Product regularized map `Orth_ε^Θ`, blockwise.
pub fn block_orth_eps(p: &BlockPoint, e: EpsParam) -> Result<BlockPoint> {
    p.map_blocks(|m| spectral::orth_eps(m, e))
}

/// `Ψ_ε^Θ(P) = Σ_b Ψ_ε(P⁽ᵇ⁾)`.
pub fn block_psi_eps(p: &BlockPoint, e: EpsParam) -> Result<f64> {
    p.blocks.iter().map(|m| spectral::psi_eps(m, e)).sum()
}

/// `d_ε^Θ(P) = Σ_b d_ε(P⁽ᵇ⁾)`.
pub fn block_dissipation(p: &BlockPoint, e: EpsParam) -> Result<f64> {
    p.blocks.iter().map(|m| spectral::dissipation_density(m, e)).sum()
}

/// Particle phase states `(θᵢ, Pᵢ)` with a step counter and physical time.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    shape: BlockShape,
    pub positions: Vec<BlockPoint>,
    pub momenta: Vec<BlockPoint>,
    pub step: u64,
    pub time: f64,
}

impl Ensemble {
    /// Validates every particle against `shape` once; the dynamics assume it.
    pub fn new(shape: BlockShape, positions: Vec<BlockPoint>, momenta: Vec<BlockPoint>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidInput("ensemble needs at least one particle".into()));
        }
        if positions.len() != momenta.len() {
            return Err(Error::LengthMismatch { expected: positions.len(), got: momenta.len() });
        }
        for (i, pt) in positions.iter().chain(&momenta).enumerate() {
            if pt.shape() != shape {
                return Err(Error::ShapeMismatch(format!("particle entry {i} has shape {:?}", pt.shape())));
            }
            if !pt.is_finite() {
                return Err(Error::InvalidMatrix(format!("particle entry {i} is not finite")));
            }
        }
        Ok(Self { shape, positions, momenta, step: 0, time: 0.0 })
    }

    /// Ensemble at rest: zero momenta.
    pub fn at_rest(shape: BlockShape, positions: Vec<BlockPoint>) -> Result<Self> {
        let momenta = vec![BlockPoint::zeros(&shape); positions.len()];
        Self::new(shape, positions, momenta)
    }

    pub fn shape(&self) -> &BlockShape {
        &self.shape
    }

    pub fn n_particles(&self) -> usize {
        self.positions.len()
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().chain(&self.momenta).all(BlockPoint::is_finite)
    }

    pub fn max_momentum_norm(&self) -> f64 {
        self.momenta.iter().map(BlockPoint::norm).fold(0.0, f64::max)
    }

    /// Root-mean-square phase distance
    /// `√((1/N) Σᵢ ‖θᵢ − θ'ᵢ‖² + ‖Pᵢ − P'ᵢ‖²)`.
    pub fn avg_distance(&self, other: &Ensemble) -> Result<f64> {
        Ok(self.mean_sq_distance(other)?.sqrt())
    }

    /// `(1/N) Σᵢ ‖θᵢ − θ'ᵢ‖² + ‖Pᵢ − P'ᵢ‖²`.
    pub fn mean_sq_distance(&self, other: &Ensemble) -> Result<f64> {
        if self.n_particles() != other.n_particles() {
            return Err(Error::LengthMismatch { expected: self.n_particles(), got: other.n_particles() });
        }
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch("ensembles have different block shapes".into()));
        }
        let mut acc = 0.0;
        for i in 0..self.n_particles() {
            acc += self.positions[i].sub(&other.positions[i]).norm_sq();
            acc += self.momenta[i].sub(&other.momenta[i]).norm_sq();
        }
        Ok(acc / self.n_particles() as f64)
    }

    /// Same shape, new phase state; callers guarantee matching shapes.
    pub(crate) fn with_state(&self, positions: Vec<BlockPoint>, momenta: Vec<BlockPoint>, step: u64, time: f64) -> Self {
        Self { shape: self.shape.clone(), positions, momenta, step, time }
    }

    /// First `n` particles as a fresh ensemble at step 0.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_particles() {
            return Err(Error::InvalidInput(format!("prefix of {n} from {} particles", self.n_particles())));
        }
        Ok(Self {
            shape: self.shape.clone(),
            positions: self.positions[..n].to_vec(),
            momenta: self.momenta[..n].to_vec(),
            step: 0,
            time: 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_block() -> BlockShape {
        BlockShape::new(vec![(2, 2), (2, 3)]).unwrap()
    }

    #[test]
    fn shape_validation() {
        assert!(BlockShape::new(vec![]).is_err());
        assert!(BlockShape::new(vec![(2, 0)]).is_err());
        let s = two_block();
        assert_eq!(s.q_total(), 4);
        assert_eq!(s.dim(), 10);
        assert!(BlockPoint::new(&s, vec![Matrix::zeros(2, 2)]).is_err());
        assert!(BlockPoint::new(&s, vec![Matrix::zeros(2, 2), Matrix::zeros(3, 2)]).is_err());
    }

    #[test]
    fn block_inner_examples() {
        let s = two_block();
        let a = BlockPoint::new(&s, vec![Matrix::identity(2), Matrix::zeros(2, 3)]).unwrap();
        assert_eq!(block_inner(&a, &a).unwrap(), 2.0);
        let single = BlockPoint::single(Matrix::from_diag(2, 2, &[3.0, 4.0]));
        assert_eq!(block_inner(&single, &single).unwrap(), 25.0);
        assert!(block_inner(&a, &single).is_err());
    }

    #[test]
    fn avg_inner_examples() {
        let u = BlockPoint::single(Matrix::from_diag(2, 2, &[0.6, 0.8]));
        let us = vec![u.clone(); 5];
        assert!((avg_inner(&us, &us).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(avg_inner(&us[..1], &us[..1]).unwrap(), block_inner(&u, &u).unwrap());
        let e1 = BlockPoint::single(Matrix::from_diag(2, 2, &[1.0, 0.0]));
        let e2 = BlockPoint::single(Matrix::from_diag(2, 2, &[0.0, 1.0]));
        assert_eq!(avg_inner(&[e1.clone(), e2.clone()], &[e2, e1]).unwrap(), 0.0);
        assert!(matches!(avg_inner(&us[..2], &us[..3]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn block_orth_and_psi_examples() {
        let s = BlockShape::new(vec![(2, 2), (2, 2)]).unwrap();
        let e = EpsParam::new(4.0).unwrap();
        let z = BlockPoint::zeros(&s);
        assert_eq!(block_orth_eps(&z, e).unwrap(), z);
        assert_eq!(block_psi_eps(&z, e).unwrap(), 0.0);
        let d = Matrix::from_diag(2, 2, &[3.0, 4.0]);
        let p = BlockPoint::new(&s, vec![d.clone(), Matrix::zeros(2, 2)]).unwrap();
        let o = block_orth_eps(&p, e).unwrap();
        assert!((o.block(0)[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((o.block(0)[(1, 1)] - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(o.block(1).is_zero());
        let pp = BlockPoint::new(&s, vec![d.clone(), d.clone()]).unwrap();
        assert!((block_psi_eps(&pp, e).unwrap() - 5.3137085).abs() < 1e-7);
        let one = BlockPoint::single(d.clone());
        assert_eq!(block_psi_eps(&one, e).unwrap(), spectral::psi_eps(&d, e).unwrap());
    }

    #[test]
    fn flat_round_trip() {
        let s = two_block();
        let flat: Vec<f64> = (0..10).map(f64::from).collect();
        let p = BlockPoint::from_flat(&s, &flat).unwrap();
        assert_eq!(p.to_flat(), flat);
        let mut q = p.clone();
        *q.coord_mut(7) = -1.0;
        assert_eq!(q.block(1).as_slice()[3], -1.0);
    }

    #[test]
    fn ensemble_validation() {
        let s = BlockShape::single(2, 2).unwrap();
        let p = BlockPoint::zeros(&s);
        assert!(Ensemble::new(s.clone(), vec![p.clone()], vec![]).is_err());
        let bad = BlockPoint::single(Matrix::zeros(3, 2));
        assert!(Ensemble::new(s.clone(), vec![bad], vec![p.clone()]).is_err());
        let e = Ensemble::at_rest(s, vec![p.clone(), p]).unwrap();
        assert_eq!(e.n_particles(), 2);
        assert_eq!(e.max_momentum_norm(), 0.0);
    }
}
