//! Dense real tensors, flattenings, multilinear rank and the action of
//! products of orthogonal groups.
//!
//! Entries are stored row-major with the last index varying fastest. Modes
//! are 0-based throughout the Rust API.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{GeometryError, Result};

/// Relative factor of the default rank threshold, scaled by the larger
/// dimension of the flattening.
pub const DEFAULT_RANK_TOL_FACTOR: f64 = 1e-10;

/// Orthogonality tolerance for the factors of an [`OrthogonalTuple`].
pub const ORTHOGONALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(GeometryError::Dimension("shape must have at least one mode".into()));
        }
        if dims.contains(&0) {
            return Err(GeometryError::Dimension(format!(
                "every mode size must be positive, got {dims:?}"
            )));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Number of entries, the ambient dimension.
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        index
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn multi_index(&self, mut offset: usize) -> Vec<usize> {
        let mut index = vec![0; self.dims.len()];
        for k in (0..self.dims.len()).rev() {
            index[k] = offset % self.dims[k];
            offset /= self.dims[k];
        }
        index
    }

    /// All multi-indices in storage order.
    pub fn indices(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.len()).map(move |o| self.multi_index(o))
    }

    /// Copy of this shape with mode `mode` resized to `size`.
    pub fn with_mode(&self, mode: usize, size: usize) -> Result<Self> {
        let mut dims = self.dims.clone();
        *dims.get_mut(mode).ok_or(GeometryError::ModeOutOfRange {
            mode,
            order: self.order(),
        })? = size;
        Shape::new(dims)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            Err(GeometryError::ModeOutOfRange {
                mode,
                order: self.order(),
            })
        } else {
            Ok(())
        }
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = GeometryError;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Shape::new(dims)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(s: Shape) -> Self {
        s.dims
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorFile {
    shape: Vec<usize>,
    data: Vec<f64>,
}

/// Order-d real array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TensorFile", into = "TensorFile")]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl TryFrom<TensorFile> for DenseTensor {
    type Error = GeometryError;
    fn try_from(f: TensorFile) -> Result<Self> {
        DenseTensor::new(Shape::new(f.shape)?, f.data)
    }
}

impl From<DenseTensor> for TensorFile {
    fn from(t: DenseTensor) -> Self {
        TensorFile {
            shape: t.shape.dims,
            data: t.data,
        }
    }
}

impl DenseTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(GeometryError::Dimension(format!(
                "shape {:?} needs {} entries, got {}",
                shape.dims(),
                shape.len(),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(GeometryError::InvalidArgument(format!(
                "non-finite entry at offset {pos}"
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        let data = vec![0.0; shape.len()];
        Self { shape, data }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let data = shape.indices().map(|idx| f(&idx)).collect();
        Self { shape, data }
    }

    /// The basic tensor e_{i_1} ⊗ … ⊗ e_{i_d}.
    pub fn basis(shape: Shape, index: &[usize]) -> Result<Self> {
        if index.len() != shape.order() || index.iter().zip(shape.dims()).any(|(&i, &n)| i >= n) {
            return Err(GeometryError::Dimension(format!(
                "index {index:?} out of range for shape {:?}",
                shape.dims()
            )));
        }
        let mut t = Self::zeros(shape);
        let o = t.shape.offset(index);
        t.data[o] = 1.0;
        Ok(t)
    }

    /// Outer product v_1 ⊗ … ⊗ v_d.
    pub fn outer(factors: &[&[f64]]) -> Result<Self> {
        let shape = Shape::new(factors.iter().map(|v| v.len()).collect())?;
        Ok(Self::from_fn(shape, |idx| {
            idx.iter().zip(factors).map(|(&i, v)| v[i]).product()
        }))
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.shape.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let o = self.shape.offset(index);
        self.data[o] = value;
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(GeometryError::Dimension(format!(
                "shape {:?} vs {:?}",
                self.shape.dims(),
                other.shape.dims()
            )));
        }
        Ok(())
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|x| x * factor).collect(),
        }
    }

    /// self + factor * other
    pub fn axpy(&self, factor: f64, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + factor * b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// Column index of `index` in the flattening along `mode`: remaining
    /// modes in increasing order, last fastest.
    fn flat_column(&self, mode: usize, index: &[usize]) -> usize {
        let dims = self.shape.dims();
        (0..dims.len())
            .filter(|&k| k != mode)
            .fold(0, |acc, k| acc * dims[k] + index[k])
    }

    /// The `mode`-th flattening, an n_mode × Π_{k≠mode} n_k matrix.
    pub fn flatten(&self, mode: usize) -> Result<DMatrix<f64>> {
        self.shape.check_mode(mode)?;
        let rows = self.shape.dims()[mode];
        let cols = self.shape.len() / rows;
        let mut m = DMatrix::zeros(rows, cols);
        for (o, idx) in self.shape.indices().enumerate() {
            m[(idx[mode], self.flat_column(mode, &idx))] = self.data[o];
        }
        Ok(m)
    }

    /// Inverse of [`flatten`](Self::flatten) into `shape`.
    pub fn fold(shape: Shape, mode: usize, matrix: &DMatrix<f64>) -> Result<Self> {
        shape.check_mode(mode)?;
        let rows = shape.dims()[mode];
        if matrix.nrows() != rows || matrix.ncols() * rows != shape.len() {
            return Err(GeometryError::Dimension(format!(
                "cannot fold {}x{} matrix into {:?} along mode {mode}",
                matrix.nrows(),
                matrix.ncols(),
                shape.dims()
            )));
        }
        let mut t = Self::zeros(shape);
        for o in 0..t.data.len() {
            let idx = t.shape.multi_index(o);
            t.data[o] = matrix[(idx[mode], t.flat_column(mode, &idx))];
        }
        Ok(t)
    }

    /// Mode-`mode` product with an m × n_mode matrix.
    pub fn mode_product(&self, mode: usize, matrix: &DMatrix<f64>) -> Result<Self> {
        self.shape.check_mode(mode)?;
        if matrix.ncols() != self.shape.dims()[mode] {
            return Err(GeometryError::Dimension(format!(
                "mode {mode} has size {}, matrix has {} columns",
                self.shape.dims()[mode],
                matrix.ncols()
            )));
        }
        let product = matrix * self.flatten(mode)?;
        Self::fold(self.shape.with_mode(mode, matrix.nrows())?, mode, &product)
    }

    /// Zero-pad into a larger shape, keeping entries at the leading block.
    pub fn embed(&self, shape: &Shape) -> Result<Self> {
        if shape.order() != self.shape.order()
            || shape.dims().iter().zip(self.shape.dims()).any(|(n, r)| n < r)
        {
            return Err(GeometryError::Dimension(format!(
                "cannot embed {:?} into {:?}",
                self.shape.dims(),
                shape.dims()
            )));
        }
        let mut t = Self::zeros(shape.clone());
        for (o, idx) in self.shape.indices().enumerate() {
            t.set(&idx, self.data[o]);
        }
        Ok(t)
    }

    /// The leading block of size `dims`.
    pub fn leading_block(&self, dims: &[usize]) -> Result<Self> {
        let shape = Shape::new(dims.to_vec())?;
        if shape.order() != self.shape.order()
            || dims.iter().zip(self.shape.dims()).any(|(r, n)| r > n)
        {
            return Err(GeometryError::Dimension(format!(
                "block {dims:?} exceeds {:?}",
                self.shape.dims()
            )));
        }
        Ok(Self::from_fn(shape, |idx| self.get(idx)))
    }
}

/// Frobenius inner product ⟨T, S⟩.
pub fn frobenius_inner(t: &DenseTensor, s: &DenseTensor) -> Result<f64> {
    t.inner(s)
}

pub fn flatten(t: &DenseTensor, mode: usize) -> Result<DMatrix<f64>> {
    t.flatten(mode)
}

/// Descending singular values of each flattening.
pub fn mode_singular_values(t: &DenseTensor) -> Vec<Vec<f64>> {
    (0..t.shape().order())
        .map(|j| {
            let f = t.flatten(j).expect("mode in range");
            let mut sv: Vec<f64> = f.singular_values().iter().copied().collect();
            sv.sort_by(|a, b| b.total_cmp(a));
            sv
        })
        .collect()
}

/// Default relative rank threshold for the `mode`-th flattening.
pub fn default_rank_tol(shape: &Shape, mode: usize) -> f64 {
    let rows = shape.dims()[mode];
    let cols = shape.len() / rows;
    DEFAULT_RANK_TOL_FACTOR * rows.max(cols) as f64
}

fn count_above(sv: &[f64], rel_tol: f64) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Multilinear rank: number of singular values of each flattening above
/// `tol·σ_max`. `None` uses [`default_rank_tol`] per mode.
pub fn multilinear_rank(t: &DenseTensor, tol: Option<f64>) -> MultilinearRank {
    let ranks = mode_singular_values(t)
        .iter()
        .enumerate()
        .map(|(j, sv)| count_above(sv, tol.unwrap_or_else(|| default_rank_tol(t.shape(), j))))
        .collect();
    MultilinearRank { ranks }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultilinearRank {
    pub ranks: Vec<usize>,
}

impl MultilinearRank {
    pub fn new(ranks: Vec<usize>) -> Self {
        Self { ranks }
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn is_zero(&self) -> bool {
        self.ranks.iter().all(|&r| r == 0)
    }

    /// Checks that some tensor of `shape` has exactly this multilinear rank.
    pub fn check_admissible(&self, shape: &Shape) -> Result<()> {
        let err = |reason: String| GeometryError::InadmissibleRank {
            shape: shape.dims().to_vec(),
            rank: self.ranks.clone(),
            reason,
        };
        if self.ranks.len() != shape.order() {
            return Err(err("rank length differs from tensor order".into()));
        }
        if let Some(j) = (0..self.ranks.len()).find(|&j| self.ranks[j] > shape.dims()[j]) {
            return Err(err(format!("r_{} exceeds n_{}", j + 1, j + 1)));
        }
        if self.is_zero() {
            return Ok(());
        }
        if self.ranks.contains(&0) {
            return Err(err("a zero entry forces all entries to be zero".into()));
        }
        for j in 0..self.ranks.len() {
            let others: usize = (0..self.ranks.len())
                .filter(|&k| k != j)
                .map(|k| self.ranks[k])
                .product();
            if self.ranks[j] > others {
                return Err(err(format!(
                    "r_{} = {} exceeds the product of the other ranks ({others})",
                    j + 1,
                    self.ranks[j]
                )));
            }
        }
        Ok(())
    }

    /// Σ r_j(n_j − r_j) + Π r_j.
    pub fn manifold_dim(&self, shape: &Shape) -> usize {
        let grassmann: usize = self
            .ranks
            .iter()
            .zip(shape.dims())
            .map(|(&r, &n)| r * (n - r))
            .sum();
        grassmann + self.ranks.iter().product::<usize>()
    }
}

/// A tuple of orthogonal matrices (g¹, …, g^d), one per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalTuple {
    factors: Vec<DMatrix<f64>>,
}

impl OrthogonalTuple {
    pub fn new(factors: Vec<DMatrix<f64>>) -> Result<Self> {
        for (j, g) in factors.iter().enumerate() {
            if !g.is_square() {
                return Err(GeometryError::Dimension(format!("factor {j} is not square")));
            }
            let n = g.nrows();
            let dev = (g * g.transpose() - DMatrix::<f64>::identity(n, n)).amax();
            if dev > ORTHOGONALITY_TOL {
                return Err(GeometryError::InvalidArgument(format!(
                    "factor {j} deviates from orthogonality by {dev:e}"
                )));
            }
        }
        Ok(Self { factors })
    }

    pub fn identity(shape: &Shape) -> Self {
        Self {
            factors: shape
                .dims()
                .iter()
                .map(|&n| DMatrix::identity(n, n))
                .collect(),
        }
    }

    /// Haar-distributed factors from the QR decomposition of Gaussian
    /// matrices with the sign of diag(R) absorbed.
    pub fn random<R: Rng + ?Sized>(shape: &Shape, rng: &mut R) -> Self {
        let factors = shape
            .dims()
            .iter()
            .map(|&n| random_orthogonal(n, rng))
            .collect();
        Self { factors }
    }

    pub fn factors(&self) -> &[DMatrix<f64>] {
        &self.factors
    }

    pub fn transpose(&self) -> Self {
        Self {
            factors: self.factors.iter().map(|g| g.transpose()).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }
}

pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..n {
        if r[(k, k)] < 0.0 {
            q.column_mut(k).neg_mut();
        }
    }
    q
}

/// (g¹, …, g^d) * T, applied as d successive mode products.
pub fn group_action(g: &OrthogonalTuple, t: &DenseTensor) -> Result<DenseTensor> {
    if g.order() != t.shape().order() {
        return Err(GeometryError::Dimension(format!(
            "{} factors for an order-{} tensor",
            g.order(),
            t.shape().order()
        )));
    }
    let mut out = t.clone();
    for (j, f) in g.factors.iter().enumerate() {
        if f.nrows() != t.shape().dims()[j] {
            return Err(GeometryError::Dimension(format!(
                "factor {j} has size {}, mode has size {}",
                f.nrows(),
                t.shape().dims()[j]
            )));
        }
        out = out.mode_product(j, f)?;
    }
    Ok(out)
}

pub fn random_gaussian_tensor<R: Rng + ?Sized>(shape: Shape, rng: &mut R) -> DenseTensor {
    DenseTensor::from_fn(shape, |_| rng.sample(StandardNormal))
}

const MAX_RANK_ATTEMPTS: usize = 64;

/// A random tensor of exact multilinear rank `rank`: a Gaussian core of
/// full multilinear rank, embedded and rotated by a Haar-random tuple.
pub fn random_rank_r_tensor<R: Rng + ?Sized>(
    shape: &Shape,
    rank: &MultilinearRank,
    rng: &mut R,
) -> Result<DenseTensor> {
    rank.check_admissible(shape)?;
    if rank.is_zero() {
        return Ok(DenseTensor::zeros(shape.clone()));
    }
    let core_shape = Shape::new(rank.ranks.clone())?;
    for _ in 0..MAX_RANK_ATTEMPTS {
        let core = random_gaussian_tensor(core_shape.clone(), rng);
        if multilinear_rank(&core, None) != *rank {
            continue;
        }
        let g = OrthogonalTuple::random(shape, rng);
        let t = group_action(&g, &core.embed(shape)?)?;
        if multilinear_rank(&t, None) == *rank {
            return Ok(t);
        }
    }
    Err(GeometryError::InvalidArgument(format!(
        "no tensor of rank {:?} drawn in {MAX_RANK_ATTEMPTS} attempts",
        rank.ranks
    )))
}
