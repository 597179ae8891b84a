//! The manifold of tensors with fixed multilinear rank r.
//!
//! A point is first rotated into canonical position, where its support lies
//! in the leading r_1 × … × r_d block. Around such a point the chart
//!
//! ```text
//! T(u¹, …, u^d, S) = (g(u¹), …, g(u^d)) * (T + S)
//! g(u^j) = Π_{(λ,μ)} exp(u^j_{λμ} L^j_{λμ}),   L_{λμ} = E_{μλ} − E_{λμ}
//! ```
//!
//! parametrizes a neighbourhood, with the rotation pairs (λ, μ) ∈ [r_j] × {r_j+1, …, n_j}
//! ordered μ-major (λ fastest). Parameters are laid out as the d rotation
//! blocks followed by the core perturbation S (last index fastest).
//!
//! At the origin, first and second derivatives of the chart are available in
//! closed form; [`TuckerChart`] exposes them as its analytic backend.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::curvature::{Chart, LocalGeometry, SecondDerivatives, Backend};
use crate::error::{GeometryError, Result};
use crate::tensor::{
    default_rank_tol, group_action, random_rank_r_tensor, DenseTensor, MultilinearRank,
    OrthogonalTuple, Shape,
};

/// Default bound on ‖H‖ / max‖∂²r‖ for a minimality verdict.
pub const DEFAULT_MINIMALITY_TOL: f64 = 1e-8;

/// Retained singular values must exceed this multiple of the rank threshold.
const RANK_GAP_FACTOR: f64 = 1e3;

/// Plane generator L_{αβ} = E_{βα} − E_{αβ} of so(n), α < β, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkewGenerator {
    pub mode: usize,
    pub alpha: usize,
    pub beta: usize,
    pub size: usize,
}

impl SkewGenerator {
    pub fn new(mode: usize, alpha: usize, beta: usize, size: usize) -> Result<Self> {
        if alpha >= beta || beta >= size {
            return Err(GeometryError::InvalidArgument(format!(
                "generator needs alpha < beta < size, got ({alpha}, {beta}) in {size}"
            )));
        }
        Ok(Self {
            mode,
            alpha,
            beta,
            size,
        })
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.size, self.size);
        l[(self.beta, self.alpha)] = 1.0;
        l[(self.alpha, self.beta)] = -1.0;
        l
    }
}

/// exp(u L) in closed form: a rotation by angle u in the (α, β) plane
/// taking e_α towards e_β.
pub fn rotation_exp(l: &SkewGenerator, u: f64) -> DMatrix<f64> {
    let (s, c) = u.sin_cos();
    let mut g = DMatrix::identity(l.size, l.size);
    g[(l.alpha, l.alpha)] = c;
    g[(l.beta, l.beta)] = c;
    g[(l.beta, l.alpha)] = s;
    g[(l.alpha, l.beta)] = -s;
    g
}

/// Rotation pairs (λ, μ) for a mode with size `n` and rank `r`, μ-major.
pub fn rotation_pairs(n: usize, r: usize) -> Vec<(usize, usize)> {
    (r..n).flat_map(|mu| (0..r).map(move |lambda| (lambda, mu))).collect()
}

/// g(u^j): ordered product of plane rotations over [`rotation_pairs`].
pub fn grassmann_factor(n: usize, r: usize, u_block: &[f64]) -> Result<DMatrix<f64>> {
    let pairs = rotation_pairs(n, r);
    if u_block.len() != pairs.len() {
        return Err(GeometryError::Dimension(format!(
            "mode block needs {} parameters, got {}",
            pairs.len(),
            u_block.len()
        )));
    }
    let mut g = DMatrix::identity(n, n);
    for (&(lambda, mu), &angle) in pairs.iter().zip(u_block) {
        if angle != 0.0 {
            let l = SkewGenerator::new(0, lambda, mu, n)?;
            g *= rotation_exp(&l, angle);
        }
    }
    Ok(g)
}

/// ∂²g/∂u_{λμ}∂u_{λ'μ'} at the origin: −δ_{μμ'}E_{λλ'} − δ_{λλ'}E_{μμ'}
/// with (λ, μ) the earlier pair in the product order. Arguments may come in
/// either order.
pub fn grassmann_second_at_zero(n: usize, a: (usize, usize), b: (usize, usize)) -> DMatrix<f64> {
    let (a, b) = if (a.1, a.0) <= (b.1, b.0) { (a, b) } else { (b, a) };
    let mut m = DMatrix::zeros(n, n);
    if a.1 == b.1 {
        m[(a.0, b.0)] -= 1.0;
    }
    if a.0 == b.0 {
        m[(a.1, b.1)] -= 1.0;
    }
    m
}

/// A rank-r tensor in canonical position together with the rotation that
/// brought it there.
#[derive(Debug, Clone)]
pub struct CanonicalPoint {
    pub shape: Shape,
    pub rank: MultilinearRank,
    /// The leading r_1 × … × r_d block.
    pub core: DenseTensor,
    /// Maps the original tensor to canonical position.
    pub aligning: OrthogonalTuple,
}

impl CanonicalPoint {
    /// A point whose core is given directly, with identity alignment.
    pub fn from_core(shape: Shape, core: DenseTensor) -> Result<Self> {
        let rank = MultilinearRank::new(core.shape().dims().to_vec());
        rank.check_admissible(&shape)?;
        core.embed(&shape)?;
        Ok(Self {
            aligning: OrthogonalTuple::identity(&shape),
            shape,
            rank,
            core,
        })
    }

    /// The core zero-padded to the full shape.
    pub fn embedded(&self) -> DenseTensor {
        self.core.embed(&self.shape).expect("core fits in shape")
    }

    pub fn param_dim(&self) -> usize {
        self.rank.manifold_dim(&self.shape)
    }
}

fn sort_desc_columns(sv: &DVector<f64>, u: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let values = order.iter().map(|&k| sv[k]).collect();
    let cols: Vec<_> = order.iter().map(|&k| u.column(k).into_owned()).collect();
    (values, DMatrix::from_columns(&cols))
}

/// Rotates `t` into canonical position via mode-wise SVD (HOSVD).
///
/// Each left singular vector is signed so that its first entry of largest
/// magnitude is positive. `tol` is the relative rank threshold; `None`
/// selects the default per mode.
pub fn canonicalize(t: &DenseTensor, tol: Option<f64>) -> Result<CanonicalPoint> {
    let norm = t.norm();
    if norm == 0.0 {
        return Err(GeometryError::ZeroTensor);
    }
    let shape = t.shape().clone();
    let mut factors = Vec::with_capacity(shape.order());
    let mut ranks = Vec::with_capacity(shape.order());
    let mut worst_tol: f64 = 0.0;
    for j in 0..shape.order() {
        let n = shape.dims()[j];
        let flat = t.flatten(j)?;
        // zero columns keep the left factor square without changing it
        let mut padded = DMatrix::zeros(n, flat.ncols().max(n));
        padded.columns_mut(0, flat.ncols()).copy_from(&flat);
        let svd = padded.svd(true, false);
        let (sv, mut u) = sort_desc_columns(&svd.singular_values, &svd.u.expect("requested"));
        let rel = tol.unwrap_or_else(|| default_rank_tol(&shape, j));
        worst_tol = worst_tol.max(rel);
        let r = sv.iter().filter(|&&s| s > rel * sv[0]).count();
        let gap = sv[r - 1] / sv[0];
        if r < n && gap <= RANK_GAP_FACTOR * rel {
            return Err(GeometryError::AmbiguousRank { mode: j, gap });
        }
        for mut col in u.column_iter_mut() {
            let lead = col.iter().copied().fold(0.0_f64, |best, x| if x.abs() > best.abs() { x } else { best });
            if lead < 0.0 {
                col.neg_mut();
            }
        }
        factors.push(u.transpose());
        ranks.push(r);
    }
    let rank = MultilinearRank::new(ranks);
    rank.check_admissible(&shape)?;
    let aligning = OrthogonalTuple::new(factors)?;
    let rotated = group_action(&aligning, t)?;
    let core = rotated.leading_block(rank.ranks())?;
    let residual = rotated.sub(&core.embed(&shape)?)?.max_abs();
    if residual > worst_tol * norm {
        return Err(GeometryError::AmbiguousRank {
            mode: shape.order(),
            gap: residual / norm,
        });
    }
    Ok(CanonicalPoint {
        shape,
        rank,
        core,
        aligning,
    })
}

/// A chart parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Param {
    /// u^mode_{λμ}
    Rotation { mode: usize, lambda: usize, mu: usize },
    /// s_{i_1…i_d}
    Core(Vec<usize>),
}

/// Index bookkeeping for the chart parameters.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    dims: Vec<usize>,
    ranks: Vec<usize>,
    block_start: Vec<usize>,
    core_start: usize,
    core_shape: Shape,
}

impl ParamLayout {
    pub fn new(shape: &Shape, rank: &MultilinearRank) -> Result<Self> {
        rank.check_admissible(shape)?;
        if rank.is_zero() {
            return Err(GeometryError::ZeroTensor);
        }
        let mut block_start = Vec::with_capacity(shape.order());
        let mut acc = 0;
        for (&n, &r) in shape.dims().iter().zip(rank.ranks()) {
            block_start.push(acc);
            acc += r * (n - r);
        }
        Ok(Self {
            dims: shape.dims().to_vec(),
            ranks: rank.ranks().to_vec(),
            block_start,
            core_start: acc,
            core_shape: Shape::new(rank.ranks().to_vec())?,
        })
    }

    pub fn dim(&self) -> usize {
        self.core_start + self.core_shape.len()
    }

    pub fn block_len(&self, mode: usize) -> usize {
        self.ranks[mode] * (self.dims[mode] - self.ranks[mode])
    }

    pub fn block_range(&self, mode: usize) -> std::ops::Range<usize> {
        self.block_start[mode]..self.block_start[mode] + self.block_len(mode)
    }

    pub fn core_range(&self) -> std::ops::Range<usize> {
        self.core_start..self.dim()
    }

    pub fn rotation_index(&self, mode: usize, lambda: usize, mu: usize) -> usize {
        let r = self.ranks[mode];
        debug_assert!(lambda < r && mu >= r && mu < self.dims[mode]);
        self.block_start[mode] + (mu - r) * r + lambda
    }

    pub fn param(&self, index: usize) -> Param {
        if index >= self.core_start {
            return Param::Core(self.core_shape.multi_index(index - self.core_start));
        }
        let mode = (0..self.dims.len())
            .rev()
            .find(|&j| self.block_start[j] <= index && self.block_len(j) > 0)
            .expect("index inside a rotation block");
        let r = self.ranks[mode];
        let local = index - self.block_start[mode];
        Param::Rotation {
            mode,
            lambda: local % r,
            mu: r + local / r,
        }
    }
}

/// The chart around a canonical point.
#[derive(Debug, Clone)]
pub struct TuckerChart {
    point: CanonicalPoint,
    layout: ParamLayout,
    base: DenseTensor,
}

impl TuckerChart {
    pub fn new(point: CanonicalPoint) -> Result<Self> {
        let layout = ParamLayout::new(&point.shape, &point.rank)?;
        let base = point.embedded();
        Ok(Self {
            point,
            layout,
            base,
        })
    }

    pub fn point(&self) -> &CanonicalPoint {
        &self.point
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    /// The canonical tensor T = chart(0).
    pub fn base(&self) -> &DenseTensor {
        &self.base
    }

    pub fn tensor_at(&self, params: &[f64]) -> Result<DenseTensor> {
        if params.len() != self.layout.dim() {
            return Err(GeometryError::Dimension(format!(
                "chart has {} parameters, got {}",
                self.layout.dim(),
                params.len()
            )));
        }
        let s = &params[self.layout.core_range()];
        let mut core = self.point.core.clone();
        core.data_mut().iter_mut().zip(s).for_each(|(c, d)| *c += d);
        let mut out = core.embed(&self.point.shape)?;
        for j in 0..self.point.shape.order() {
            let block = &params[self.layout.block_range(j)];
            if block.iter().any(|&x| x != 0.0) {
                let g = grassmann_factor(self.point.shape.dims()[j], self.point.rank.ranks()[j], block)?;
                out = out.mode_product(j, &g)?;
            }
        }
        Ok(out)
    }

    /// ∂T/∂s_I at 0: the basic tensor e_I.
    pub fn d_core(&self, index: &[usize]) -> DenseTensor {
        DenseTensor::basis(self.point.shape.clone(), index).expect("core index in range")
    }

    /// ∂T/∂u^j_{λμ} at 0: entries t_{…λ…} moved to slice μ of mode j.
    pub fn d_rotation(&self, mode: usize, lambda: usize, mu: usize) -> DenseTensor {
        let mut out = DenseTensor::zeros(self.point.shape.clone());
        for (o, idx) in self.point.core.shape().indices().enumerate() {
            if idx[mode] == lambda {
                let mut target = idx.clone();
                target[mode] = mu;
                out.set(&target, self.point.core.data()[o]);
            }
        }
        out
    }

    /// ∂²T/∂u^j_{λμ}∂u^j_{λ'μ} at 0 for λ ≤ λ': −t_{…λ'…} placed at slice λ
    /// of mode j (independent of μ). These all lie in the span of the core
    /// directions.
    pub fn d2_same_slice(&self, mode: usize, lambda: usize, lambda_p: usize) -> DenseTensor {
        let (lambda, lambda_p) = (lambda.min(lambda_p), lambda.max(lambda_p));
        let mut out = DenseTensor::zeros(self.point.shape.clone());
        for (o, idx) in self.point.core.shape().indices().enumerate() {
            if idx[mode] == lambda_p {
                let mut target = idx.clone();
                target[mode] = lambda;
                out.set(&target, -self.point.core.data()[o]);
            }
        }
        out
    }

    fn generator(&self, mode: usize, lambda: usize, mu: usize) -> DMatrix<f64> {
        SkewGenerator::new(mode, lambda, mu, self.point.shape.dims()[mode])
            .expect("lambda < mu")
            .matrix()
    }

    /// Second derivative at 0 for an arbitrary pair of parameters, via
    /// generator products applied to T.
    pub fn second_at_zero(&self, a: usize, b: usize) -> DenseTensor {
        let shape = self.point.shape.clone();
        match (self.layout.param(a), self.layout.param(b)) {
            (Param::Core(_), Param::Core(_)) => DenseTensor::zeros(shape),
            (Param::Core(idx), Param::Rotation { mode, lambda, mu })
            | (Param::Rotation { mode, lambda, mu }, Param::Core(idx)) => self
                .d_core(&idx)
                .mode_product(mode, &self.generator(mode, lambda, mu))
                .expect("square generator"),
            (
                Param::Rotation { mode: j, lambda: l1, mu: m1 },
                Param::Rotation { mode: k, lambda: l2, mu: m2 },
            ) => {
                if j == k {
                    let d2g = grassmann_second_at_zero(shape.dims()[j], (l1, m1), (l2, m2));
                    self.base.mode_product(j, &d2g).expect("square")
                } else {
                    self.base
                        .mode_product(j, &self.generator(j, l1, m1))
                        .and_then(|x| x.mode_product(k, &self.generator(k, l2, m2)))
                        .expect("square generators")
                }
            }
        }
    }

    /// ∂T/∂p at 0 for parameter `p`.
    pub fn first_at_zero(&self, p: usize) -> DenseTensor {
        match self.layout.param(p) {
            Param::Core(idx) => self.d_core(&idx),
            Param::Rotation { mode, lambda, mu } => self.d_rotation(mode, lambda, mu),
        }
    }
}

fn to_vector(t: DenseTensor) -> DVector<f64> {
    DVector::from_vec(t.into_data())
}

impl Chart for TuckerChart {
    fn param_dim(&self) -> usize {
        self.layout.dim()
    }

    fn ambient_dim(&self) -> usize {
        self.point.shape.len()
    }

    fn value(&self, u: &[f64]) -> Result<DVector<f64>> {
        self.tensor_at(u).map(to_vector)
    }

    fn analytic_first(&self, u: &[f64]) -> Option<Vec<DVector<f64>>> {
        if u.iter().any(|&x| x != 0.0) {
            return None;
        }
        Some((0..self.layout.dim()).map(|p| to_vector(self.first_at_zero(p))).collect())
    }

    fn analytic_second(&self, u: &[f64]) -> Option<SecondDerivatives> {
        if u.iter().any(|&x| x != 0.0) {
            return None;
        }
        Some(SecondDerivatives::from_fn(self.layout.dim(), |a, b| {
            to_vector(self.second_at_zero(a, b))
        }))
    }
}

pub fn tucker_chart(point: CanonicalPoint) -> Result<TuckerChart> {
    TuckerChart::new(point)
}

/// Block structure of the Gram matrix at the origin of a [`TuckerChart`].
#[derive(Debug, Clone, Serialize)]
pub struct GramBlockReport {
    #[serde(skip)]
    pub gram: DMatrix<f64>,
    /// A_j read off the first diagonal copy of each mode block.
    #[serde(skip)]
    pub a_blocks: Vec<DMatrix<f64>>,
    /// max |G_ss − I|
    pub s_block_deviation: f64,
    /// Largest entry that must vanish: s–u coupling, cross-mode and
    /// same-mode different-μ entries.
    pub off_structure_max: f64,
    /// max over modes and μ of |copy_μ − A_j|
    pub copy_deviation_max: f64,
    /// max |A_j − F_j F_jᵀ| on the leading r_j × r_j block.
    pub flattening_gram_deviation: f64,
    pub gram_max: f64,
    pub min_eigenvalue: f64,
    pub trace: f64,
    pub dim: usize,
}

pub fn gram_block_report(point: &CanonicalPoint) -> Result<GramBlockReport> {
    let chart = TuckerChart::new(point.clone())?;
    let layout = chart.layout();
    let m = layout.dim();
    let basis = chart.analytic_first(&vec![0.0; m]).expect("analytic at origin");
    let gram = DMatrix::from_fn(m, m, |i, j| basis[i].dot(&basis[j]));
    let params: Vec<Param> = (0..m).map(|p| layout.param(p)).collect();

    let mut s_block_deviation: f64 = 0.0;
    let mut off_structure_max: f64 = 0.0;
    for a in 0..m {
        for b in 0..m {
            let g = gram[(a, b)];
            match (&params[a], &params[b]) {
                (Param::Core(_), Param::Core(_)) => {
                    let target = if a == b { 1.0 } else { 0.0 };
                    s_block_deviation = s_block_deviation.max((g - target).abs());
                }
                (Param::Rotation { mode: j, mu: m1, .. }, Param::Rotation { mode: k, mu: m2, .. })
                    if j == k && m1 == m2 => {}
                _ => off_structure_max = off_structure_max.max(g.abs()),
            }
        }
    }

    let base = chart.base();
    let mut a_blocks = Vec::new();
    let mut copy_deviation_max: f64 = 0.0;
    let mut flattening_gram_deviation: f64 = 0.0;
    for j in 0..point.shape.order() {
        let (n, r) = (point.shape.dims()[j], point.rank.ranks()[j]);
        let flat = base.flatten(j)?;
        let row_gram = &flat * flat.transpose();
        let a = if n > r {
            let start = layout.rotation_index(j, 0, r);
            gram.view((start, start), (r, r)).into_owned()
        } else {
            row_gram.view((0, 0), (r, r)).into_owned()
        };
        for mu in r..n {
            let start = layout.rotation_index(j, 0, mu);
            let copy = gram.view((start, start), (r, r));
            copy_deviation_max = copy_deviation_max.max((copy - &a).amax());
        }
        let dev = (row_gram.view((0, 0), (r, r)) - &a).amax();
        flattening_gram_deviation = flattening_gram_deviation.max(dev);
        a_blocks.push(a);
    }

    let min_eigenvalue = nalgebra::SymmetricEigen::new(gram.clone()).eigenvalues.min();
    Ok(GramBlockReport {
        s_block_deviation,
        off_structure_max,
        copy_deviation_max,
        flattening_gram_deviation,
        gram_max: gram.amax(),
        min_eigenvalue,
        trace: gram.trace(),
        dim: m,
        a_blocks,
        gram,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub sample: usize,
    pub shape: Vec<usize>,
    pub rank: Vec<usize>,
    pub gram_min_eig: Option<f64>,
    pub curvature_ratio: Option<f64>,
    pub off_structure_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub pass: bool,
    pub max_ratio: f64,
    pub samples: usize,
    pub tol: f64,
    pub rank_failures: usize,
    pub results: Vec<SampleReport>,
}

/// Independent RNG stream for sample `index` of a campaign with `seed`.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Curvature ratio and Gram data for one random rank-r tensor.
pub fn minimality_sample(shape: &Shape, rank: &MultilinearRank, seed: u64, index: usize) -> SampleReport {
    let mut report = SampleReport {
        sample: index,
        shape: shape.dims().to_vec(),
        rank: rank.ranks().to_vec(),
        gram_min_eig: None,
        curvature_ratio: None,
        off_structure_max: None,
        error: None,
    };
    let run = || -> Result<(f64, f64, f64)> {
        let mut rng = sample_rng(seed, index);
        let t = random_rank_r_tensor(shape, rank, &mut rng)?;
        let point = canonicalize(&t, None)?;
        if point.rank != *rank {
            return Err(GeometryError::InvalidArgument(format!(
                "canonicalization detected rank {:?}",
                point.rank.ranks()
            )));
        }
        let blocks = gram_block_report(&point)?;
        let chart = TuckerChart::new(point)?;
        let zero = vec![0.0; chart.param_dim()];
        let h = LocalGeometry::at(&chart, &zero, Backend::Auto)?.mean_curvature();
        Ok((h.ratio(), blocks.min_eigenvalue, blocks.off_structure_max))
    };
    match run() {
        Ok((ratio, eig, off)) => {
            report.curvature_ratio = Some(ratio);
            report.gram_min_eig = Some(eig);
            report.off_structure_max = Some(off);
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    report
}

/// Randomized check that the mean curvature vanishes at canonical points.
pub fn verify_minimality(
    shape: &Shape,
    rank: &MultilinearRank,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<MinimalityReport> {
    rank.check_admissible(shape)?;
    if rank.is_zero() {
        return Err(GeometryError::InadmissibleRank {
            shape: shape.dims().to_vec(),
            rank: rank.ranks().to_vec(),
            reason: "the zero tensor is an isolated point".into(),
        });
    }
    let results: Vec<SampleReport> = (0..samples)
        .map(|k| minimality_sample(shape, rank, seed, k))
        .collect();
    let ratios: Vec<f64> = results.iter().filter_map(|r| r.curvature_ratio).collect();
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(MinimalityReport {
        pass: !ratios.is_empty() && ratios.iter().all(|&r| r <= tol),
        max_ratio,
        samples,
        tol,
        rank_failures: samples - ratios.len(),
        results,
    })
}
