//! Rank-one tensors (the Segre variety) and linear functionals on them.
//!
//! At the base point e₁ ⊗ … ⊗ e₁ the ambient space splits orthogonally into
//! levels N_0, …, N_d, where N_k is spanned by basic tensors with exactly k
//! indices different from the first one. N_0 ⊕ N_1 is the tangent space and
//! N_2 ⊕ … ⊕ N_d the normal space. A normal functional whose lowest nonzero
//! level is k* is probed by rank-one curves rotating k* factors at once; the
//! pairing along such a curve starts at order k* with coefficient k*!·c, so
//! the curve and its sign-flipped twin land on opposite sides of the
//! functional's level set.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::curvature::{Backend, Chart, LocalGeometry, SecondDerivatives};
use crate::error::{GeometryError, Result};
use crate::tensor::{group_action, DenseTensor, OrthogonalTuple, Shape};
use crate::tucker::{rotation_exp, CanonicalPoint, SkewGenerator, TuckerChart};

/// Relative threshold separating structural zeros from roundoff in level norms.
pub const LEVEL_TOL: f64 = 1e-10;
/// Default starting parameter of the witness search.
pub const DEFAULT_EPSILON: f64 = 0.1;
/// The witness search gives up below this parameter.
pub const WITNESS_FLOOR: f64 = 1e-12;
/// Highest derivative order of [`ProbeCurve::pairings`].
pub const MAX_PAIRING_ORDER: usize = 8;

/// scale · v₁ ⊗ … ⊗ v_d with unit factors.
#[derive(Debug, Clone, PartialEq)]
pub struct SegrePoint {
    factors: Vec<DVector<f64>>,
    scale: f64,
}

impl SegrePoint {
    /// Normalizes the factors, folding their norms into the scale.
    pub fn new(factors: Vec<DVector<f64>>, scale: f64) -> Result<Self> {
        if factors.is_empty() {
            return Err(GeometryError::Dimension("need at least one factor".into()));
        }
        let mut total = scale;
        let mut units = Vec::with_capacity(factors.len());
        for v in factors {
            let n = v.norm();
            if n == 0.0 || !n.is_finite() {
                return Err(GeometryError::InvalidArgument("factor must be nonzero and finite".into()));
            }
            total *= n;
            units.push(v / n);
        }
        if total == 0.0 || !total.is_finite() {
            return Err(GeometryError::InvalidArgument("scale must be nonzero".into()));
        }
        Ok(Self {
            factors: units,
            scale: total,
        })
    }

    /// e₁ ⊗ … ⊗ e₁
    pub fn canonical(shape: &Shape) -> Self {
        let factors = shape
            .dims()
            .iter()
            .map(|&n| {
                let mut e = DVector::zeros(n);
                e[0] = 1.0;
                e
            })
            .collect();
        Self { factors, scale: 1.0 }
    }

    pub fn factors(&self) -> &[DVector<f64>] {
        &self.factors
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.factors.iter().map(|v| v.len()).collect()).expect("nonempty factors")
    }

    pub fn tensor(&self) -> DenseTensor {
        let refs: Vec<&[f64]> = self.factors.iter().map(|v| v.as_slice()).collect();
        DenseTensor::outer(&refs).expect("nonempty factors").scaled(self.scale)
    }

    /// Householder reflections taking each factor to e₁.
    pub fn aligning(&self) -> OrthogonalTuple {
        let factors = self
            .factors
            .iter()
            .map(|v| {
                let n = v.len();
                let mut w = v.clone();
                w[0] -= 1.0;
                let ww = w.norm_squared();
                if ww < 1e-30 {
                    DMatrix::identity(n, n)
                } else {
                    DMatrix::identity(n, n) - (&w * w.transpose()) * (2.0 / ww)
                }
            })
            .collect();
        OrthogonalTuple::new(factors).expect("reflections are orthogonal")
    }
}

/// Number of indices of `index` that differ from the first one.
pub fn level_of(index: &[usize]) -> usize {
    index.iter().filter(|&&i| i != 0).count()
}

/// Basic tensors of every level N_k at the canonical base point.
#[derive(Debug, Clone)]
pub struct NormalFrame {
    shape: Shape,
    levels: Vec<Vec<Vec<usize>>>,
}

impl NormalFrame {
    pub fn new(shape: &Shape) -> Self {
        let mut levels = vec![Vec::new(); shape.order() + 1];
        for idx in shape.indices() {
            levels[level_of(&idx)].push(idx);
        }
        Self {
            shape: shape.clone(),
            levels,
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Multi-indices of the basic tensors spanning N_k.
    pub fn level(&self, k: usize) -> &[Vec<usize>] {
        &self.levels[k]
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.len()).collect()
    }

    pub fn base(&self) -> DenseTensor {
        SegrePoint::canonical(&self.shape).tensor()
    }

    /// Orthogonal projection of `t` onto N_k.
    pub fn component(&self, t: &DenseTensor, k: usize) -> DenseTensor {
        let mut out = DenseTensor::zeros(self.shape.clone());
        for idx in &self.levels[k] {
            out.set(idx, t.get(idx));
        }
        out
    }
}

pub fn normal_frame(shape: &Shape) -> NormalFrame {
    NormalFrame::new(shape)
}

/// A linear functional S ↦ ⟨ℓ, S⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFunctional {
    pub ell: DenseTensor,
}

impl LinearFunctional {
    pub fn new(ell: DenseTensor) -> Self {
        Self { ell }
    }

    pub fn eval(&self, t: &DenseTensor) -> Result<f64> {
        self.ell.inner(t)
    }
}

/// Basic tensor of the lowest nonzero normal level carrying the largest coefficient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelWitness {
    pub level: usize,
    pub index: Vec<usize>,
    pub coefficient: f64,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub components: Vec<DenseTensor>,
    pub level_norms: Vec<f64>,
    pub witness: LevelWitness,
}

/// Splits ℓ over the levels and locates k* with its witness basic tensor.
pub fn decompose_functional(ell: &LinearFunctional, frame: &NormalFrame) -> Result<Decomposition> {
    if ell.ell.shape() != frame.shape() {
        return Err(GeometryError::Dimension(format!(
            "functional shape {:?} vs frame shape {:?}",
            ell.ell.shape().dims(),
            frame.shape().dims()
        )));
    }
    let total = ell.ell.norm();
    let components: Vec<DenseTensor> = (0..frame.levels.len())
        .map(|k| frame.component(&ell.ell, k))
        .collect();
    let level_norms: Vec<f64> = components.iter().map(|c| c.norm()).collect();
    let tangent_norm = level_norms[0].hypot(level_norms.get(1).copied().unwrap_or(0.0));
    let threshold = LEVEL_TOL * total;
    if tangent_norm > threshold {
        return Err(GeometryError::NotNormal { tangent_norm });
    }
    let level = (2..level_norms.len())
        .find(|&k| level_norms[k] > threshold)
        .ok_or(GeometryError::NoWitness)?;
    let (index, coefficient) = frame.levels[level]
        .iter()
        .map(|idx| (idx.clone(), ell.ell.get(idx)))
        .fold((Vec::new(), 0.0_f64), |best, cur| if cur.1.abs() > best.1.abs() { cur } else { best });
    Ok(Decomposition {
        components,
        level_norms,
        witness: LevelWitness {
            level,
            index,
            coefficient,
        },
    })
}

/// u ↦ ⊗_j exp(s_j u L_{1,α_j}) e₁ on the probed modes, e₁ elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeCurve {
    shape: Shape,
    modes: Vec<usize>,
    targets: Vec<usize>,
    signs: Vec<f64>,
}

impl ProbeCurve {
    /// `modes` strictly increasing, `targets[i] ≥ 1` (0-based, i.e. not e₁),
    /// `signs` ±1.
    pub fn new(shape: &Shape, modes: Vec<usize>, targets: Vec<usize>, signs: Vec<f64>) -> Result<Self> {
        if modes.len() != targets.len() || modes.len() != signs.len() {
            return Err(GeometryError::InvalidArgument("modes, targets and signs differ in length".into()));
        }
        if modes.windows(2).any(|w| w[0] >= w[1]) || modes.iter().any(|&m| m >= shape.order()) {
            return Err(GeometryError::InvalidArgument(format!("invalid probe modes {modes:?}")));
        }
        for (&m, &a) in modes.iter().zip(&targets) {
            if a == 0 || a >= shape.dims()[m] {
                return Err(GeometryError::InvalidArgument(format!(
                    "target {a} invalid for mode {m} of size {}",
                    shape.dims()[m]
                )));
            }
        }
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(GeometryError::InvalidArgument("signs must be ±1".into()));
        }
        Ok(Self {
            shape: shape.clone(),
            modes,
            targets,
            signs,
        })
    }

    /// The curve through the witness index: its non-first entries are probed.
    /// `flip_first` negates the parameter in the first probed factor.
    pub fn through(shape: &Shape, index: &[usize], flip_first: bool) -> Result<Self> {
        let modes: Vec<usize> = (0..index.len()).filter(|&j| index[j] != 0).collect();
        let targets = modes.iter().map(|&j| index[j]).collect();
        let mut signs = vec![1.0; modes.len()];
        if flip_first {
            if let Some(s) = signs.first_mut() {
                *s = -1.0;
            }
        }
        Self::new(shape, modes, targets, signs)
    }

    pub fn order(&self) -> usize {
        self.modes.len()
    }

    fn factor(&self, mode: usize, u: f64) -> DVector<f64> {
        let n = self.shape.dims()[mode];
        let mut e1 = DVector::zeros(n);
        e1[0] = 1.0;
        match self.modes.iter().position(|&m| m == mode) {
            Some(p) => {
                let l = SkewGenerator::new(mode, 0, self.targets[p], n).expect("validated target");
                rotation_exp(&l, self.signs[p] * u) * e1
            }
            None => e1,
        }
    }

    pub fn evaluate(&self, u: f64) -> DenseTensor {
        let factors: Vec<DVector<f64>> = (0..self.shape.order()).map(|j| self.factor(j, u)).collect();
        let refs: Vec<&[f64]> = factors.iter().map(|v| v.as_slice()).collect();
        DenseTensor::outer(&refs).expect("nonempty")
    }

    /// ⟨γ^{(j)}(0), ℓ⟩ for j = 0..=order, exact from the trigonometric form
    /// of the pairing.
    pub fn pairings(&self, ell: &LinearFunctional, order: usize) -> Result<Vec<f64>> {
        if order > MAX_PAIRING_ORDER {
            return Err(GeometryError::InvalidArgument(format!(
                "pairing order {order} exceeds {MAX_PAIRING_ORDER}"
            )));
        }
        if ell.ell.shape() != &self.shape {
            return Err(GeometryError::Dimension("functional shape differs from curve shape".into()));
        }
        let k = self.modes.len();
        let mut taylor = vec![0.0; order + 1];
        // every subset of probed modes that carry sin instead of cos
        for mask in 0u32..(1 << k) {
            let mut index = vec![0; self.shape.order()];
            let mut poly = vec![0.0; order + 1];
            poly[0] = 1.0;
            for p in 0..k {
                let use_sin = mask & (1 << p) != 0;
                if use_sin {
                    index[self.modes[p]] = self.targets[p];
                }
                poly = mul_truncated(&poly, &trig_series(use_sin, self.signs[p], order));
            }
            let coeff = ell.ell.get(&index);
            if coeff != 0.0 {
                for (t, c) in taylor.iter_mut().zip(&poly) {
                    *t += coeff * c;
                }
            }
        }
        let mut fact = 1.0;
        Ok(taylor
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if j > 0 {
                    fact *= j as f64;
                }
                c * fact
            })
            .collect())
    }
}

/// Taylor coefficients of sin(s u) or cos(s u) up to degree `order`.
fn trig_series(sin: bool, s: f64, order: usize) -> Vec<f64> {
    let mut out = vec![0.0; order + 1];
    let mut fact = 1.0;
    let mut pow = 1.0;
    for n in 0..=order {
        if n > 0 {
            fact *= n as f64;
            pow *= s;
        }
        let phase = if sin { (n + 3) % 4 } else { n % 4 };
        // derivative of cos at 0 cycles 1, 0, -1, 0; sin is cos shifted by one
        let d = [1.0, 0.0, -1.0, 0.0][phase];
        out[n] = d * pow / fact;
    }
    out
}

fn mul_truncated(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut out = vec![0.0; n];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(n - i) {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn probe_curve(
    frame: &NormalFrame,
    modes: Vec<usize>,
    targets: Vec<usize>,
    signs: Vec<f64>,
) -> Result<ProbeCurve> {
    ProbeCurve::new(frame.shape(), modes, targets, signs)
}

pub fn curve_pairings(curve: &ProbeCurve, ell: &LinearFunctional, order: usize) -> Result<Vec<f64>> {
    curve.pairings(ell, order)
}

/// Points on both sides of the level set of ℓ through a Segre point.
#[derive(Debug, Clone, Serialize)]
pub struct ExtremumWitness {
    pub level: usize,
    pub index: Vec<usize>,
    pub coefficient: f64,
    pub u_plus: f64,
    pub u_minus: f64,
    /// ⟨point⁺ − T, ℓ⟩ > 0
    pub value_plus: f64,
    /// ⟨point⁻ − T, ℓ⟩ < 0
    pub value_minus: f64,
    #[serde(skip)]
    pub point_plus: DenseTensor,
    #[serde(skip)]
    pub point_minus: DenseTensor,
}

fn halving_search(epsilon: f64, mut accept: impl FnMut(f64) -> Option<f64>) -> Result<(f64, f64)> {
    let mut u = epsilon;
    while u >= WITNESS_FLOOR {
        if let Some(v) = accept(u) {
            return Ok((u, v));
        }
        u *= 0.5;
    }
    Err(GeometryError::NumericalFailure {
        floor: WITNESS_FLOOR,
    })
}

/// Witness pair at the canonical base point of `frame`.
pub fn extremum_witness(ell: &LinearFunctional, frame: &NormalFrame, epsilon: f64) -> Result<ExtremumWitness> {
    extremum_witness_at(&SegrePoint::canonical(frame.shape()), ell, epsilon)
}

/// Witness pair at an arbitrary Segre point, found in canonical position
/// and rotated back.
pub fn extremum_witness_at(point: &SegrePoint, ell: &LinearFunctional, epsilon: f64) -> Result<ExtremumWitness> {
    if !(epsilon > 0.0) {
        return Err(GeometryError::InvalidArgument("epsilon must be positive".into()));
    }
    let shape = point.shape();
    let frame = NormalFrame::new(&shape);
    let g = point.aligning();
    let local = LinearFunctional::new(group_action(&g, &ell.ell)?);
    let dec = decompose_functional(&local, &frame)?;
    let w = dec.witness.clone();
    let gamma = ProbeCurve::through(&shape, &w.index, false)?;
    let twin = ProbeCurve::through(&shape, &w.index, true)?;
    // sign of the leading term of ⟨scale·γ(u) − T, ℓ⟩ is sign(scale·c)
    let (up, down) = if w.coefficient * point.scale() > 0.0 {
        (gamma, twin)
    } else {
        (twin, gamma)
    };
    let base = frame.base();
    let back = g.transpose();
    let pairing = |curve: &ProbeCurve, u: f64| -> f64 {
        let diff = curve.evaluate(u).sub(&base).expect("same shape");
        point.scale() * diff.inner(&local.ell).expect("same shape")
    };
    let (u_plus, value_plus) = halving_search(epsilon, |u| Some(pairing(&up, u)).filter(|&v| v > 0.0))?;
    let (u_minus, value_minus) = halving_search(epsilon, |u| Some(pairing(&down, u)).filter(|&v| v < 0.0))?;
    let lift = |curve: &ProbeCurve, u: f64| group_action(&back, &curve.evaluate(u).scaled(point.scale()));
    Ok(ExtremumWitness {
        level: w.level,
        index: w.index,
        coefficient: w.coefficient,
        u_plus,
        u_minus,
        value_plus,
        value_minus,
        point_plus: lift(&up, u_plus)?,
        point_minus: lift(&down, u_minus)?,
    })
}

/// ℓ shifted by a multiple of the slice normal so that it annihilates T.
#[derive(Debug, Clone)]
pub struct SliceReduction {
    pub mu: f64,
    pub v: LinearFunctional,
    /// μ·c: on the slice ⟨a, X⟩ = c, ⟨v, X⟩ = ⟨ℓ, X⟩ + shift.
    pub shift: f64,
}

/// v = ℓ + μ a with μ = −⟨ℓ, T⟩ / ⟨a, T⟩, for the slice {X : ⟨a, X⟩ = c}.
pub fn slice_reduce(
    ell: &LinearFunctional,
    a: &DenseTensor,
    offset: f64,
    t: &DenseTensor,
) -> Result<SliceReduction> {
    let at = a.inner(t)?;
    if at.abs() <= 1e-14 * a.norm() * t.norm() {
        return Err(GeometryError::SliceTangency);
    }
    let aa = a.inner(a)?;
    let residual = ell.ell.axpy(-ell.ell.inner(a)? / aa, a)?;
    if residual.norm() <= 1e-12 * ell.ell.norm() || ell.ell.norm() == 0.0 {
        return Err(GeometryError::ConstantFunctional);
    }
    let mu = -ell.ell.inner(t)? / at;
    Ok(SliceReduction {
        mu,
        v: LinearFunctional::new(ell.ell.axpy(mu, a)?),
        shift: mu * offset,
    })
}

/// Product of probability vectors, parametrized by dropping the last
/// probability of each factor.
#[derive(Debug, Clone)]
pub struct IndependenceChart {
    shape: Shape,
}

impl IndependenceChart {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&n| n < 2) {
            return Err(GeometryError::InvalidArgument(format!(
                "every variable needs at least two states, got {dims:?}"
            )));
        }
        Ok(Self {
            shape: Shape::new(dims.to_vec())?,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Full probability vectors for the given free parameters.
    pub fn distributions(&self, u: &[f64]) -> Result<Vec<DVector<f64>>> {
        if u.len() != self.param_dim() {
            return Err(GeometryError::Dimension(format!(
                "independence chart has {} parameters, got {}",
                self.param_dim(),
                u.len()
            )));
        }
        let mut out = Vec::with_capacity(self.shape.order());
        let mut at = 0;
        for &n in self.shape.dims() {
            let free = &u[at..at + n - 1];
            at += n - 1;
            let last = 1.0 - free.iter().sum::<f64>();
            if free.iter().any(|&p| !(p > 0.0)) || !(last > 0.0) {
                return Err(GeometryError::Domain(format!("{free:?}")));
            }
            let mut p = DVector::zeros(n);
            p.rows_mut(0, n - 1).copy_from_slice(free);
            p[n - 1] = last;
            out.push(p);
        }
        Ok(out)
    }

    fn outer(vs: &[DVector<f64>]) -> DVector<f64> {
        let refs: Vec<&[f64]> = vs.iter().map(|v| v.as_slice()).collect();
        DVector::from_vec(DenseTensor::outer(&refs).expect("nonempty").into_data())
    }

    /// (mode, free index) of each parameter.
    fn param_owner(&self) -> Vec<(usize, usize)> {
        self.shape
            .dims()
            .iter()
            .enumerate()
            .flat_map(|(j, &n)| (0..n - 1).map(move |a| (j, a)))
            .collect()
    }

    fn direction(n: usize, a: usize) -> DVector<f64> {
        let mut d = DVector::zeros(n);
        d[a] = 1.0;
        d[n - 1] = -1.0;
        d
    }
}

impl Chart for IndependenceChart {
    fn param_dim(&self) -> usize {
        self.shape.dims().iter().map(|n| n - 1).sum()
    }

    fn ambient_dim(&self) -> usize {
        self.shape.len()
    }

    fn value(&self, u: &[f64]) -> Result<DVector<f64>> {
        Ok(Self::outer(&self.distributions(u)?))
    }

    fn analytic_first(&self, u: &[f64]) -> Option<Vec<DVector<f64>>> {
        let p = self.distributions(u).ok()?;
        Some(
            self.param_owner()
                .into_iter()
                .map(|(j, a)| {
                    let mut vs = p.clone();
                    vs[j] = Self::direction(p[j].len(), a);
                    Self::outer(&vs)
                })
                .collect(),
        )
    }

    fn analytic_second(&self, u: &[f64]) -> Option<SecondDerivatives> {
        let p = self.distributions(u).ok()?;
        let owner = self.param_owner();
        Some(SecondDerivatives::from_fn(owner.len(), |x, y| {
            let ((j, a), (k, b)) = (owner[x], owner[y]);
            if j == k {
                // affine in each factor
                return DVector::zeros(self.ambient_dim());
            }
            let mut vs = p.clone();
            vs[j] = Self::direction(p[j].len(), a);
            vs[k] = Self::direction(p[k].len(), b);
            Self::outer(&vs)
        }))
    }
}

pub fn independence_model_chart(dims: &[usize]) -> Result<IndependenceChart> {
    IndependenceChart::new(dims)
}

#[derive(Debug, Clone, Serialize)]
pub struct FieldRow {
    pub params: Vec<f64>,
    pub point: Vec<f64>,
    pub h: Vec<f64>,
    pub h_norm: f64,
    /// max_i |⟨H, ∂_i r⟩| / (‖H‖‖∂_i r‖)
    pub normality: f64,
}

/// Grid coordinates in (0, 1): (i + 1) / (grid + 1). The free probabilities
/// of a variable with n states are these divided by n − 1, so every grid
/// point lies in the open simplex.
pub fn field_grid_params(chart: &IndependenceChart, grid: usize) -> Vec<Vec<f64>> {
    let m = chart.param_dim();
    let scales: Vec<f64> = chart
        .shape()
        .dims()
        .iter()
        .flat_map(|&n| std::iter::repeat_n((n - 1) as f64, n - 1))
        .collect();
    let total = grid.pow(m as u32);
    (0..total)
        .map(|mut flat| {
            let mut coords = vec![0.0; m];
            for a in (0..m).rev() {
                let i = flat % grid;
                flat /= grid;
                coords[a] = (i + 1) as f64 / (grid + 1) as f64 / scales[a];
            }
            coords
        })
        .collect()
}

/// Mean curvature of the independence model on a grid, rows in
/// lexicographic grid order.
pub fn slice_curvature_field(dims: &[usize], grid: usize) -> Result<Vec<FieldRow>> {
    if grid == 0 {
        return Err(GeometryError::InvalidArgument("grid must be positive".into()));
    }
    let chart = IndependenceChart::new(dims)?;
    field_grid_params(&chart, grid)
        .into_iter()
        .map(|params| {
            let geo = LocalGeometry::at(&chart, &params, Backend::Auto)?;
            let h = geo.mean_curvature();
            let point = chart.value(&params)?;
            Ok(FieldRow {
                normality: geo.frame.normality_ratio(&h.vector),
                h_norm: h.norm,
                h: h.vector.iter().copied().collect(),
                point: point.iter().copied().collect(),
                params,
            })
        })
        .collect()
}

/// Writes the field as CSV: `param_*`, `tensor_*`, `H_*`, `H_norm`.
pub fn write_field_csv<W: Write>(rows: &[FieldRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(first) = rows.first() {
        let mut header: Vec<String> = (0..first.params.len()).map(|i| format!("param_{i}")).collect();
        header.extend((0..first.point.len()).map(|i| format!("tensor_{i}")));
        header.extend((0..first.h.len()).map(|i| format!("H_{i}")));
        header.push("H_norm".into());
        w.write_record(&header)?;
    }
    for row in rows {
        let record: Vec<String> = row
            .params
            .iter()
            .chain(&row.point)
            .chain(&row.h)
            .chain(std::iter::once(&row.h_norm))
            .map(|x| x.to_string())
            .collect();
        w.write_record(&record)?;
    }
    w.flush()
}

/// Tucker chart of the Segre variety at e₁ ⊗ … ⊗ e₁.
pub fn segre_chart(shape: &Shape) -> Result<TuckerChart> {
    let core = DenseTensor::new(Shape::new(vec![1; shape.order()])?, vec![1.0])?;
    TuckerChart::new(CanonicalPoint::from_core(shape.clone(), core)?)
}

#[derive(Debug, Clone)]
pub struct DegeneracyReport {
    /// ⟨b(∂_i, ∂_j), ℓ⟩ over the chart's tangent basis.
    pub pairing: DMatrix<f64>,
    pub max_abs: f64,
    pub ell_norm: f64,
}

/// The second fundamental form of the Segre variety at the base point,
/// paired with ℓ.
pub fn sff_degeneracy_check(shape: &Shape, ell: &LinearFunctional) -> Result<DegeneracyReport> {
    if ell.ell.shape() != shape {
        return Err(GeometryError::Dimension("functional shape differs".into()));
    }
    let chart = segre_chart(shape)?;
    let geo = LocalGeometry::at(&chart, &vec![0.0; chart.param_dim()], Backend::Auto)?;
    let pairing = geo.sff_pairing(&DVector::from_column_slice(ell.ell.data()));
    Ok(DegeneracyReport {
        max_abs: pairing.amax(),
        ell_norm: ell.ell.norm(),
        pairing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::{fd_first, tangent_frame, FdStep};
    use crate::tensor::multilinear_rank;

    fn shape(d: &[usize]) -> Shape {
        Shape::new(d.to_vec()).unwrap()
    }

    fn basic(dims: &[usize], idx: &[usize], c: f64) -> LinearFunctional {
        LinearFunctional::new(DenseTensor::basis(shape(dims), idx).unwrap().scaled(c))
    }

    #[test]
    fn level_sizes_for_cube() {
        let f = NormalFrame::new(&shape(&[2, 2, 2]));
        assert_eq!(f.level_sizes(), vec![1, 3, 3, 1]);
        let f = NormalFrame::new(&shape(&[3, 2, 4]));
        // Σ over k-subsets of Π(n−1) with n−1 = (2, 1, 3)
        assert_eq!(f.level_sizes(), vec![1, 2 + 1 + 3, 2 + 6 + 3, 6]);
        assert_eq!(f.level_sizes().iter().sum::<usize>(), 24);
    }

    #[test]
    fn decomposition_witnesses() {
        let frame = NormalFrame::new(&shape(&[2, 2, 2]));
        let d = decompose_functional(&basic(&[2, 2, 2], &[1, 1, 0], 1.0), &frame).unwrap();
        assert_eq!(d.witness, LevelWitness { level: 2, index: vec![1, 1, 0], coefficient: 1.0 });
        let d = decompose_functional(&basic(&[2, 2, 2], &[1, 1, 1], 1.0), &frame).unwrap();
        assert_eq!(d.witness.level, 3);
        assert!(matches!(
            decompose_functional(&LinearFunctional::new(frame.base()), &frame),
            Err(GeometryError::NotNormal { .. })
        ));
        assert!(matches!(
            decompose_functional(&LinearFunctional::new(DenseTensor::zeros(shape(&[2, 2, 2]))), &frame),
            Err(GeometryError::NoWitness)
        ));
    }

    #[test]
    fn witness_prefers_largest_coefficient() {
        let frame = NormalFrame::new(&shape(&[3, 3]));
        let mut ell = DenseTensor::zeros(shape(&[3, 3]));
        ell.set(&[1, 1], 0.2);
        ell.set(&[2, 1], -0.9);
        let d = decompose_functional(&LinearFunctional::new(ell), &frame).unwrap();
        assert_eq!(d.witness.index, vec![2, 1]);
        assert_eq!(d.witness.coefficient, -0.9);
    }

    #[test]
    fn curve_pairings_for_level_two() {
        let s = shape(&[2, 2, 2]);
        let ell = basic(&[2, 2, 2], &[1, 1, 0], 1.0);
        let gamma = ProbeCurve::new(&s, vec![0, 1], vec![1, 1], vec![1.0, 1.0]).unwrap();
        let p = gamma.pairings(&ell, 2).unwrap();
        assert_eq!(p, vec![0.0, 0.0, 2.0]);
        let twin = ProbeCurve::new(&s, vec![0, 1], vec![1, 1], vec![-1.0, 1.0]).unwrap();
        assert_eq!(twin.pairings(&ell, 2).unwrap(), vec![0.0, 0.0, -2.0]);
        assert!(gamma.pairings(&ell, 9).is_err());
    }

    #[test]
    fn pairings_match_finite_differences() {
        let s = shape(&[3, 2, 3]);
        let mut ell = DenseTensor::from_fn(s.clone(), |i| (i[0] as f64 + 1.0) * 0.3 - i[2] as f64 * 0.7 + i[1] as f64);
        ell.set(&[0, 0, 0], 0.4);
        let ell = LinearFunctional::new(ell);
        let curve = ProbeCurve::new(&s, vec![0, 2], vec![2, 1], vec![1.0, -1.0]).unwrap();
        let exact = curve.pairings(&ell, 2).unwrap();
        let f = |u: f64| curve.evaluate(u).inner(&ell.ell).unwrap();
        let h = 1e-4;
        let d1 = (f(h) - f(-h)) / (2.0 * h);
        let d2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        assert!((exact[0] - f(0.0)).abs() < 1e-14);
        assert!((exact[1] - d1).abs() <= 1e-5 * exact[1].abs().max(1.0));
        assert!((exact[2] - d2).abs() <= 1e-5 * exact[2].abs().max(1.0));
    }

    #[test]
    fn curves_stay_rank_one() {
        let s = shape(&[3, 3, 2]);
        let curve = ProbeCurve::new(&s, vec![0, 1, 2], vec![2, 1, 1], vec![-1.0, 1.0, 1.0]).unwrap();
        assert_eq!(curve.evaluate(0.0), NormalFrame::new(&s).base());
        for u in [0.1, -0.7, 2.3] {
            assert_eq!(multilinear_rank(&curve.evaluate(u), None).ranks, vec![1, 1, 1]);
        }
        assert!(ProbeCurve::new(&s, vec![1, 0], vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(ProbeCurve::new(&s, vec![0], vec![0], vec![1.0]).is_err());
        assert!(ProbeCurve::new(&s, vec![2], vec![2], vec![1.0]).is_err());
    }

    #[test]
    fn witness_signs_and_negation() {
        let frame = NormalFrame::new(&shape(&[2, 2, 2]));
        let ell = basic(&[2, 2, 2], &[1, 1, 0], 1.0);
        let w = extremum_witness(&ell, &frame, DEFAULT_EPSILON).unwrap();
        assert!(w.value_plus > 0.0 && w.value_minus < 0.0);
        assert!(w.u_plus > 0.0 && w.u_plus <= DEFAULT_EPSILON);
        let base = frame.base();
        assert!(w.point_plus.sub(&base).unwrap().inner(&ell.ell).unwrap() > 0.0);
        assert!(w.point_minus.sub(&base).unwrap().inner(&ell.ell).unwrap() < 0.0);
        let neg = LinearFunctional::new(ell.ell.scaled(-1.0));
        let wn = extremum_witness(&neg, &frame, DEFAULT_EPSILON).unwrap();
        assert_eq!(wn.point_plus, w.point_minus);
        assert_eq!(wn.point_minus, w.point_plus);
    }

    #[test]
    fn witness_requires_normal_functional() {
        let frame = NormalFrame::new(&shape(&[2, 2]));
        let ell = basic(&[2, 2], &[1, 0], 1.0);
        assert!(matches!(
            extremum_witness(&ell, &frame, 0.1),
            Err(GeometryError::NotNormal { .. })
        ));
    }

    #[test]
    fn slice_reduce_examples() {
        let s = shape(&[2, 2]);
        let t = DenseTensor::basis(s.clone(), &[0, 0]).unwrap();
        let a = DenseTensor::from_fn(s.clone(), |_| 1.0);
        let mut ell = DenseTensor::zeros(s.clone());
        ell.set(&[0, 0], 3.0);
        ell.set(&[1, 0], 0.5);
        let r = slice_reduce(&LinearFunctional::new(ell.clone()), &a, 1.0, &t).unwrap();
        assert_eq!(r.mu, -3.0);
        assert_eq!(r.v.ell.inner(&t).unwrap(), 0.0);
        let ortho = basic(&[2, 2], &[1, 1], 2.0);
        let r = slice_reduce(&ortho, &a, 1.0, &t).unwrap();
        assert_eq!(r.mu, 0.0);
        assert_eq!(r.v, ortho);
        assert!(matches!(
            slice_reduce(&LinearFunctional::new(a.scaled(2.0)), &a, 1.0, &t),
            Err(GeometryError::ConstantFunctional)
        ));
        let tangent_a = DenseTensor::basis(s.clone(), &[1, 1]).unwrap();
        assert!(matches!(
            slice_reduce(&LinearFunctional::new(ell), &tangent_a, 1.0, &t),
            Err(GeometryError::SliceTangency)
        ));
    }

    #[test]
    fn independence_chart_basics() {
        let chart = IndependenceChart::new(&[2, 3]).unwrap();
        assert_eq!(chart.param_dim(), 3);
        let v = chart.value(&[0.5, 1.0 / 3.0, 1.0 / 3.0]).unwrap();
        for x in v.iter() {
            assert!((x - 1.0 / 6.0).abs() < 1e-15);
        }
        let v = chart.value(&[0.2, 0.1, 0.6]).unwrap();
        assert!((v.sum() - 1.0).abs() < 1e-15);
        let t = DenseTensor::new(chart.shape().clone(), v.iter().copied().collect()).unwrap();
        assert_eq!(multilinear_rank(&t, None).ranks, vec![1, 1]);
        assert!(matches!(chart.value(&[0.2, 0.5, 0.6]), Err(GeometryError::Domain(_))));
        assert!(matches!(chart.value(&[1.0, 0.1, 0.1]), Err(GeometryError::Domain(_))));
        assert!(IndependenceChart::new(&[1, 2]).is_err());
    }

    #[test]
    fn independence_chart_analytic_matches_fd() {
        let chart = IndependenceChart::new(&[2, 3, 2]).unwrap();
        let u = [0.3, 0.2, 0.45, 0.6];
        let a1 = chart.analytic_first(&u).unwrap();
        let f1 = fd_first(&chart, &u, FdStep::Auto).unwrap();
        for (x, y) in a1.iter().zip(&f1) {
            assert!((x - y).norm() <= 1e-8 * x.norm());
        }
        let a2 = chart.analytic_second(&u).unwrap();
        let f2 = crate::curvature::fd_second(&chart, &u, FdStep::Auto).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((a2.get(i, j) - f2.get(i, j)).norm() <= 1e-6 * a2.max_norm());
            }
        }
    }

    #[test]
    fn tangent_levels_span_segre_chart_frame() {
        let s = shape(&[3, 2, 3]);
        let chart = segre_chart(&s).unwrap();
        let frame = tangent_frame(&chart, &vec![0.0; chart.param_dim()], Backend::Auto).unwrap();
        let nf = NormalFrame::new(&s);
        assert_eq!(nf.level(0).len() + nf.level(1).len(), chart.param_dim());
        for k in 0..2 {
            for idx in nf.level(k) {
                let e = DVector::from_vec(DenseTensor::basis(s.clone(), idx).unwrap().into_data());
                assert!(frame.normal_project(&e).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn field_grid_cardinality_and_order() {
        let rows = slice_curvature_field(&[2, 2], 3).unwrap();
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[0].params, vec![0.25, 0.25]);
        assert_eq!(rows[1].params, vec![0.25, 0.5]);
        let chart = IndependenceChart::new(&[3, 2]).unwrap();
        for p in field_grid_params(&chart, 4) {
            assert!(chart.value(&p).is_ok());
        }
        let mut buf = Vec::new();
        write_field_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "param_0,param_1,tensor_0,tensor_1,tensor_2,tensor_3,H_0,H_1,H_2,H_3,H_norm"
        );
        assert_eq!(text.lines().count(), 10);
    }

    #[test]
    fn segre_point_alignment() {
        let p = SegrePoint::new(
            vec![DVector::from_vec(vec![1.0, 2.0, -2.0]), DVector::from_vec(vec![0.0, -3.0])],
            -0.5,
        )
        .unwrap();
        assert!((p.scale() + 0.5 * 3.0 * 3.0).abs() < 1e-14);
        let g = p.aligning();
        let moved = group_action(&g, &p.tensor()).unwrap();
        let expect = SegrePoint::canonical(&p.shape()).tensor().scaled(p.scale());
        assert!(moved.sub(&expect).unwrap().norm() < 1e-13);
        assert!(SegrePoint::new(vec![DVector::zeros(2)], 1.0).is_err());
    }
}
