//! Extrinsic geometry of a parametrized submanifold of ℝ^N: tangent frames,
//! Gram matrices, normal projection, the second fundamental form and the
//! mean curvature vector
//!
//! ```text
//! H = Σ_ij (G⁻¹)_ij (∂²_ij r)^⊥
//! ```
//!
//! Derivatives come from the chart's analytic backend when it provides one,
//! otherwise from central finite differences.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{GeometryError, Result};

/// Threshold factor for the degenerate-chart test: λ_min(G) ≤ factor·tr(G)/m.
pub const DEGENERACY_FACTOR: f64 = 1e-12;

/// A local parametrization r: U ⊂ ℝ^m → ℝ^N.
pub trait Chart {
    fn param_dim(&self) -> usize;
    fn ambient_dim(&self) -> usize;
    fn value(&self, u: &[f64]) -> Result<DVector<f64>>;

    /// Analytic ∂_i r(u), if available at `u`.
    fn analytic_first(&self, _u: &[f64]) -> Option<Vec<DVector<f64>>> {
        None
    }

    /// Analytic ∂²_ij r(u), if available at `u`.
    fn analytic_second(&self, _u: &[f64]) -> Option<SecondDerivatives> {
        None
    }
}

impl<C: Chart + ?Sized> Chart for &C {
    fn param_dim(&self) -> usize {
        (**self).param_dim()
    }
    fn ambient_dim(&self) -> usize {
        (**self).ambient_dim()
    }
    fn value(&self, u: &[f64]) -> Result<DVector<f64>> {
        (**self).value(u)
    }
    fn analytic_first(&self, u: &[f64]) -> Option<Vec<DVector<f64>>> {
        (**self).analytic_first(u)
    }
    fn analytic_second(&self, u: &[f64]) -> Option<SecondDerivatives> {
        (**self).analytic_second(u)
    }
}

/// Symmetric m×m array of ambient vectors, stored as the upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondDerivatives {
    m: usize,
    upper: Vec<DVector<f64>>,
}

impl SecondDerivatives {
    pub fn from_fn(m: usize, mut f: impl FnMut(usize, usize) -> DVector<f64>) -> Self {
        let mut upper = Vec::with_capacity(m * (m + 1) / 2);
        for i in 0..m {
            for j in i..m {
                upper.push(f(i, j));
            }
        }
        Self { m, upper }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.m - i * (i + 1) / 2 + j
    }

    pub fn get(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.upper[self.slot(i, j)]
    }

    /// max_ij ‖∂²_ij r‖
    pub fn max_norm(&self) -> f64 {
        self.upper.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Σ_ij x_i y_j ∂²_ij r
    pub fn contract(&self, x: &[f64], y: &[f64]) -> DVector<f64> {
        let n = self.upper.first().map_or(0, |v| v.len());
        let mut out = DVector::zeros(n);
        for i in 0..self.m {
            for j in 0..self.m {
                let w = x[i] * y[j];
                if w != 0.0 {
                    out.axpy(w, self.get(i, j), 1.0);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Backend {
    /// Analytic derivatives where the chart supplies them, else finite differences.
    Auto,
    /// Central differences with the default steps.
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FdStep {
    /// ε^{1/3}·max(1,|u_i|) for first and ε^{1/4}·max(1,|u_i|) for second derivatives.
    Auto,
    Fixed(f64),
}

impl FdStep {
    fn first(self, ui: f64) -> f64 {
        match self {
            FdStep::Auto => f64::EPSILON.cbrt() * ui.abs().max(1.0),
            FdStep::Fixed(h) => h,
        }
    }

    fn second(self, ui: f64) -> f64 {
        match self {
            FdStep::Auto => f64::EPSILON.powf(0.25) * ui.abs().max(1.0),
            FdStep::Fixed(h) => h,
        }
    }
}

fn shifted(u: &[f64], moves: &[(usize, f64)]) -> Vec<f64> {
    let mut v = u.to_vec();
    for &(i, d) in moves {
        v[i] += d;
    }
    v
}

/// Central-difference first and second derivatives of `chart` at `u`.
pub fn finite_difference_derivatives<C: Chart + ?Sized>(
    chart: &C,
    u: &[f64],
    step: FdStep,
) -> Result<(Vec<DVector<f64>>, SecondDerivatives)> {
    Ok((fd_first(chart, u, step)?, fd_second(chart, u, step)?))
}

pub fn fd_first<C: Chart + ?Sized>(chart: &C, u: &[f64], step: FdStep) -> Result<Vec<DVector<f64>>> {
    if let FdStep::Fixed(h) = step {
        if !(h > 0.0) {
            return Err(GeometryError::InvalidArgument(format!("step {h} must be positive")));
        }
    }
    (0..chart.param_dim())
        .map(|i| {
            let h = step.first(u[i]);
            let plus = chart.value(&shifted(u, &[(i, h)]))?;
            let minus = chart.value(&shifted(u, &[(i, -h)]))?;
            Ok((plus - minus) / (2.0 * h))
        })
        .collect()
}

pub fn fd_second<C: Chart + ?Sized>(chart: &C, u: &[f64], step: FdStep) -> Result<SecondDerivatives> {
    let m = chart.param_dim();
    let center = chart.value(u)?;
    let mut upper = Vec::with_capacity(m * (m + 1) / 2);
    for i in 0..m {
        let hi = step.second(u[i]);
        for j in i..m {
            let v = if i == j {
                let plus = chart.value(&shifted(u, &[(i, hi)]))?;
                let minus = chart.value(&shifted(u, &[(i, -hi)]))?;
                (plus - &center * 2.0 + minus) / (hi * hi)
            } else {
                let hj = step.second(u[j]);
                let pp = chart.value(&shifted(u, &[(i, hi), (j, hj)]))?;
                let pm = chart.value(&shifted(u, &[(i, hi), (j, -hj)]))?;
                let mp = chart.value(&shifted(u, &[(i, -hi), (j, hj)]))?;
                let mm = chart.value(&shifted(u, &[(i, -hi), (j, -hj)]))?;
                (pp - pm - mp + mm) / (4.0 * hi * hj)
            };
            upper.push(v);
        }
    }
    Ok(SecondDerivatives { m, upper })
}

/// Positive-definite metric matrix of a tangent basis.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    cholesky: Option<Cholesky<f64, Dyn>>,
    min_eigenvalue: f64,
}

impl GramMatrix {
    /// Fails with [`GeometryError::DegenerateChart`] when
    /// λ_min ≤ 1e-12·tr(G)/m.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let m = entries.nrows();
        if m == 0 {
            return Ok(Self {
                entries,
                cholesky: None,
                min_eigenvalue: f64::INFINITY,
            });
        }
        let min_eigenvalue = SymmetricEigen::new(entries.clone()).eigenvalues.min();
        let threshold = DEGENERACY_FACTOR * entries.trace() / m as f64;
        if !(min_eigenvalue > threshold) {
            return Err(GeometryError::DegenerateChart {
                min_eig: min_eigenvalue,
                threshold,
            });
        }
        let cholesky = Cholesky::new(entries.clone()).ok_or(GeometryError::DegenerateChart {
            min_eig: min_eigenvalue,
            threshold,
        })?;
        Ok(Self {
            entries,
            cholesky: Some(cholesky),
            min_eigenvalue,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// Solves G c = rhs.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        match &self.cholesky {
            Some(ch) => ch.solve(rhs),
            None => DVector::zeros(0),
        }
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        match &self.cholesky {
            Some(ch) => ch.inverse(),
            None => DMatrix::zeros(0, 0),
        }
    }
}

/// Tangent basis ∂_i r(u) together with its Gram matrix.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    basis: Vec<DVector<f64>>,
    gram: GramMatrix,
}

impl TangentFrame {
    pub fn new(basis: Vec<DVector<f64>>) -> Result<Self> {
        let m = basis.len();
        if let Some(n) = basis.first().map(|b| b.len()) {
            if basis.iter().any(|b| b.len() != n) {
                return Err(GeometryError::Dimension("tangent vectors differ in length".into()));
            }
        }
        let g = DMatrix::from_fn(m, m, |i, j| basis[i].dot(&basis[j]));
        Ok(Self {
            gram: GramMatrix::new(g)?,
            basis,
        })
    }

    pub fn basis(&self) -> &[DVector<f64>] {
        &self.basis
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    /// Coefficients c with Σ c_i ∂_i r the orthogonal projection of `v`
    /// onto the tangent space.
    pub fn tangent_coefficients(&self, v: &DVector<f64>) -> DVector<f64> {
        let rhs = DVector::from_iterator(self.basis.len(), self.basis.iter().map(|b| b.dot(v)));
        self.gram.solve(&rhs)
    }

    /// Normal component v^⊥ = v − Σ c_i ∂_i r.
    pub fn normal_project(&self, v: &DVector<f64>) -> DVector<f64> {
        let c = self.tangent_coefficients(v);
        let mut out = v.clone();
        for (ci, b) in c.iter().zip(&self.basis) {
            out.axpy(-ci, b, 1.0);
        }
        out
    }

    /// max_i |⟨v, ∂_i r⟩| / (‖v‖‖∂_i r‖), zero for a zero vector.
    pub fn normality_ratio(&self, v: &DVector<f64>) -> f64 {
        let nv = v.norm();
        if nv == 0.0 {
            return 0.0;
        }
        self.basis
            .iter()
            .map(|b| (b.dot(v) / (nv * b.norm())).abs())
            .fold(0.0, f64::max)
    }
}

pub fn normal_project(v: &DVector<f64>, frame: &TangentFrame) -> DVector<f64> {
    frame.normal_project(v)
}

fn first_derivatives<C: Chart + ?Sized>(chart: &C, u: &[f64], backend: Backend) -> Result<Vec<DVector<f64>>> {
    check_params(chart, u)?;
    match (backend, chart.analytic_first(u)) {
        (Backend::Auto, Some(d)) => Ok(d),
        _ => fd_first(chart, u, FdStep::Auto),
    }
}

fn second_derivatives<C: Chart + ?Sized>(chart: &C, u: &[f64], backend: Backend) -> Result<SecondDerivatives> {
    check_params(chart, u)?;
    match (backend, chart.analytic_second(u)) {
        (Backend::Auto, Some(d)) => Ok(d),
        _ => fd_second(chart, u, FdStep::Auto),
    }
}

fn check_params<C: Chart + ?Sized>(chart: &C, u: &[f64]) -> Result<()> {
    if u.len() != chart.param_dim() {
        return Err(GeometryError::Dimension(format!(
            "chart has {} parameters, got {}",
            chart.param_dim(),
            u.len()
        )));
    }
    Ok(())
}

pub fn tangent_frame<C: Chart + ?Sized>(chart: &C, u: &[f64], backend: Backend) -> Result<TangentFrame> {
    TangentFrame::new(first_derivatives(chart, u, backend)?)
}

#[derive(Debug, Clone)]
pub struct MeanCurvature {
    pub vector: DVector<f64>,
    pub norm: f64,
    /// max_ij ‖∂²_ij r‖, the curvature scale.
    pub second_scale: f64,
}

impl MeanCurvature {
    /// ‖H‖ / max_ij ‖∂²_ij r‖, zero for a chart with vanishing second derivatives.
    pub fn ratio(&self) -> f64 {
        if self.second_scale == 0.0 {
            0.0
        } else {
            self.norm / self.second_scale
        }
    }
}

/// Frame and second derivatives at one point.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub frame: TangentFrame,
    pub second: SecondDerivatives,
}

impl LocalGeometry {
    pub fn at<C: Chart + ?Sized>(chart: &C, u: &[f64], backend: Backend) -> Result<Self> {
        Ok(Self {
            frame: tangent_frame(chart, u, backend)?,
            second: second_derivatives(chart, u, backend)?,
        })
    }

    /// b(x, y) = Σ x_i y_j (∂²_ij r)^⊥ for tangent coordinates x, y.
    pub fn second_fundamental_form(&self, x: &[f64], y: &[f64]) -> Result<DVector<f64>> {
        let m = self.second.dim();
        if x.len() != m || y.len() != m {
            return Err(GeometryError::Dimension(format!(
                "tangent coordinates must have length {m}"
            )));
        }
        Ok(self.frame.normal_project(&self.second.contract(x, y)))
    }

    /// Matrix of ⟨b(∂_i, ∂_j), ℓ⟩ over the chart's tangent basis.
    pub fn sff_pairing(&self, ell: &DVector<f64>) -> DMatrix<f64> {
        let m = self.second.dim();
        let mut out = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let p = self.frame.normal_project(self.second.get(i, j)).dot(ell);
                out[(i, j)] = p;
                out[(j, i)] = p;
            }
        }
        out
    }

    pub fn mean_curvature(&self) -> MeanCurvature {
        let ginv = self.frame.gram().inverse();
        let m = self.second.dim();
        let n = self.frame.basis().first().map_or(0, |b| b.len());
        // trace first, project once: the normal projection is linear
        let mut traced = DVector::zeros(n);
        for i in 0..m {
            for j in 0..m {
                traced.axpy(ginv[(i, j)], self.second.get(i, j), 1.0);
            }
        }
        let vector = self.frame.normal_project(&traced);
        MeanCurvature {
            norm: vector.norm(),
            vector,
            second_scale: self.second.max_norm(),
        }
    }
}

pub fn second_fundamental_form<C: Chart + ?Sized>(
    chart: &C,
    u: &[f64],
    x: &[f64],
    y: &[f64],
    backend: Backend,
) -> Result<DVector<f64>> {
    LocalGeometry::at(chart, u, backend)?.second_fundamental_form(x, y)
}

pub fn mean_curvature<C: Chart + ?Sized>(chart: &C, u: &[f64], backend: Backend) -> Result<MeanCurvature> {
    Ok(LocalGeometry::at(chart, u, backend)?.mean_curvature())
}

/// Chart given by a closure, without analytic derivatives.
pub struct FnChart<F> {
    param_dim: usize,
    ambient_dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> FnChart<F> {
    pub fn new(param_dim: usize, ambient_dim: usize, f: F) -> Self {
        Self {
            param_dim,
            ambient_dim,
            f,
        }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> Chart for FnChart<F> {
    fn param_dim(&self) -> usize {
        self.param_dim
    }
    fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }
    fn value(&self, u: &[f64]) -> Result<DVector<f64>> {
        let v = (self.f)(u);
        if v.len() != self.ambient_dim {
            return Err(GeometryError::Dimension(format!(
                "chart returned {} coordinates, expected {}",
                v.len(),
                self.ambient_dim
            )));
        }
        Ok(DVector::from_vec(v))
    }
}

/// The chart u ↦ inner(A u + b). Analytic derivatives of the inner chart
/// are pulled back through the linear part.
pub struct AffineReparam<C> {
    inner: C,
    linear: DMatrix<f64>,
    offset: DVector<f64>,
}

impl<C: Chart> AffineReparam<C> {
    pub fn new(inner: C, linear: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let m = inner.param_dim();
        if linear.nrows() != m || linear.ncols() != m || offset.len() != m {
            return Err(GeometryError::Dimension(format!("affine map must be {m}x{m}")));
        }
        Ok(Self {
            inner,
            linear,
            offset,
        })
    }

    fn inner_point(&self, u: &[f64]) -> Vec<f64> {
        (&self.linear * DVector::from_column_slice(u) + &self.offset)
            .iter()
            .copied()
            .collect()
    }
}

impl<C: Chart> Chart for AffineReparam<C> {
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }
    fn value(&self, u: &[f64]) -> Result<DVector<f64>> {
        self.inner.value(&self.inner_point(u))
    }
    fn analytic_first(&self, u: &[f64]) -> Option<Vec<DVector<f64>>> {
        let d = self.inner.analytic_first(&self.inner_point(u))?;
        let m = d.len();
        Some(
            (0..m)
                .map(|i| {
                    let mut v = DVector::zeros(self.ambient_dim());
                    for (k, dk) in d.iter().enumerate() {
                        v.axpy(self.linear[(k, i)], dk, 1.0);
                    }
                    v
                })
                .collect(),
        )
    }
    fn analytic_second(&self, u: &[f64]) -> Option<SecondDerivatives> {
        let d2 = self.inner.analytic_second(&self.inner_point(u))?;
        let m = d2.dim();
        Some(SecondDerivatives::from_fn(m, |i, j| {
            let x: Vec<f64> = (0..m).map(|k| self.linear[(k, i)]).collect();
            let y: Vec<f64> = (0..m).map(|k| self.linear[(k, j)]).collect();
            d2.contract(&x, &y)
        }))
    }
}
