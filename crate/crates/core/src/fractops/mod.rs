//! Discrete fractional-calculus kernel.
//!
//! Provides the weight function ω_μ(t) = t^{μ-1}/Γ(μ), graded time meshes
//! t_n = T (n/N)^γ, product-integration fractional integrals I^μ that are
//! exact on piecewise-linear data, Riemann-Liouville derivatives
//! ∂_t^{1-α} = ∂_t I^α, Mittag-Leffler evaluation, and the shift identity
//! relating ∂_t^m I^μ to I^μ ∂_t^m plus initial-value terms.
//!
//! All operations are pure functions of immutable inputs and are bit-exact
//! deterministic for fixed inputs.

mod ml;
mod special;

pub use ml::mittag_leffler;
pub(crate) use ml::ml_eval;
pub(crate) use special::recip_gamma;

use crate::error::{Error, Result};
use std::sync::Arc;

/// ω_μ(t) = t^{μ-1}/Γ(μ), the Riemann-Liouville convolution kernel.
///
/// Returns exactly 0 when μ is a non-positive integer (Γ has a pole there),
/// for any t.
pub fn omega(mu: f64, t: f64) -> Result<f64> {
    if !mu.is_finite() || !t.is_finite() {
        return Err(Error::invalid("omega", format!("non-finite input mu={mu}, t={t}")));
    }
    if mu <= 0.0 && mu == mu.round() {
        return Ok(0.0);
    }
    if t <= 0.0 {
        return Err(Error::invalid("omega", format!("t = {t} must be positive")));
    }
    Ok(omega_unchecked(mu, t))
}

/// ω_μ(t) without input validation; t > 0 and μ not a non-positive integer.
pub(crate) fn omega_unchecked(mu: f64, t: f64) -> f64 {
    if mu <= 0.0 && mu == mu.round() {
        return 0.0;
    }
    t.powf(mu - 1.0) * recip_gamma(mu)
}

/// Time grid t_n = T (n/N)^γ, clustering nodes near t = 0 for γ > 1.
#[derive(Debug, Clone)]
pub struct GradedMesh {
    t_final: f64,
    n_steps: usize,
    grading: f64,
    nodes: Vec<f64>,
}

/// The standard grading γ = (2-α)/α that restores full accuracy of
/// piecewise-linear product integration under a t^α initial layer,
/// clamped to [1, 8].
pub fn default_grading(alpha: f64) -> f64 {
    ((2.0 - alpha) / alpha).clamp(1.0, 8.0)
}

impl GradedMesh {
    /// Builds the mesh; requires T > 0, N >= 1 and γ >= 1 (γ < 1 would
    /// coarsen toward t = 0 and defeat the initial layer).
    pub fn new(t_final: f64, n_steps: usize, grading: f64) -> Result<Arc<Self>> {
        if !t_final.is_finite() || t_final <= 0.0 {
            return Err(Error::invalid("GradedMesh", format!("T = {t_final} must be positive")));
        }
        if n_steps < 1 {
            return Err(Error::invalid("GradedMesh", "N must be >= 1"));
        }
        if !grading.is_finite() || grading < 1.0 {
            return Err(Error::invalid("GradedMesh", format!("gamma = {grading} must be >= 1")));
        }
        let nodes: Vec<f64> = (0..=n_steps)
            .map(|n| {
                if n == n_steps {
                    t_final
                } else {
                    t_final * (n as f64 / n_steps as f64).powf(grading)
                }
            })
            .collect();
        Ok(Arc::new(GradedMesh { t_final, n_steps, grading, nodes }))
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    /// Node values t_0 = 0, ..., t_N = T.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, n: usize) -> f64 {
        self.nodes[n]
    }

    /// Step h_n = t_n - t_{n-1} for n >= 1.
    pub fn step(&self, n: usize) -> f64 {
        self.nodes[n] - self.nodes[n - 1]
    }

    pub fn same_grid(&self, other: &GradedMesh) -> bool {
        self.n_steps == other.n_steps
            && self.t_final == other.t_final
            && self.grading == other.grading
    }
}

/// Values that a time series can carry: scalars or spatial coefficient
/// vectors.
pub trait LinearState: Clone {
    fn zero_like(&self) -> Self;
    /// self += a * x
    fn axpy(&mut self, a: f64, x: &Self);
    fn scale(&mut self, a: f64);
    fn is_finite(&self) -> bool;
}

impl LinearState for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
    fn scale(&mut self, a: f64) {
        *self *= a;
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl LinearState for nalgebra::DVector<f64> {
    fn zero_like(&self) -> Self {
        nalgebra::DVector::zeros(self.len())
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        self.axpy(a, x, 1.0);
    }
    fn scale(&mut self, a: f64) {
        *self *= a;
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

/// A time series of node values with piecewise-linear-in-time semantics.
///
/// `first_valid > 0` marks series (Riemann-Liouville derivatives, divided
/// differences) whose leading nodes are undefined because the underlying
/// quantity may be singular at t = 0.
#[derive(Debug, Clone)]
pub struct Series<T: LinearState> {
    pub mesh: Arc<GradedMesh>,
    values: Vec<T>,
    first_valid: usize,
}

pub type ScalarSeries = Series<f64>;
pub type VectorSeries = Series<nalgebra::DVector<f64>>;

impl<T: LinearState> Series<T> {
    pub fn new(mesh: Arc<GradedMesh>, values: Vec<T>) -> Result<Self> {
        Self::with_first_valid(mesh, values, 0)
    }

    pub fn with_first_valid(
        mesh: Arc<GradedMesh>,
        values: Vec<T>,
        first_valid: usize,
    ) -> Result<Self> {
        if values.len() != mesh.n_steps() + 1 {
            return Err(Error::ShapeMismatch {
                context: "Series",
                message: format!(
                    "expected {} node values, got {}",
                    mesh.n_steps() + 1,
                    values.len()
                ),
            });
        }
        if values.iter().skip(first_valid).any(|v| !v.is_finite()) {
            return Err(Error::invalid("Series", "non-finite node value"));
        }
        Ok(Series { mesh, values, first_valid })
    }

    /// Samples a function of time at the mesh nodes.
    pub fn sample(mesh: &Arc<GradedMesh>, f: impl Fn(f64) -> T) -> Result<Self> {
        let values: Vec<T> = mesh.nodes().iter().map(|&t| f(t)).collect();
        Self::new(Arc::clone(mesh), values)
    }

    /// First node index at which the series is defined.
    pub fn first_valid(&self) -> usize {
        self.first_valid
    }

    /// Node value, rejecting access to the undefined initial nodes.
    pub fn value(&self, n: usize) -> Result<&T> {
        if n < self.first_valid {
            return Err(Error::SingularAtOrigin { quantity: "series node value" });
        }
        Ok(&self.values[n])
    }

    /// All node values including any undefined prefix (prefix entries are
    /// zero placeholders); prefer [`Series::value`].
    pub fn raw_values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(&T) -> T) -> Self {
        Series {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().map(&f).collect(),
            first_valid: self.first_valid,
        }
    }

    pub(crate) fn check_same_mesh(&self, other: &Series<impl LinearState>, context: &'static str) -> Result<()> {
        if !self.mesh.same_grid(&other.mesh) {
            return Err(Error::ShapeMismatch { context, message: "series on different meshes".into() });
        }
        Ok(())
    }
}

/// Product-integration weights for I^μ on a fixed mesh: row n holds
/// weights w_{n,0..=n} with I^μ v(t_n) = Σ_j w_{n,j} v_j, exact whenever
/// the underlying v is affine in t on every cell.
#[derive(Debug, Clone)]
pub struct FracWeights {
    mu: f64,
    mesh: Arc<GradedMesh>,
    rows: Vec<Vec<f64>>,
}

impl FracWeights {
    /// Requires μ > 0 (use [`rl_derivative`] for differentiation).
    pub fn new(mu: f64, mesh: &Arc<GradedMesh>) -> Result<Self> {
        if !mu.is_finite() || mu <= 0.0 {
            return Err(Error::invalid("FracWeights", format!("mu = {mu} must be positive")));
        }
        let n_steps = mesh.n_steps();
        let t = mesh.nodes();
        let rg1 = recip_gamma(mu + 1.0); // 1/Gamma(mu+1)
        // int sigma^mu dsigma / Gamma(mu) = sigma^{mu+1} mu/((mu+1) Gamma(mu+1))
        let c2 = mu / (mu + 1.0) * rg1;
        let mut rows = Vec::with_capacity(n_steps + 1);
        rows.push(vec![0.0]);
        for n in 1..=n_steps {
            let tn = t[n];
            let mut w = vec![0.0; n + 1];
            for j in 1..=n {
                let ta = tn - t[j - 1];
                let tb = tn - t[j];
                let h = t[j] - t[j - 1];
                let d1 = (ta.powf(mu) - tb.powf(mu)) * rg1;
                let d2 = (ta.powf(mu + 1.0) - tb.powf(mu + 1.0)) * c2;
                w[j - 1] += (d2 - tb * d1) / h;
                w[j] += (ta * d1 - d2) / h;
            }
            rows.push(w);
        }
        Ok(FracWeights { mu, mesh: Arc::clone(mesh), rows })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn mesh(&self) -> &Arc<GradedMesh> {
        &self.mesh
    }

    /// Weight row for target node n.
    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    /// Applies the weights to raw node values, producing I^μ at every node.
    pub fn apply_values<T: LinearState>(&self, values: &[T]) -> Vec<T> {
        let mut out = Vec::with_capacity(values.len());
        for n in 0..values.len() {
            let mut acc = values[0].zero_like();
            for (j, w) in self.rows[n].iter().enumerate() {
                if *w != 0.0 {
                    acc.axpy(*w, &values[j]);
                }
            }
            out.push(acc);
        }
        out
    }

    /// I^μ at a single target node from raw values.
    pub fn apply_at<T: LinearState>(&self, values: &[T], n: usize) -> T {
        let mut acc = values[0].zero_like();
        for (j, w) in self.rows[n].iter().enumerate() {
            acc.axpy(*w, &values[j]);
        }
        acc
    }
}

/// I^μ of a series by product integration; the output vanishes at t_0.
pub fn frac_integral<T: LinearState>(mu: f64, series: &Series<T>) -> Result<Series<T>> {
    let weights = FracWeights::new(mu, &series.mesh)?;
    frac_integral_with(&weights, series)
}

/// I^μ reusing precomputed weights (the weights fix both μ and the mesh).
pub fn frac_integral_with<T: LinearState>(
    weights: &FracWeights,
    series: &Series<T>,
) -> Result<Series<T>> {
    if !weights.mesh.same_grid(&series.mesh) {
        return Err(Error::ShapeMismatch {
            context: "frac_integral",
            message: "weights were built on a different mesh".into(),
        });
    }
    if series.first_valid != 0 {
        return Err(Error::invalid(
            "frac_integral",
            "series is undefined at the origin; fractional integration needs full node data",
        ));
    }
    let values = weights.apply_values(&series.values);
    Series::new(Arc::clone(&series.mesh), values)
}

/// Riemann-Liouville derivative ∂_t^{1-α} v = ∂_t I^α v, discretized as the
/// backward difference quotient of the product-integrated I^α v.
///
/// Node 0 is undefined (the RL derivative of e.g. a constant behaves like
/// t^{α-1} at the origin); the result carries `first_valid = 1`.
pub fn rl_derivative<T: LinearState>(alpha: f64, series: &Series<T>) -> Result<Series<T>> {
    if !(0.0..1.0).contains(&alpha) || alpha == 0.0 {
        return Err(Error::invalid("rl_derivative", format!("alpha = {alpha} must lie in (0,1)")));
    }
    if series.mesh.n_steps() < 2 {
        return Err(Error::invalid("rl_derivative", "need at least N = 2 time steps"));
    }
    let ia = frac_integral(alpha, series)?;
    let mut values = Vec::with_capacity(series.len());
    values.push(series.values[0].zero_like());
    for n in 1..series.len() {
        let h = series.mesh.step(n);
        let mut v = ia.values[n].clone();
        v.axpy(-1.0, &ia.values[n - 1]);
        v.scale(1.0 / h);
        values.push(v);
    }
    Series::with_first_valid(Arc::clone(&series.mesh), values, 1)
}

/// Finite-difference weights on arbitrary nodes (Fornberg's algorithm):
/// returns c with f^{(order)}(x0) ≈ Σ_i c_i f(nodes_i), exact for
/// polynomials of degree < nodes.len().
pub fn fd_weights(nodes: &[f64], x0: f64, order: usize) -> Vec<f64> {
    let n = nodes.len();
    assert!(n > order, "need at least order+1 nodes");
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// m-th time derivative of a series by divided differences on a stencil of
/// m+2 adjacent nodes (exact on polynomials of degree m+1). Node 0 is left
/// undefined.
pub fn derivative_series<T: LinearState>(series: &Series<T>, m: usize) -> Result<Series<T>> {
    if m == 0 {
        return Ok(series.clone());
    }
    let n_steps = series.mesh.n_steps();
    if n_steps < 8 * m {
        return Err(Error::invalid(
            "derivative_series",
            format!("N = {n_steps} too small for order-{m} divided differences (need N >= {})", 8 * m),
        ));
    }
    if series.first_valid != 0 {
        return Err(Error::invalid("derivative_series", "input series undefined at the origin"));
    }
    let t = series.mesh.nodes();
    let width = m + 2;
    let mut values = Vec::with_capacity(series.len());
    values.push(series.values[0].zero_like());
    for n in 1..series.len() {
        let lo = n
            .saturating_sub((width - 1) / 2)
            .min(series.len() - width);
        let w = fd_weights(&t[lo..lo + width], t[n], m);
        let mut acc = series.values[0].zero_like();
        for (k, wk) in w.iter().enumerate() {
            acc.axpy(*wk, &series.values[lo + k]);
        }
        values.push(acc);
    }
    Series::with_first_valid(Arc::clone(&series.mesh), values, 1)
}

/// Like [`derivative_series`] but also fills node 0 by an off-centered
/// stencil; only meaningful for series sampled from functions smooth at 0.
pub(crate) fn derivative_series_smooth<T: LinearState>(
    series: &Series<T>,
    m: usize,
) -> Result<Series<T>> {
    if m == 0 {
        return Ok(series.clone());
    }
    let mut d = derivative_series(series, m)?;
    let t = series.mesh.nodes();
    let width = m + 2;
    let w = fd_weights(&t[0..width], t[0], m);
    let mut acc = series.values[0].zero_like();
    for (k, wk) in w.iter().enumerate() {
        acc.axpy(*wk, &series.values[k]);
    }
    d.values[0] = acc;
    d.first_valid = 0;
    Series::with_first_valid(Arc::clone(&series.mesh), d.values, 0)
}

/// Right-hand side of the Riemann-Liouville / Caputo shift identity
///
///   ∂_t^m I^μ φ = I^μ ∂_t^m φ + Σ_{j=0}^{m-1} φ^{(j)}(0) ω_{μ-m+1+j},
///
/// assembled from discrete pieces: ∂_t^m φ by divided differences and I^μ by
/// product integration. `initial_derivatives[j]` supplies φ^{(j)}(0) for
/// 0 <= j <= m-1. The output is undefined at node 0 whenever a singular ω
/// term is present, so it carries `first_valid = 1`.
pub fn fi_omega_shift(
    m: usize,
    mu: f64,
    series: &ScalarSeries,
    initial_derivatives: &[f64],
) -> Result<ScalarSeries> {
    if m < 1 {
        return Err(Error::invalid("fi_omega_shift", "m must be >= 1"));
    }
    if initial_derivatives.len() != m {
        return Err(Error::ShapeMismatch {
            context: "fi_omega_shift",
            message: format!("need {m} initial derivatives, got {}", initial_derivatives.len()),
        });
    }
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::invalid("fi_omega_shift", format!("mu = {mu} must be >= 0")));
    }
    let dm = derivative_series_smooth(series, m)?;
    let base = if mu == 0.0 { dm } else { frac_integral(mu, &dm)? };
    let t = series.mesh.nodes();
    let mut values = vec![0.0; series.len()];
    for n in 1..series.len() {
        let mut v = base.values[n];
        for (j, &phi_j0) in initial_derivatives.iter().enumerate() {
            let nu = mu - m as f64 + 1.0 + j as f64;
            v += phi_j0 * omega_unchecked(nu, t[n]);
        }
        values[n] = v;
    }
    Series::with_first_valid(Arc::clone(&series.mesh), values, 1)
}
