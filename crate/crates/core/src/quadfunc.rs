//! Quadratic functionals and inequality checkers.
//!
//! Q₁^μ(φ,t) = ∫₀ᵗ ⟨φ, I^μφ⟩ ds and Q₂^μ(φ,t) = ∫₀ᵗ ‖I^μφ‖² ds drive all of
//! the energy arguments; this module evaluates them with the same
//! piecewise-linear product-integration semantics as the fractional kernels,
//! together with the generalized functionals Q^{μ,j} of (M^jφ)^{(j)}, the
//! memory operators B^μ_ψφ = ψ·I^μφ - I¹(ψ'·I^μφ), numeric checkers for the
//! coercivity inequalities, and the fractional Gronwall bound
//! q ≤ a·E_β(b·t^β).

use crate::error::{Error, Result};
use crate::femcore::TriDiag;
use crate::fractops::{
    derivative_series, derivative_series_smooth, frac_integral, mittag_leffler, LinearState,
    ScalarSeries, Series,
};
use crate::identities::diff_mult_coeffs;
use nalgebra::DVector;
use rand::Rng;
use std::sync::Arc;

/// Inner product under which the functionals are taken: plain products for
/// scalar series, or ⟨u, v⟩ = uᵀ M v with a symmetric positive-definite
/// matrix (mass matrix for L₂, unit-κ stiffness for the gradient norm).
pub enum InnerProductContext {
    Scalar,
    Matrix(TriDiag),
}

/// States that can be paired under an [`InnerProductContext`].
pub trait InnerState: LinearState {
    fn inner(ctx: &InnerProductContext, a: &Self, b: &Self) -> Result<f64>;
}

impl InnerState for f64 {
    fn inner(ctx: &InnerProductContext, a: &Self, b: &Self) -> Result<f64> {
        match ctx {
            InnerProductContext::Scalar => Ok(a * b),
            InnerProductContext::Matrix(_) => Err(Error::ShapeMismatch {
                context: "inner product",
                message: "matrix context on a scalar series".into(),
            }),
        }
    }
}

impl InnerState for DVector<f64> {
    fn inner(ctx: &InnerProductContext, a: &Self, b: &Self) -> Result<f64> {
        match ctx {
            InnerProductContext::Scalar => Ok(a.dot(b)),
            InnerProductContext::Matrix(m) => {
                if m.n() != a.len() || a.len() != b.len() {
                    return Err(Error::ShapeMismatch {
                        context: "inner product",
                        message: "matrix/vector dimension mismatch".into(),
                    });
                }
                Ok(a.dot(&m.matvec(b)))
            }
        }
    }
}

/// Cumulative trapezoid ∫₀^{t_n}, exact for the piecewise-linear interpolant.
pub(crate) fn cumulative_integral<T: LinearState>(s: &Series<T>) -> Series<T> {
    let t = s.mesh.nodes();
    let vals = s.raw_values();
    let mut out = Vec::with_capacity(vals.len());
    out.push(vals[0].zero_like());
    for n in 1..vals.len() {
        let h = t[n] - t[n - 1];
        let mut v = out[n - 1].clone();
        v.axpy(0.5 * h, &vals[n - 1]);
        v.axpy(0.5 * h, &vals[n]);
        out.push(v);
    }
    Series::new(Arc::clone(&s.mesh), out).expect("cumulative integral shape")
}

fn frac_or_identity<T: LinearState>(mu: f64, s: &Series<T>) -> Result<Series<T>> {
    if mu == 0.0 {
        Ok(s.clone())
    } else {
        frac_integral(mu, s)
    }
}

/// Cumulative node series of Q₁^μ(φ, ·) (and Q₂ via [`q2_series`]).
///
/// Evaluated exactly for the piecewise-linear interpolant: the double
/// integral ∫₀ᵗ⟨φ(s), ∫₀ˢ ω_μ(s-σ)φ(σ)dσ⟩ds is assembled from closed-form
/// cell-pair weights, so the positivity of the continuous functional
/// survives discretization to round-off. The μ = 0 limit degenerates to the
/// exact ∫‖φ‖² of the interpolant.
pub fn q1_series<T: InnerState>(
    mu: f64,
    phi: &Series<T>,
    ctx: &InnerProductContext,
) -> Result<ScalarSeries> {
    q_cross_series(mu, phi, phi, ctx)
}

/// Exact cumulative bilinear functional ∫₀ᵗ ⟨φ(s), (I^μ ψ)(s)⟩ ds of two
/// piecewise-linear series; the diagonal case ψ = φ is Q₁^μ.
pub fn q_cross_series<T: InnerState>(
    mu: f64,
    phi: &Series<T>,
    psi: &Series<T>,
    ctx: &InnerProductContext,
) -> Result<ScalarSeries> {
    check_mu_q(mu)?;
    phi.check_same_mesh(psi, "q_cross_series")?;
    if phi.first_valid() != 0 || psi.first_valid() != 0 {
        return Err(Error::invalid("q1", "series undefined at the origin"));
    }
    let t = phi.mesh.nodes();
    let v = phi.raw_values();
    let w = psi.raw_values();
    let n_steps = phi.mesh.n_steps();
    let rg1 = crate::fractops::recip_gamma(mu + 1.0);
    let rg2 = crate::fractops::recip_gamma(mu + 2.0);
    // pure-power antiderivative helpers over cell i for the cross terms:
    //   l0(nu, c) = int lambda_{i-1}(s) (s-c)^nu ds,
    //   l1(nu, c) = int lambda_i(s) (s-c)^nu ds
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(0.0);
    let mut acc = 0.0f64;
    for i in 1..=n_steps {
        let (ta, tb, hi) = (t[i - 1], t[i], t[i] - t[i - 1]);
        let f_pow = |nu: f64, c: f64| -> f64 {
            ((tb - c).powf(nu + 1.0) - (ta - c).powf(nu + 1.0)) / (nu + 1.0)
        };
        let g_pow = |nu: f64, c: f64| -> f64 {
            ((tb - c).powf(nu + 2.0) - (ta - c).powf(nu + 2.0)) / (nu + 2.0) + c * f_pow(nu, c)
        };
        let l0 = |nu: f64, c: f64| (tb * f_pow(nu, c) - g_pow(nu, c)) / hi;
        let l1 = |nu: f64, c: f64| (g_pow(nu, c) - ta * f_pow(nu, c)) / hi;
        // cross contributions from earlier cells j < i:
        // the cell-j part of I^mu psi(s) is psi_{j-1} A_j(s) + psi_j B_j(s)
        // with A_j = p ta^mu + q (tb^{mu+1} - ta^{mu+1}),
        //      B_j = q (ta^{mu+1} - tb^{mu+1}) - p tb^mu,
        // ta = s - t_{j-1}, tb = s - t_j, p = 1/Gamma(mu+1),
        // q = 1/(h_j (mu+1) Gamma(mu+1)).
        for j in 1..i {
            let (c0, c1) = (t[j - 1], t[j]);
            let hj = c1 - c0;
            let p = rg1;
            let q = rg1 / (hj * (mu + 1.0));
            let l0_mu_c0 = l0(mu, c0);
            let l0_mu_c1 = l0(mu, c1);
            let l1_mu_c0 = l1(mu, c0);
            let l1_mu_c1 = l1(mu, c1);
            let l0_d = l0(mu + 1.0, c1) - l0(mu + 1.0, c0);
            let l1_d = l1(mu + 1.0, c1) - l1(mu + 1.0, c0);
            let w_0a = p * l0_mu_c0 + q * l0_d;
            let w_0b = -q * l0_d - p * l0_mu_c1;
            let w_1a = p * l1_mu_c0 + q * l1_d;
            let w_1b = -q * l1_d - p * l1_mu_c1;
            acc += w_0a * T::inner(ctx, &v[i - 1], &w[j - 1])?
                + w_0b * T::inner(ctx, &v[i - 1], &w[j])?
                + w_1a * T::inner(ctx, &v[i], &w[j - 1])?
                + w_1b * T::inner(ctx, &v[i], &w[j])?;
        }
        // diagonal cell: phi(s) = a + b x, psi(sigma) = c + d y with
        // x = s - t_{i-1}; the local memory of psi is
        // c x^mu/Gamma(mu+1) + d x^{mu+1}/Gamma(mu+2)
        let slope_of = |vals: &[T]| {
            let mut s = vals[i].clone();
            s.axpy(-1.0, &vals[i - 1]);
            s.scale(1.0 / hi);
            s
        };
        let b_slope = slope_of(v);
        let d_slope = slope_of(w);
        let ac = T::inner(ctx, &v[i - 1], &w[i - 1])?;
        let ad = T::inner(ctx, &v[i - 1], &d_slope)?;
        let bc = T::inner(ctx, &b_slope, &w[i - 1])?;
        let bd = T::inner(ctx, &b_slope, &d_slope)?;
        acc += ac * hi.powf(mu + 1.0) * rg1 / (mu + 1.0)
            + (ad * rg2 + bc * rg1) * hi.powf(mu + 2.0) / (mu + 2.0)
            + bd * hi.powf(mu + 3.0) * rg2 / (mu + 3.0);
        out.push(acc);
    }
    ScalarSeries::new(Arc::clone(&phi.mesh), out)
}

/// Cumulative node series of Q₂^μ(φ, ·). The μ = 0 case coincides with Q₁
/// exactly; μ > 0 integrates the nodal values of ‖I^μφ‖² with the trapezoid
/// rule (quadrature-tolerance semantics).
pub fn q2_series<T: InnerState>(
    mu: f64,
    phi: &Series<T>,
    ctx: &InnerProductContext,
) -> Result<ScalarSeries> {
    check_mu_q(mu)?;
    if mu == 0.0 {
        return q1_series(0.0, phi, ctx);
    }
    let iv = frac_integral(mu, phi)?;
    let vals: Result<Vec<f64>> =
        iv.raw_values().iter().map(|v| T::inner(ctx, v, v)).collect();
    let integrand = ScalarSeries::new(Arc::clone(&phi.mesh), vals?)?;
    Ok(cumulative_integral(&integrand))
}

fn check_mu_q(mu: f64) -> Result<()> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::invalid("quadratic functional", format!("mu = {mu} must be >= 0")));
    }
    Ok(())
}

/// Q₁^μ(φ, t_n); at μ = 0 it coincides with Q₂ and is written Q⁰.
pub fn q1<T: InnerState>(
    mu: f64,
    phi: &Series<T>,
    t_index: usize,
    ctx: &InnerProductContext,
) -> Result<f64> {
    let s = q1_series(mu, phi, ctx)?;
    Ok(*s.value(checked_index(phi, t_index)?)?)
}

/// Q₂^μ(φ, t_n).
pub fn q2<T: InnerState>(
    mu: f64,
    phi: &Series<T>,
    t_index: usize,
    ctx: &InnerProductContext,
) -> Result<f64> {
    let s = q2_series(mu, phi, ctx)?;
    Ok(*s.value(checked_index(phi, t_index)?)?)
}

fn checked_index<T: LinearState>(phi: &Series<T>, t_index: usize) -> Result<usize> {
    if t_index >= phi.len() {
        return Err(Error::invalid("quadratic functional", format!("t_index {t_index} out of range")));
    }
    Ok(t_index)
}

/// (M^j φ)^{(j)} assembled through the expansion
/// ∂_t^j M^j = Σ_i ã^{j,j}_i M^i ∂_t^i with divided differences for the
/// plain derivatives; node 0 carries the exact limit j!·φ(0).
pub fn m_pow_deriv<T: LinearState>(phi: &Series<T>, j: usize) -> Result<Series<T>> {
    if j == 0 {
        return Ok(phi.clone());
    }
    let (a, _) = diff_mult_coeffs(j, j)?;
    let tilde = {
        let mut v = a.coeffs.clone();
        v.reverse();
        v
    };
    let t = phi.mesh.nodes();
    let mut out: Vec<T> = vec![phi.raw_values()[0].zero_like(); phi.len()];
    for (i, coeff) in tilde.iter().enumerate() {
        let c = coeff.eval(0.0);
        if c == 0.0 {
            continue;
        }
        if i == 0 {
            // t^0 phi^{(0)}: contributes at every node including 0
            for (n, v) in out.iter_mut().enumerate() {
                v.axpy(c, &phi.raw_values()[n]);
            }
        } else {
            let di = derivative_series(phi, i)?;
            for n in 1..phi.len() {
                let w = c * t[n].powi(i as i32);
                out[n].axpy(w, &di.raw_values()[n]);
            }
        }
    }
    Series::new(Arc::clone(&phi.mesh), out)
}

/// Which of the two quadratic operators to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QKind {
    Q1,
    Q2,
}

/// Generalized functional Q^{μ,j}_i(φ, t) = Q^μ_i((M^jφ)^{(j)}, t).
pub fn q_mj<T: InnerState>(
    mu: f64,
    j: usize,
    phi: &Series<T>,
    t_index: usize,
    ctx: &InnerProductContext,
    kind: QKind,
) -> Result<f64> {
    let transformed = m_pow_deriv(phi, j)?;
    match kind {
        QKind::Q1 => q1(mu, &transformed, t_index, ctx),
        QKind::Q2 => q2(mu, &transformed, t_index, ctx),
    }
}

/// A time multiplier ψ together with its time derivative, as needed by the
/// integrated-by-parts memory operators.
pub struct Multiplier {
    pub values: ScalarSeries,
    pub derivative: ScalarSeries,
}

impl Multiplier {
    /// Analytic ψ and ψ'.
    pub fn from_fns(
        mesh: &Arc<crate::fractops::GradedMesh>,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        Ok(Multiplier {
            values: ScalarSeries::sample(mesh, f)?,
            derivative: ScalarSeries::sample(mesh, df)?,
        })
    }

    /// ψ' by divided differences of sampled values (ψ assumed smooth).
    pub fn from_series(values: ScalarSeries) -> Result<Self> {
        let derivative = derivative_series_smooth(&values, 1)?;
        Ok(Multiplier { values, derivative })
    }
}

/// Memory operator B^μ_ψφ = ψ·I^μφ - I¹(ψ'·I^μφ) for 0 < μ <= 1, the
/// integrated-by-parts form that never evaluates ∂_t^{1-μ}φ directly.
pub fn b_op<T: LinearState>(mu: f64, psi: &Multiplier, phi: &Series<T>) -> Result<Series<T>> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::invalid("b_op", format!("mu = {mu} must lie in (0, 1]")));
    }
    phi.check_same_mesh(&psi.values, "b_op")?;
    let iv = frac_integral(mu, phi)?;
    let mut direct: Vec<T> = Vec::with_capacity(phi.len());
    let mut inner: Vec<T> = Vec::with_capacity(phi.len());
    for n in 0..phi.len() {
        let mut d = iv.raw_values()[n].clone();
        d.scale(*psi.values.value(n)?);
        direct.push(d);
        let mut w = iv.raw_values()[n].clone();
        w.scale(*psi.derivative.value(n)?);
        inner.push(w);
    }
    let inner_series = Series::new(Arc::clone(&phi.mesh), inner)?;
    let correction = cumulative_integral(&inner_series);
    let out: Vec<T> = direct
        .into_iter()
        .zip(correction.raw_values())
        .map(|(mut d, c)| {
            d.axpy(-1.0, c);
            d
        })
        .collect();
    Series::new(Arc::clone(&phi.mesh), out)
}

/// Generalized operator B^{μ,j}_ψφ = (M^j B^μ_ψφ)^{(j)}; j = 0 reduces to
/// [`b_op`].
pub fn b_op_mj<T: LinearState>(
    mu: f64,
    j: usize,
    psi: &Multiplier,
    phi: &Series<T>,
) -> Result<Series<T>> {
    let base = b_op(mu, psi, phi)?;
    m_pow_deriv(&base, j)
}

/// Outcome of a numeric inequality check. For the lemmas with unquantified
/// constants (3.1, A.2, A.3) the report carries the lhs/rhs ratio and the
/// acceptance harness asserts uniform boundedness across refinement.
#[derive(Debug, Clone)]
pub struct IneqReport {
    pub check_id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub ratio: Option<f64>,
    pub params: Vec<(&'static str, f64)>,
}

impl IneqReport {
    fn new(check_id: &str, lhs: f64, rhs: f64, params: Vec<(&'static str, f64)>) -> Self {
        IneqReport { check_id: check_id.into(), lhs, rhs, margin: rhs - lhs, ratio: None, params }
    }

    fn with_ratio(mut self) -> Self {
        self.ratio = Some(if self.rhs == 0.0 { 0.0 } else { self.lhs / self.rhs });
        self
    }

    /// A violation at the exact-hypothesis tolerance: 1e-8 relative with a
    /// round-off floor (equality cases accumulate ~1e-13 absolute noise).
    pub fn violated(&self) -> bool {
        self.margin < -(1e-8 * self.rhs.abs().max(self.lhs.abs()) + 1e-12)
    }
}

fn check_alpha_open(alpha: f64, ctx: &'static str) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(ctx, format!("alpha = {alpha} must lie in (0,1)")));
    }
    Ok(())
}

/// |∫₀ᵗ⟨φ, I^αψ⟩ds| <= Q₁^α(φ,t)/(4ε(1-α)²) + ε Q₁^α(ψ,t).
pub fn check_lemma22a<T: InnerState>(
    alpha: f64,
    eps: f64,
    phi: &Series<T>,
    psi: &Series<T>,
    t_index: usize,
    ctx: &InnerProductContext,
) -> Result<IneqReport> {
    check_alpha_open(alpha, "lemma 2.2(A)")?;
    if eps <= 0.0 {
        return Err(Error::invalid("lemma 2.2(A)", "epsilon must be positive"));
    }
    phi.check_same_mesh(psi, "lemma 2.2(A)")?;
    let cross = q_cross_series(alpha, phi, psi, ctx)?;
    let lhs = cross.value(t_index)?.abs();
    let q1phi = q1(alpha, phi, t_index, ctx)?;
    let q1psi = q1(alpha, psi, t_index, ctx)?;
    let rhs = q1phi / (4.0 * eps * (1.0 - alpha) * (1.0 - alpha)) + eps * q1psi;
    Ok(IneqReport::new("2.2-A", lhs, rhs, vec![("alpha", alpha), ("eps", eps)]))
}

/// Q₂^α(φ,t) <= 2t^α/(1-α) · Q₁^α(φ,t).
pub fn check_lemma22b<T: InnerState>(
    alpha: f64,
    phi: &Series<T>,
    t_index: usize,
    ctx: &InnerProductContext,
) -> Result<IneqReport> {
    check_alpha_open(alpha, "lemma 2.2(B)")?;
    let t = phi.mesh.node(checked_index(phi, t_index)?);
    let lhs = q2(alpha, phi, t_index, ctx)?;
    let rhs = 2.0 * t.powf(alpha) / (1.0 - alpha) * q1(alpha, phi, t_index, ctx)?;
    Ok(IneqReport::new("2.2-B", lhs, rhs, vec![("alpha", alpha), ("t", t)]))
}

/// Q₁^α(φ,t) <= 2t^α Q⁰(φ,t).
pub fn check_lemma22c<T: InnerState>(
    alpha: f64,
    phi: &Series<T>,
    t_index: usize,
    ctx: &InnerProductContext,
) -> Result<IneqReport> {
    check_alpha_open(alpha, "lemma 2.2(C)")?;
    let t = phi.mesh.node(checked_index(phi, t_index)?);
    let lhs = q1(alpha, phi, t_index, ctx)?;
    let rhs = 2.0 * t.powf(alpha) * q1(0.0, phi, t_index, ctx)?;
    Ok(IneqReport::new("2.2-C", lhs, rhs, vec![("alpha", alpha), ("t", t)]))
}

/// Q₂^α(φ,t) <= 2 ∫₀ᵗ ω_α(t-s) Q₁^α(φ,s) ds, for 0 < α <= 1.
pub fn check_lemma23i<T: InnerState>(
    alpha: f64,
    phi: &Series<T>,
    t_index: usize,
    ctx: &InnerProductContext,
) -> Result<IneqReport> {
    check_alpha_closed(alpha, "lemma 2.3(i)")?;
    let lhs = q2(alpha, phi, t_index, ctx)?;
    let q1s = q1_series(alpha, phi, ctx)?;
    let conv = frac_integral(alpha, &q1s)?;
    let rhs = 2.0 * *conv.value(t_index)?;
    Ok(IneqReport::new("2.3-i", lhs, rhs, vec![("alpha", alpha)]))
}

/// I^{1-α}(‖I^αφ‖²)(t) <= 2 Q₁^α(φ,t).
pub fn check_lemma23ii<T: InnerState>(
    alpha: f64,
    phi: &Series<T>,
    t_index: usize,
    ctx: &InnerProductContext,
) -> Result<IneqReport> {
    check_alpha_closed(alpha, "lemma 2.3(ii)")?;
    let iv = frac_integral(alpha, phi)?;
    let sq: Result<Vec<f64>> = iv.raw_values().iter().map(|v| T::inner(ctx, v, v)).collect();
    let sq_series = ScalarSeries::new(Arc::clone(&phi.mesh), sq?)?;
    let smoothed = frac_or_identity(1.0 - alpha, &sq_series)?;
    let lhs = *smoothed.value(t_index)?;
    let rhs = 2.0 * q1(alpha, phi, t_index, ctx)?;
    Ok(IneqReport::new("2.3-ii", lhs, rhs, vec![("alpha", alpha)]))
}

/// ‖φ(t)‖² <= 2 ω_{2-α}(t) Q₁^α(φ',t) for φ = I¹φ' (so φ(0) = 0 and
/// I^αφ'(0) = 0 hold by construction).
pub fn check_lemma23iii<T: InnerState>(
    alpha: f64,
    phi_prime: &Series<T>,
    t_index: usize,
    ctx: &InnerProductContext,
) -> Result<IneqReport> {
    check_alpha_closed(alpha, "lemma 2.3(iii)")?;
    let idx = checked_index(phi_prime, t_index)?;
    if idx == 0 {
        return Err(Error::invalid("lemma 2.3(iii)", "t must be positive"));
    }
    let phi = cumulative_integral(phi_prime);
    let t = phi.mesh.node(idx);
    let pt = phi.value(idx)?;
    let lhs = T::inner(ctx, pt, pt)?;
    let rhs =
        2.0 * crate::fractops::omega(2.0 - alpha, t)? * q1(alpha, phi_prime, idx, ctx)?;
    Ok(IneqReport::new("2.3-iii", lhs, rhs, vec![("alpha", alpha), ("t", t)]))
}

fn check_alpha_closed(alpha: f64, ctx: &'static str) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(ctx, format!("alpha = {alpha} must lie in (0,1]")));
    }
    Ok(())
}

/// Q₂^ν(φ,t) <= 2 t^{2(ν-μ)} Q₂^μ(φ,t) for 0 <= μ <= ν <= 1.
pub fn check_lemma24<T: InnerState>(
    mu: f64,
    nu: f64,
    phi: &Series<T>,
    t_index: usize,
    ctx: &InnerProductContext,
) -> Result<IneqReport> {
    if !(0.0 <= mu && mu <= nu && nu <= 1.0) {
        return Err(Error::invalid("lemma 2.4", format!("need 0 <= mu <= nu <= 1, got mu={mu}, nu={nu}")));
    }
    let t = phi.mesh.node(checked_index(phi, t_index)?);
    let lhs = q2(nu, phi, t_index, ctx)?;
    let rhs = 2.0 * t.powf(2.0 * (nu - mu)) * q2(mu, phi, t_index, ctx)?;
    Ok(IneqReport::new("2.4", lhs, rhs, vec![("mu", mu), ("nu", nu), ("t", t)]))
}

/// Lemma A.2 as a ratio: Q^{0,m}(B^μ_ψφ, t) against Σ_{j<=m} Q₂^{μ,j}(φ, t).
pub fn check_lemma_a2<T: InnerState>(
    mu: f64,
    m: usize,
    psi: &Multiplier,
    phi: &Series<T>,
    t_index: usize,
    ctx: &InnerProductContext,
) -> Result<IneqReport> {
    let b = b_op(mu, psi, phi)?;
    let lhs = q_mj(0.0, m, &b, t_index, ctx, QKind::Q1)?;
    let mut rhs = 0.0;
    for j in 0..=m {
        rhs += q_mj(mu, j, phi, t_index, ctx, QKind::Q2)?;
    }
    Ok(IneqReport::new("A.2", lhs, rhs, vec![("mu", mu), ("m", m as f64)]).with_ratio())
}

/// Lemma A.3 as a ratio: max over tail nodes of
/// t^{m+1}‖∂_t^m I^μ(ψφ)(t)‖ against max_s Σ_j ‖s^{μ+1+j} φ^{(j)}(s)‖.
pub fn check_lemma_a3<T: InnerState>(
    mu: f64,
    m: usize,
    psi: &ScalarSeries,
    phi: &Series<T>,
    ctx: &InnerProductContext,
) -> Result<IneqReport> {
    if mu <= 0.0 {
        return Err(Error::invalid("lemma A.3", "mu must be positive"));
    }
    phi.check_same_mesh(psi, "lemma A.3")?;
    let t = phi.mesh.nodes();
    let prod: Vec<T> = phi
        .raw_values()
        .iter()
        .zip(psi.raw_values())
        .map(|(p, &s)| {
            let mut v = p.clone();
            v.scale(s);
            v
        })
        .collect();
    let prod_series = Series::new(Arc::clone(&phi.mesh), prod)?;
    let iv = frac_integral(mu, &prod_series)?;
    let dm = if m == 0 { iv } else { derivative_series(&iv, m)? };
    // driver: running max of sum_j ||s^{mu+1+j} phi^{(j)}(s)||
    let mut deriv_norms: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    for j in 0..=m {
        let dj = derivative_series_smooth(phi, j)?;
        let norms: Result<Vec<f64>> =
            dj.raw_values().iter().map(|v| Ok(T::inner(ctx, v, v)?.sqrt())).collect();
        deriv_norms.push(norms?);
    }
    let mut running = 0.0f64;
    let mut lhs_max = 0.0f64;
    let mut rhs_at_lhs_max = 1.0f64;
    for n in 1..phi.len() {
        let mut driver = 0.0;
        for (j, norms) in deriv_norms.iter().enumerate() {
            driver += t[n].powf(mu + 1.0 + j as f64) * norms[n];
        }
        running = running.max(driver);
        // skip the first decade of nodes where divided differences of I^mu
        // are still settling
        if n < phi.len() / 8 {
            continue;
        }
        let dn = T::inner(ctx, dm.value(n)?, dm.value(n)?)?.sqrt();
        let lhs = t[n].powi(m as i32 + 1) * dn;
        if lhs > lhs_max {
            lhs_max = lhs;
            rhs_at_lhs_max = running.max(1e-300);
        }
    }
    Ok(IneqReport::new("A.3", lhs_max, rhs_at_lhs_max, vec![("mu", mu), ("m", m as f64)])
        .with_ratio())
}

/// Inputs for the two stability estimates bounding solution functionals by
/// data functionals.
pub struct StabilityInputs<'a> {
    pub u: &'a Series<DVector<f64>>,
    pub f: &'a Series<DVector<f64>>,
    pub alpha: f64,
    pub m: usize,
    /// L₂ pairing (mass matrix)
    pub l2: &'a InnerProductContext,
    /// gradient pairing (unit-κ stiffness)
    pub grad: &'a InnerProductContext,
}

/// First estimate ratio: (Q₁^{α,m}(u,T) + Q₂^{α,m}(∇u,T)) /
/// (t^α Σ_{j<=m} Q^{0,j}(f,T)).
pub fn check_stability_first(inp: &StabilityInputs<'_>) -> Result<IneqReport> {
    let n = inp.u.len() - 1;
    let t = inp.u.mesh.node(n);
    let lhs = q_mj(inp.alpha, inp.m, inp.u, n, inp.l2, QKind::Q1)?
        + q_mj(inp.alpha, inp.m, inp.u, n, inp.grad, QKind::Q2)?;
    let mut sum_f = 0.0;
    for j in 0..=inp.m {
        sum_f += q_mj(0.0, j, inp.f, n, inp.l2, QKind::Q1)?;
    }
    let rhs = t.powf(inp.alpha) * sum_f;
    Ok(IneqReport::new(
        "3.1-first",
        lhs,
        rhs,
        vec![("alpha", inp.alpha), ("m", inp.m as f64)],
    )
    .with_ratio())
}

/// Second estimate ratio: (Q^{0,m}(u,T) + Q₁^{α,m}(∇u,T)) / Σ_{j<=m} Q^{0,j}(f,T).
pub fn check_stability_second(inp: &StabilityInputs<'_>) -> Result<IneqReport> {
    let n = inp.u.len() - 1;
    let lhs = q_mj(0.0, inp.m, inp.u, n, inp.l2, QKind::Q1)?
        + q_mj(inp.alpha, inp.m, inp.u, n, inp.grad, QKind::Q1)?;
    let mut rhs = 0.0;
    for j in 0..=inp.m {
        rhs += q_mj(0.0, j, inp.f, n, inp.l2, QKind::Q1)?;
    }
    Ok(IneqReport::new(
        "3.1-second",
        lhs,
        rhs,
        vec![("alpha", inp.alpha), ("m", inp.m as f64)],
    )
    .with_ratio())
}

/// Result of the fractional Gronwall comparison.
#[derive(Debug, Clone)]
pub struct GronwallReport {
    /// a(t)·E_β(b(t)·t^β) at the nodes
    pub bound: ScalarSeries,
    /// whether 0 <= q <= a + b·I^βq held numerically
    pub premise_ok: bool,
    /// true iff the premise held and q exceeded the bound beyond tolerance
    pub violated: bool,
    pub max_excess: f64,
}

/// Checks the fractional Gronwall implication: if 0 <= q <= a + b·I^βq with
/// a, b non-negative and non-decreasing, then q(t) <= a(t)·E_β(b(t)·t^β).
pub fn gronwall_bound(
    a_fn: &ScalarSeries,
    b_fn: &ScalarSeries,
    beta: f64,
    q: &ScalarSeries,
) -> Result<GronwallReport> {
    if !(beta > 0.0) {
        return Err(Error::invalid("gronwall_bound", format!("beta = {beta} must be positive")));
    }
    q.check_same_mesh(a_fn, "gronwall_bound")?;
    q.check_same_mesh(b_fn, "gronwall_bound")?;
    for s in [a_fn, b_fn] {
        let v = s.raw_values();
        if v[0] < 0.0 || v.windows(2).any(|w| w[1] < w[0] - 1e-12 * w[0].abs().max(1.0)) {
            return Err(Error::invalid("gronwall_bound", "a and b must be non-negative and non-decreasing"));
        }
    }
    let ibq = frac_integral(beta, q)?;
    let qv = q.raw_values();
    let scale = qv.iter().fold(1.0f64, |m, &v| m.max(v.abs()));
    let premise_tol = 1e-3 * scale;
    let mut premise_ok = true;
    for n in 0..q.len() {
        let rhs = a_fn.raw_values()[n] + b_fn.raw_values()[n] * ibq.raw_values()[n];
        if qv[n] < -premise_tol || qv[n] > rhs + premise_tol {
            premise_ok = false;
            break;
        }
    }
    let t = q.mesh.nodes();
    let mut bound_vals = Vec::with_capacity(q.len());
    for n in 0..q.len() {
        let arg = b_fn.raw_values()[n] * t[n].powf(beta);
        bound_vals.push(a_fn.raw_values()[n] * mittag_leffler(beta, 1.0, arg)?);
    }
    let bound = ScalarSeries::new(Arc::clone(&q.mesh), bound_vals)?;
    let mut max_excess = f64::NEG_INFINITY;
    for n in 0..q.len() {
        max_excess = max_excess.max(qv[n] - bound.raw_values()[n]);
    }
    let violated = premise_ok && max_excess > 1e-8 * scale.max(1.0);
    Ok(GronwallReport { bound, premise_ok, violated, max_excess })
}

/// Seeded random piecewise-linear series with values uniform in [lo, hi];
/// the workhorse test-function generator of the randomized suites.
pub fn random_series(
    mesh: &Arc<crate::fractops::GradedMesh>,
    rng: &mut impl Rng,
    lo: f64,
    hi: f64,
) -> ScalarSeries {
    let values: Vec<f64> = (0..=mesh.n_steps()).map(|_| rng.random_range(lo..hi)).collect();
    ScalarSeries::new(Arc::clone(mesh), values).expect("random series shape")
}
