//! Commutator coefficient families for powers of the multiplication operator
//! (M φ)(t) = t φ(t) against ∂_t and the fractional integral I^μ, plus
//! mechanical verification of the resulting operator identities on monomials.
//!
//! The four families expand
//!
//!   ∂_t^q M^m = M^m ∂_t^q + Σ_{j=1}^q a^{m,q}_j M^{m-j} ∂_t^{q-j}
//!   M^m ∂_t^q = ∂_t^q M^m + Σ_{j=1}^q b^{m,q}_j ∂_t^{q-j} M^{m-j}
//!   I^μ M^m  = M^m I^μ  + Σ_{j=1}^m c^{m,μ}_j M^{m-j} I^{μ+j}
//!   M^m I^μ  = I^μ M^m  + Σ_{j=1}^m d^{m,μ}_j I^{μ+j} M^{m-j}
//!
//! and are generated by recursion on m and q from the base commutators
//! ∂_t M - M ∂_t = 1 and M I^μ - I^μ M = μ I^{μ+1}. The recursion is the
//! fast path; a monomial oracle (exact rationals for a, b; Γ-ratio floats
//! for c, d) certifies every table.

use crate::error::{Error, Result};
use crate::fractops::{frac_integral, omega, ScalarSeries};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use statrs::function::gamma::ln_gamma;

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Polynomial in the symbolic order μ with exact rational coefficients,
/// stored ascending in degree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MuPoly(Vec<BigRational>);

impl MuPoly {
    pub fn zero() -> Self {
        MuPoly(Vec::new())
    }

    pub fn one() -> Self {
        MuPoly(vec![BigRational::one()])
    }

    /// The monomial μ itself.
    pub fn mu() -> Self {
        MuPoly(vec![BigRational::zero(), BigRational::one()])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(Zero::is_zero)
    }

    pub fn coefficients(&self) -> &[BigRational] {
        &self.0
    }

    fn add(&self, other: &MuPoly) -> MuPoly {
        let n = self.0.len().max(other.0.len());
        let mut out = vec![BigRational::zero(); n];
        for (i, c) in self.0.iter().enumerate() {
            out[i] += c;
        }
        for (i, c) in other.0.iter().enumerate() {
            out[i] += c;
        }
        MuPoly(out).trim()
    }

    fn mul(&self, other: &MuPoly) -> MuPoly {
        if self.0.is_empty() || other.0.is_empty() {
            return MuPoly::zero();
        }
        let mut out = vec![BigRational::zero(); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        MuPoly(out).trim()
    }

    /// p(μ) -> p(μ + 1), the shift used by the recursion on m.
    fn shift_up(&self) -> MuPoly {
        // binomial expansion of (mu+1)^i
        let mut out = MuPoly::zero();
        for (i, c) in self.0.iter().enumerate() {
            // (mu+1)^i = sum_k C(i,k) mu^k
            let mut coeffs = vec![BigRational::zero(); i + 1];
            let mut binom = BigInt::one();
            for (k, slot) in coeffs.iter_mut().enumerate() {
                *slot = c * BigRational::from_integer(binom.clone());
                binom = binom * BigInt::from(i - k) / BigInt::from(k + 1);
            }
            out = out.add(&MuPoly(coeffs));
        }
        out.trim()
    }

    fn trim(mut self) -> MuPoly {
        while self.0.last().is_some_and(Zero::is_zero) {
            self.0.pop();
        }
        self
    }

    pub fn eval(&self, mu: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.0.iter().rev() {
            acc = acc * mu + c.to_f64().unwrap_or(f64::NAN);
        }
        acc
    }

    pub fn eval_rational(&self, mu: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.0.iter().rev() {
            acc = acc * mu + c;
        }
        acc
    }
}

/// Which of the four coefficient families a table holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// a^{m,q}: ∂_t^q M^m expansion
    DiffMult,
    /// b^{m,q}: M^m ∂_t^q expansion
    MultDiff,
    /// c^{m,μ}: I^μ M^m expansion
    FracMult,
    /// d^{m,μ}: M^m I^μ expansion
    MultFrac,
}

/// A coefficient family for fixed (m, q) or fixed m with symbolic μ.
/// `coeffs[0] = 1` always; kinds a and b hold degree-0 polynomials.
#[derive(Debug, Clone)]
pub struct CommutatorTable {
    pub kind: TableKind,
    pub m: usize,
    /// the differentiation order for kinds a, b; None for c, d
    pub q: Option<usize>,
    pub coeffs: Vec<MuPoly>,
}

impl CommutatorTable {
    /// Tilde reindexing: ã^{m,q}_j = a^{m,q}_{q-j} (and analogues).
    pub fn tilde(&self) -> Vec<MuPoly> {
        let mut v = self.coeffs.clone();
        v.reverse();
        v
    }
}

/// Exact coefficients a^{m,q}_j and b^{m,q}_j for j = 0..=q, generated by
/// recursion on (m, q) from the base commutators. Requires 0 <= q <= m.
pub fn diff_mult_coeffs(m: usize, q: usize) -> Result<(CommutatorTable, CommutatorTable)> {
    if q > m {
        return Err(Error::invalid("diff_mult_coeffs", format!("q = {q} exceeds m = {m}")));
    }
    let a = a_coeffs(m, q);
    let b = b_coeffs(m, q);
    let wrap = |kind, coeffs: Vec<BigRational>| CommutatorTable {
        kind,
        m,
        q: Some(q),
        coeffs: coeffs
            .into_iter()
            .map(|c| if c.is_zero() { MuPoly::zero() } else { MuPoly(vec![c]) })
            .collect(),
    };
    Ok((wrap(TableKind::DiffMult, a), wrap(TableKind::MultDiff, b)))
}

fn a_coeffs(m: usize, q: usize) -> Vec<BigRational> {
    // a^{m,q}_j = a^{m,q-1}_j + m a^{m-1,q-1}_{j-1}, a^{m,0} = [1]
    if q == 0 {
        return vec![BigRational::one()];
    }
    let prev = a_coeffs(m, q - 1);
    let lower = if m == 0 { vec![BigRational::zero(); q] } else { a_coeffs(m - 1, q - 1) };
    let mut out = vec![BigRational::zero(); q + 1];
    for (j, c) in prev.iter().enumerate() {
        out[j] += c;
    }
    for (j, c) in lower.iter().enumerate() {
        out[j + 1] += rat(m as i64) * c;
    }
    out
}

fn b_coeffs(m: usize, q: usize) -> Vec<BigRational> {
    if q == 0 {
        return vec![BigRational::one()];
    }
    let prev = b_coeffs(m, q - 1);
    let lower = if m == 0 { vec![BigRational::zero(); q] } else { b_coeffs(m - 1, q - 1) };
    let mut out = vec![BigRational::zero(); q + 1];
    for (j, c) in prev.iter().enumerate() {
        out[j] += c;
    }
    for (j, c) in lower.iter().enumerate() {
        out[j + 1] -= rat(m as i64) * c;
    }
    out
}

/// Polynomial-in-μ coefficients c^{m,μ}_j and d^{m,μ}_j for j = 0..=m.
pub fn frac_mult_coeffs(m: usize) -> (CommutatorTable, CommutatorTable) {
    let (c, d) = cd_polys(m);
    (
        CommutatorTable { kind: TableKind::FracMult, m, q: None, coeffs: c },
        CommutatorTable { kind: TableKind::MultFrac, m, q: None, coeffs: d },
    )
}

/// Numeric evaluation of the c/d tables at a real order μ.
pub fn frac_mult_coeffs_at(m: usize, mu: f64) -> (Vec<f64>, Vec<f64>) {
    let (c, d) = cd_polys(m);
    (c.iter().map(|p| p.eval(mu)).collect(), d.iter().map(|p| p.eval(mu)).collect())
}

fn cd_polys(m: usize) -> (Vec<MuPoly>, Vec<MuPoly>) {
    // c^{m}_j = c^{m-1}_j - μ c^{m-1,μ+1}_{j-1};  d^{m}_j = d^{m-1}_j + μ d^{m-1,μ+1}_{j-1}
    let mut c = vec![MuPoly::one()];
    let mut d = vec![MuPoly::one()];
    for _ in 1..=m {
        let mut c_next = vec![MuPoly::zero(); c.len() + 1];
        let mut d_next = vec![MuPoly::zero(); d.len() + 1];
        for (j, p) in c.iter().enumerate() {
            c_next[j] = c_next[j].add(p);
            let shifted = p.shift_up().mul(&MuPoly::mu());
            c_next[j + 1] = c_next[j + 1].add(&MuPoly(shifted.0.iter().map(|x| -x).collect()));
        }
        for (j, p) in d.iter().enumerate() {
            d_next[j] = d_next[j].add(p);
            d_next[j + 1] = d_next[j + 1].add(&p.shift_up().mul(&MuPoly::mu()));
        }
        c = c_next;
        d = d_next;
    }
    (c, d)
}

/// A rational multiple of an integer power of t: the oracle substrate.
#[derive(Debug, Clone)]
pub struct MonomialFunction {
    pub coeff: BigRational,
    pub degree: u32,
}

impl MonomialFunction {
    pub fn new(coeff_num: i64, coeff_den: i64, degree: u32) -> Self {
        MonomialFunction {
            coeff: BigRational::new(BigInt::from(coeff_num), BigInt::from(coeff_den)),
            degree,
        }
    }

    pub fn unit(degree: u32) -> Self {
        MonomialFunction { coeff: BigRational::one(), degree }
    }
}

/// Sum of real-power terms Σ c_i t^{p_i}; closed under ∂_t, M^j and I^μ
/// (with Γ-ratio coefficients), the float side of the monomial oracle.
#[derive(Debug, Clone, Default)]
pub(crate) struct PowerSum {
    terms: Vec<(f64, f64)>, // (coeff, power)
}

impl PowerSum {
    pub(crate) fn monomial(coeff: f64, power: f64) -> Self {
        PowerSum { terms: vec![(coeff, power)] }
    }

    fn collect(mut self) -> Self {
        self.terms.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(self.terms.len());
        for (c, p) in self.terms {
            if let Some(last) = out.last_mut() {
                if (last.1 - p).abs() < 1e-9 {
                    last.0 += c;
                    continue;
                }
            }
            out.push((c, p));
        }
        out.retain(|&(c, _)| c != 0.0);
        PowerSum { terms: out }
    }

    pub(crate) fn add(&self, other: &PowerSum) -> PowerSum {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        PowerSum { terms }.collect()
    }

    pub(crate) fn scale(&self, s: f64) -> PowerSum {
        PowerSum { terms: self.terms.iter().map(|&(c, p)| (s * c, p)).collect() }
    }

    pub(crate) fn deriv(&self) -> PowerSum {
        PowerSum {
            terms: self
                .terms
                .iter()
                .filter(|&&(_, p)| p != 0.0)
                .map(|&(c, p)| (c * p, p - 1.0))
                .collect(),
        }
        .collect()
    }

    pub(crate) fn deriv_n(&self, n: usize) -> PowerSum {
        let mut s = self.clone();
        for _ in 0..n {
            s = s.deriv();
        }
        s
    }

    pub(crate) fn mult_t_pow(&self, j: usize) -> PowerSum {
        PowerSum { terms: self.terms.iter().map(|&(c, p)| (c, p + j as f64)).collect() }
    }

    /// I^μ t^p = Γ(p+1)/Γ(p+1+μ) t^{p+μ}; requires every power > -1.
    pub(crate) fn frac_int(&self, mu: f64) -> Result<PowerSum> {
        if mu == 0.0 {
            return Ok(self.clone());
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for &(c, p) in &self.terms {
            if p <= -1.0 {
                return Err(Error::HypothesisViolated {
                    check: "monomial oracle",
                    message: format!("I^mu of t^{p} is divergent"),
                });
            }
            let ratio = (ln_gamma(p + 1.0) - ln_gamma(p + 1.0 + mu)).exp();
            terms.push((c * ratio, p + mu));
        }
        Ok(PowerSum { terms }.collect())
    }

    fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().map(|&(c, _)| c.abs()).fold(0.0, f64::max)
    }

    /// Max-norm of the coefficient difference, normalized by the larger side.
    pub(crate) fn residual_against(&self, other: &PowerSum) -> f64 {
        let diff = self.add(&other.scale(-1.0)).collect();
        diff.max_abs_coeff() / self.max_abs_coeff().max(other.max_abs_coeff()).max(1.0)
    }
}

/// Identity selector for [`verify_identity`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentityId {
    /// Eq. expanding ∂_t^q M^m
    MFold1,
    /// Eq. expanding M^m ∂_t^q
    MFold2,
    /// Eq. expanding I^μ M^m
    MFold3,
    /// Eq. expanding M^m I^μ
    MFold4,
    /// ∂_t^m I^μ = I^μ ∂_t^m + initial-value ω terms
    FiOmega,
    /// ∂_t^q M^m I^μ expansion (Appendix)
    LemmaA1,
}

/// Parameters for an identity check.
#[derive(Debug, Clone, Copy)]
pub struct IdentityParams {
    pub m: usize,
    pub q: usize,
    pub mu: f64,
}

/// The test function an identity is applied to.
pub enum TestFunction<'a> {
    Monomial(MonomialFunction),
    Sampled(&'a ScalarSeries),
}

/// Applies both sides of the selected identity to the test function and
/// returns the max-norm residual. Monomial inputs are evaluated by exact
/// Γ-ratio arithmetic and must come out below 1e-12; sampled series are
/// evaluated by product integration (supported for the two purely
/// integral-multiplication expansions) and carry quadrature error instead.
pub fn verify_identity(
    id: IdentityId,
    params: IdentityParams,
    test_function: TestFunction<'_>,
) -> Result<f64> {
    match test_function {
        TestFunction::Monomial(mono) => verify_on_monomial(id, params, &mono),
        TestFunction::Sampled(series) => verify_on_series(id, params, series),
    }
}

fn verify_on_monomial(id: IdentityId, p: IdentityParams, mono: &MonomialFunction) -> Result<f64> {
    let IdentityParams { m, q, mu } = p;
    let phi = PowerSum::monomial(mono.coeff.to_f64().unwrap(), mono.degree as f64);
    match id {
        IdentityId::MFold1 => {
            let (a, _) = diff_mult_coeffs(m, q)?;
            let lhs = phi.mult_t_pow(m).deriv_n(q);
            let mut rhs = phi.deriv_n(q).mult_t_pow(m);
            for (j, c) in a.coeffs.iter().enumerate().skip(1) {
                rhs = rhs.add(&phi.deriv_n(q - j).mult_t_pow(m - j).scale(c.eval(0.0)));
            }
            Ok(lhs.residual_against(&rhs))
        }
        IdentityId::MFold2 => {
            let (_, b) = diff_mult_coeffs(m, q)?;
            let lhs = phi.deriv_n(q).mult_t_pow(m);
            let mut rhs = phi.mult_t_pow(m).deriv_n(q);
            for (j, c) in b.coeffs.iter().enumerate().skip(1) {
                rhs = rhs.add(&phi.mult_t_pow(m - j).deriv_n(q - j).scale(c.eval(0.0)));
            }
            Ok(lhs.residual_against(&rhs))
        }
        IdentityId::MFold3 => {
            check_mu(mu)?;
            let (c, _) = frac_mult_coeffs(m);
            let lhs = phi.mult_t_pow(m).frac_int(mu)?;
            let mut rhs = phi.frac_int(mu)?.mult_t_pow(m);
            for (j, cj) in c.coeffs.iter().enumerate().skip(1) {
                rhs = rhs.add(&phi.frac_int(mu + j as f64)?.mult_t_pow(m - j).scale(cj.eval(mu)));
            }
            Ok(lhs.residual_against(&rhs))
        }
        IdentityId::MFold4 => {
            check_mu(mu)?;
            let (_, d) = frac_mult_coeffs(m);
            let lhs = phi.frac_int(mu)?.mult_t_pow(m);
            let mut rhs = phi.mult_t_pow(m).frac_int(mu)?;
            for (j, dj) in d.coeffs.iter().enumerate().skip(1) {
                rhs = rhs.add(&phi.mult_t_pow(m - j).frac_int(mu + j as f64)?.scale(dj.eval(mu)));
            }
            Ok(lhs.residual_against(&rhs))
        }
        IdentityId::FiOmega => {
            check_mu(mu)?;
            if m < 1 {
                return Err(Error::invalid("verify_identity", "fi-omega needs m >= 1"));
            }
            let lhs = phi.frac_int(mu)?.deriv_n(m);
            let mut rhs = phi.deriv_n(m).frac_int(mu)?;
            // phi^{(j)}(0) is nonzero only for j = degree (value: coeff * degree!)
            let deg = mono.degree as usize;
            if deg < m {
                let mut fact = 1.0;
                for i in 1..=deg {
                    fact *= i as f64;
                }
                let nu = mu - m as f64 + 1.0 + deg as f64;
                let c0 = mono.coeff.to_f64().unwrap() * fact;
                // omega_nu(t) = t^{nu-1}/Gamma(nu); vanishes at non-positive
                // integer nu.
                let rg = crate::fractops::recip_gamma(nu);
                if rg != 0.0 {
                    rhs = rhs.add(&PowerSum::monomial(c0 * rg, nu - 1.0));
                }
            }
            Ok(lhs.residual_against(&rhs))
        }
        IdentityId::LemmaA1 => {
            if !(1..=m).contains(&q) {
                return Err(Error::HypothesisViolated {
                    check: "lemma-A1",
                    message: format!("needs 1 <= q <= m, got q = {q}, m = {m}"),
                });
            }
            if mu <= 0.0 {
                return Err(Error::HypothesisViolated {
                    check: "lemma-A1",
                    message: "needs mu > 0".into(),
                });
            }
            // Monomials of non-negative degree satisfy the vanishing initial
            // values (∂_t^k M^j φ)(0) = 0 for k <= j-(m-q)-1 automatically.
            let (_, d) = frac_mult_coeffs(m);
            let dt = CommutatorTable { kind: TableKind::MultFrac, m, q: None, coeffs: d.coeffs };
            let tilde = dt.tilde();
            let lhs = phi.frac_int(mu)?.mult_t_pow(m).deriv_n(q);
            let mut rhs = PowerSum::default();
            for (j, dj) in tilde.iter().enumerate() {
                let coeff = dj.eval(mu);
                if j <= m - q {
                    let term = phi.mult_t_pow(j).frac_int(mu + (m - q - j) as f64)?.scale(coeff);
                    rhs = rhs.add(&term);
                } else {
                    let term = phi.mult_t_pow(j).deriv_n(j - (m - q)).frac_int(mu)?.scale(coeff);
                    rhs = rhs.add(&term);
                }
            }
            Ok(lhs.residual_against(&rhs))
        }
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(Error::invalid("verify_identity", format!("mu = {mu} must be >= 0")));
    }
    Ok(())
}

fn verify_on_series(id: IdentityId, p: IdentityParams, series: &ScalarSeries) -> Result<f64> {
    let IdentityParams { m, mu, .. } = p;
    check_mu(mu)?;
    if mu == 0.0 {
        return Err(Error::invalid("verify_identity", "sampled path needs mu > 0"));
    }
    let t = series.mesh.nodes().to_vec();
    let pow_m = |s: &ScalarSeries, j: usize| -> ScalarSeries {
        let vals: Vec<f64> =
            s.raw_values().iter().zip(&t).map(|(&v, &tt)| v * tt.powi(j as i32)).collect();
        ScalarSeries::new(std::sync::Arc::clone(&s.mesh), vals).unwrap()
    };
    match id {
        IdentityId::MFold3 => {
            let (c, _) = frac_mult_coeffs(m);
            let lhs = frac_integral(mu, &pow_m(series, m))?;
            let mut rhs = pow_m(&frac_integral(mu, series)?, m);
            for (j, cj) in c.coeffs.iter().enumerate().skip(1) {
                let term = pow_m(&frac_integral(mu + j as f64, series)?, m - j);
                let coeff = cj.eval(mu);
                let vals: Vec<f64> = rhs
                    .raw_values()
                    .iter()
                    .zip(term.raw_values())
                    .map(|(&r, &x)| r + coeff * x)
                    .collect();
                rhs = ScalarSeries::new(std::sync::Arc::clone(&series.mesh), vals).unwrap();
            }
            Ok(series_residual(&lhs, &rhs))
        }
        IdentityId::MFold4 => {
            let (_, d) = frac_mult_coeffs(m);
            let lhs = pow_m(&frac_integral(mu, series)?, m);
            let mut rhs = frac_integral(mu, &pow_m(series, m))?;
            for (j, dj) in d.coeffs.iter().enumerate().skip(1) {
                let term = frac_integral(mu + j as f64, &pow_m(series, m - j))?;
                let coeff = dj.eval(mu);
                let vals: Vec<f64> = rhs
                    .raw_values()
                    .iter()
                    .zip(term.raw_values())
                    .map(|(&r, &x)| r + coeff * x)
                    .collect();
                rhs = ScalarSeries::new(std::sync::Arc::clone(&series.mesh), vals).unwrap();
            }
            Ok(series_residual(&lhs, &rhs))
        }
        _ => Err(Error::invalid(
            "verify_identity",
            "sampled series are supported for mfold-3 and mfold-4 only; use a monomial",
        )),
    }
}

fn series_residual(a: &ScalarSeries, b: &ScalarSeries) -> f64 {
    let scale = a
        .raw_values()
        .iter()
        .chain(b.raw_values())
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1.0);
    a.raw_values()
        .iter()
        .zip(b.raw_values())
        .fold(0.0f64, |acc, (&x, &y)| acc.max((x - y).abs()))
        / scale
}

/// ω_ν evaluated through the public kernel, re-exported here because the
/// identity layer frequently needs it alongside the tables.
pub fn omega_value(nu: f64, t: f64) -> Result<f64> {
    omega(nu, t)
}
