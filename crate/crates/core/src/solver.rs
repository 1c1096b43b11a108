//! Time stepping for the weak form of the fractional problem and a
//! separable-solution spectral oracle for constant coefficients.
//!
//! The weak identity is collocated at every node t_n:
//!
//!   ⟨u_n, v⟩ + ⟨κ (I^α ∇u)(t_n), ∇v⟩ - ⟨(B₁u)(t_n), ∇v⟩ + ⟨(B₂u)(t_n), v⟩
//!     = ⟨f(t_n), v⟩,      f(t) = P u₀ + I¹ (P g)(t),
//!
//! with every memory term evaluated by product integration on the
//! piecewise-linear-in-time trajectory and B₁ = B_F^α + B_G^1,
//! B₂ = B_a^α + B_b^1 in their integrated-by-parts forms
//! B^μ_ψφ = ψ·I^μφ - I¹(ψ_t·I^μφ), so that ∂_t^{1-α}u is never formed.
//! The t_n diagonal weight of each memory integral multiplies the new
//! unknown; everything else is history.

use crate::error::{Error, Result};
use crate::femcore::{
    advection_matrix, l2_projection, mass_matrix, reaction_matrix, stiffness_matrix,
    CoefficientField, SpaceMesh, SpectralDecomposition, TriDiag,
};
use crate::fractops::{
    derivative_series, frac_integral, ml_eval, recip_gamma, FracWeights, GradedMesh, Series,
    VectorSeries,
};
use nalgebra::DVector;
use std::sync::Arc;

/// Source magnitude bound ‖g^{(j)}(t)‖ <= M t^{η-1-j}.
#[derive(Debug, Clone, Copy)]
pub struct SourceBound {
    pub magnitude: f64,
    pub eta: f64,
}

impl SourceBound {
    pub fn zero() -> Self {
        SourceBound { magnitude: 0.0, eta: 1.0 }
    }
}

/// The continuous problem: order, horizon, coefficients, source and initial
/// data with its declared Ḣ^μ regularity.
pub struct ProblemSpec {
    pub alpha: f64,
    pub t_final: f64,
    pub coefficients: CoefficientField,
    /// g(x,t); None means g ≡ 0
    pub source: Option<crate::femcore::SpaceTimeFn>,
    pub source_bound: SourceBound,
    pub initial: crate::femcore::SpaceFn,
    pub u0_regularity_mu: f64,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid("ProblemSpec", format!("alpha = {} not in (0,1)", self.alpha)));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::invalid("ProblemSpec", "T must be positive"));
        }
        if !(0.0..=2.0).contains(&self.u0_regularity_mu) {
            return Err(Error::invalid("ProblemSpec", "u0 regularity mu must lie in [0,2]"));
        }
        if self.source.is_some() && !(self.source_bound.eta > 0.0) {
            return Err(Error::invalid("ProblemSpec", "source bound needs eta > 0"));
        }
        Ok(())
    }
}

/// Discretization parameters.
#[derive(Debug, Clone, Copy)]
pub struct SchemeConfig {
    pub n_steps: usize,
    pub grading: f64,
    pub n_cells: usize,
    /// relative residual tolerance for the per-step linear solves
    pub solver_tol: f64,
}

impl SchemeConfig {
    pub fn new(n_steps: usize, grading: f64, n_cells: usize) -> Self {
        SchemeConfig { n_steps, grading, n_cells, solver_tol: 1e-10 }
    }
}

/// A computed time-indexed sequence of spatial coefficient vectors.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub mesh: Arc<GradedMesh>,
    pub states: Vec<DVector<f64>>,
    pub provenance: String,
}

impl Trajectory {
    pub fn state(&self, n: usize) -> &DVector<f64> {
        &self.states[n]
    }

    pub fn series(&self) -> VectorSeries {
        Series::new(Arc::clone(&self.mesh), self.states.clone()).expect("trajectory shape")
    }

    /// Series of u(t_n) - u(0), the shifted trajectory w with w(0) = 0.
    pub fn shifted_series(&self) -> VectorSeries {
        let u0 = &self.states[0];
        let vals: Vec<DVector<f64>> = self.states.iter().map(|u| u - u0).collect();
        Series::new(Arc::clone(&self.mesh), vals).expect("trajectory shape")
    }
}

/// Data series f(t_n) = P u₀ + I¹(P g)(t_n).
///
/// For a source with η < 1 the node value g(·,0) is singular; the first cell
/// of the time integral is evaluated against the power profile (s/t₁)^{η-1}
/// implied by the source bound, and the remaining cells by the trapezoid
/// rule exactly as the product-integration semantics prescribe.
pub fn f_rhs(
    problem: &ProblemSpec,
    mesh: &Arc<GradedMesh>,
    space: &SpaceMesh,
) -> Result<VectorSeries> {
    problem.validate()?;
    let pu0 = l2_projection(space, &problem.initial)?;
    let n_steps = mesh.n_steps();
    let mut values = Vec::with_capacity(n_steps + 1);
    match &problem.source {
        None => {
            for _ in 0..=n_steps {
                values.push(pu0.clone());
            }
        }
        Some(g) => {
            let t = mesh.nodes();
            let eta = problem.source_bound.eta;
            let proj_g = |tt: f64| -> Result<DVector<f64>> {
                l2_projection(space, |x| g(x, tt))
            };
            let mut cum = DVector::zeros(space.n_dofs());
            values.push(pu0.clone());
            let mut prev = if eta >= 1.0 { Some(proj_g(0.0)?) } else { None };
            for n in 1..=n_steps {
                let gn = proj_g(t[n])?;
                match &prev {
                    Some(gp) => {
                        let h = t[n] - t[n - 1];
                        cum += (gp + &gn) * (0.5 * h);
                    }
                    None => {
                        // first cell with a t^{eta-1} profile: integral
                        // g(t_1) * t_1/eta
                        cum += &gn * (t[n] / eta);
                    }
                }
                prev = Some(gn);
                values.push(&pu0 + &cum);
            }
        }
    }
    Series::new(Arc::clone(mesh), values)
}

/// Implicit product-integration solve of the collocated weak form.
pub fn solve_weak(problem: &ProblemSpec, scheme: &SchemeConfig) -> Result<Trajectory> {
    problem.validate()?;
    let mesh = GradedMesh::new(problem.t_final, scheme.n_steps, scheme.grading)?;
    let space = SpaceMesh::new(scheme.n_cells)?;
    let mass = mass_matrix(&space);
    let stiff = stiffness_matrix(&space, &problem.coefficients.kappa)?;
    let w_alpha = FracWeights::new(problem.alpha, &mesh)?;
    let f = f_rhs(problem, &mesh, &space)?;
    let n_dofs = space.n_dofs();
    let zero = DVector::<f64>::zeros(n_dofs);

    let mut states: Vec<DVector<f64>> = vec![f.raw_values()[0].clone()];

    // incremental I^1 u history and the four nested-memory integrand caches
    let mut y_cum = zero.clone();
    struct NestedCache {
        cum: DVector<f64>,
        prev: DVector<f64>,
    }
    let mut cache_ft = problem.coefficients.advect_f.as_ref().map(|_| NestedCache { cum: zero.clone(), prev: zero.clone() });
    let mut cache_gt = problem.coefficients.advect_g.as_ref().map(|_| NestedCache { cum: zero.clone(), prev: zero.clone() });
    let mut cache_at = problem.coefficients.react_a.as_ref().map(|_| NestedCache { cum: zero.clone(), prev: zero.clone() });
    let mut cache_bt = problem.coefficients.react_b.as_ref().map(|_| NestedCache { cum: zero.clone(), prev: zero.clone() });

    for n in 1..=scheme.n_steps {
        let tn = mesh.node(n);
        let h = mesh.step(n);
        let row = w_alpha.row(n);
        let wa_nn = row[n];
        let w1_nn = 0.5 * h;

        // history parts of I^alpha u and I^1 u at t_n
        let mut z_hist = zero.clone();
        for (j, &w) in row.iter().take(n).enumerate() {
            if w != 0.0 {
                z_hist.axpy(w, &states[j], 1.0);
            }
        }
        let mut y_hist = y_cum.clone();
        y_hist.axpy(w1_nn, &states[n - 1], 1.0);

        // system matrix and right-hand side
        let mut a_mat = mass.clone();
        a_mat.add_scaled(&stiff, wa_nn);
        let mut rhs = mass.matvec(&f.raw_values()[n]);
        rhs.axpy(-1.0, &stiff.matvec(&z_hist), 1.0);

        // memory coefficient blocks: (matrix at t_n, time-derivative matrix,
        // memory weight on the unknown, history vector, cache, equation sign)
        // sign = +1 for terms entering as +<B.., v-side> on the LHS after the
        // -<B1,grad v> +<B2,v> bookkeeping.
        let coeffs = &problem.coefficients;
        let blocks: [(Option<&crate::femcore::TimeCoeff>, bool, f64, &DVector<f64>, &mut Option<NestedCache>, f64); 4] = [
            (coeffs.advect_f.as_ref(), true, wa_nn, &z_hist, &mut cache_ft, -1.0),
            (coeffs.advect_g.as_ref(), true, w1_nn, &y_hist, &mut cache_gt, -1.0),
            (coeffs.react_a.as_ref(), false, wa_nn, &z_hist, &mut cache_at, 1.0),
            (coeffs.react_b.as_ref(), false, w1_nn, &y_hist, &mut cache_bt, 1.0),
        ];
        let mut step_mats: Vec<Option<(TriDiag, TriDiag)>> = Vec::with_capacity(4);
        for (coeff, is_advection, w_mem, hist, cache, sign) in blocks {
            let Some(tc) = coeff else {
                step_mats.push(None);
                continue;
            };
            let cache = cache.as_mut().expect("cache allocated with coefficient");
            let (c_now, c_dt) = if is_advection {
                (advection_matrix(&space, &tc.value, tn), advection_matrix(&space, &tc.d_time, tn))
            } else {
                (reaction_matrix(&space, &tc.value, tn), reaction_matrix(&space, &tc.d_time, tn))
            };
            // sign * [ C_n z_n - I^1(C_t z)(t_n) ] enters the LHS; the
            // unknown part of z_n is wa_nn u_n (w1_nn for the I^1 track).
            a_mat.add_scaled(&c_now, sign * w_mem);
            a_mat.add_scaled(&c_dt, -sign * w1_nn * w_mem);
            // known parts to the right-hand side with flipped sign
            rhs.axpy(-sign, &c_now.matvec(hist), 1.0);
            let mut known_nested = cache.cum.clone();
            known_nested.axpy(w1_nn, &cache.prev, 1.0);
            known_nested.axpy(w1_nn, &c_dt.matvec(hist), 1.0);
            rhs.axpy(sign, &known_nested, 1.0);
            step_mats.push(Some((c_now, c_dt)));
        }

        let u_n = a_mat.solve(&rhs).map_err(|e| match e {
            Error::LinearSolveFailure { message, .. } => Error::LinearSolveFailure { step: n, message },
            other => other,
        })?;
        if u_n.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { step: n });
        }
        let residual = (&a_mat.matvec(&u_n) - &rhs).amax();
        let scale = rhs.amax().max(1.0);
        if residual > scheme.solver_tol.max(1e-14) * scale * 1e3 {
            return Err(Error::LinearSolveFailure {
                step: n,
                message: format!("residual {residual:.3e} exceeds tolerance"),
            });
        }

        // commit caches with the completed state
        let mut z_full = z_hist;
        z_full.axpy(wa_nn, &u_n, 1.0);
        let mut y_full = y_hist;
        y_full.axpy(w1_nn, &u_n, 1.0);
        let tracks = [
            (&mut cache_ft, &z_full, 0usize),
            (&mut cache_gt, &y_full, 1),
            (&mut cache_at, &z_full, 2),
            (&mut cache_bt, &y_full, 3),
        ];
        for (cache, state_now, idx) in tracks {
            if let Some(c) = cache.as_mut() {
                let (_, c_dt) = step_mats[idx].as_ref().expect("matrices for active coefficient");
                let x_now = c_dt.matvec(state_now);
                let mut inc = c.prev.clone();
                inc.axpy(1.0, &x_now, 1.0);
                c.cum.axpy(w1_nn, &inc, 1.0);
                c.prev = x_now;
            }
        }
        y_cum.axpy(w1_nn, &states[n - 1], 1.0);
        y_cum.axpy(w1_nn, &u_n, 1.0);
        states.push(u_n);
    }

    Ok(Trajectory {
        mesh,
        states,
        provenance: format!(
            "weak-scheme(N={}, gamma={}, n_x={})",
            scheme.n_steps, scheme.grading, scheme.n_cells
        ),
    })
}

/// Which post-processed quantity of a solution to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivKind {
    /// u itself
    Value,
    /// ∂_t^m u
    Derivative(u32),
    /// ∂_t^{m-α} u = ∂_t^m I^α u
    FracDerivative(u32),
    /// u - u₀
    Shifted,
    /// ∂_t^{m-α} (u - u₀), the w-form of the third estimate
    FracDerivativeShifted(u32),
}

/// Spectral separable solution u(t) = Σ_k c_k E_α(-λ_k t^α) φ_k of the
/// constant-coefficient problem (F = G = a = b = 0, g = 0); ground truth for
/// solver validation and the high-accuracy substrate for rate experiments.
pub struct SpectralSolution {
    pub mesh: Arc<GradedMesh>,
    pub alpha: f64,
    lambdas: Vec<f64>,
    coeffs: Vec<f64>,
    spatial: Arc<SpectralDecomposition>,
    tail_bound: f64,
}

/// Builds the spectral oracle. Requires all lower-order coefficients and the
/// source to vanish; `modes` must not exceed the available eigenpairs.
pub fn solve_spectral_const(
    problem: &ProblemSpec,
    scheme: &SchemeConfig,
    modes: usize,
) -> Result<SpectralSolution> {
    problem.validate()?;
    let c = &problem.coefficients;
    if c.advect_f.is_some() || c.advect_g.is_some() || c.react_a.is_some() || c.react_b.is_some() {
        return Err(Error::invalid(
            "solve_spectral_const",
            "spectral oracle needs F = G = a = b = 0",
        ));
    }
    if problem.source.is_some() {
        return Err(Error::invalid("solve_spectral_const", "spectral oracle needs g = 0"));
    }
    let mesh = GradedMesh::new(problem.t_final, scheme.n_steps, scheme.grading)?;
    let space = SpaceMesh::new(scheme.n_cells)?;
    let stiff = stiffness_matrix(&space, &problem.coefficients.kappa)?;
    let mass = mass_matrix(&space);
    let spatial = Arc::new(SpectralDecomposition::new(&stiff, &mass)?);
    if modes == 0 || modes > spatial.n_modes() {
        return Err(Error::invalid(
            "solve_spectral_const",
            format!("modes = {modes} outside 1..={}", spatial.n_modes()),
        ));
    }
    let pu0 = l2_projection(&space, &problem.initial)?;
    let all_coeffs = spatial.modal_coefficients(&pu0);
    let tail_bound = all_coeffs[modes..].iter().map(|c| c * c).sum::<f64>().sqrt();
    Ok(SpectralSolution {
        mesh,
        alpha: problem.alpha,
        lambdas: spatial.eigenvalues()[..modes].to_vec(),
        coeffs: all_coeffs[..modes].to_vec(),
        spatial,
        tail_bound,
    })
}

impl SpectralSolution {
    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    /// Parseval bound on the truncated initial-data tail.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn spatial(&self) -> &Arc<SpectralDecomposition> {
        &self.spatial
    }

    /// Modal amplitude of the requested quantity at time t > 0 (t = 0 only
    /// for Value/Shifted).
    pub fn mode_amplitude(&self, k: usize, t: f64, quantity: DerivKind) -> Result<f64> {
        let lambda = self.lambdas[k];
        let c = self.coeffs[k];
        let alpha = self.alpha;
        if t == 0.0 {
            return match quantity {
                DerivKind::Value => Ok(c),
                DerivKind::Shifted => Ok(0.0),
                _ => Err(Error::SingularAtOrigin { quantity: "spectral mode amplitude" }),
            };
        }
        let z = -lambda * t.powf(alpha);
        let amp = match quantity {
            DerivKind::Value => c * ml_eval(alpha, 1.0, z)?,
            DerivKind::Shifted => c * (ml_eval(alpha, 1.0, z)? - 1.0),
            DerivKind::Derivative(m) => {
                // d^m/dt^m E_α(-λ t^α) = t^{-m} E_{α,1-m}(-λ t^α)
                c * t.powi(-(m as i32)) * ml_eval(alpha, 1.0 - m as f64, z)?
            }
            DerivKind::FracDerivative(m) => {
                // I^α u has modes t^α E_{α,α+1}(-λ t^α)
                c * t.powf(alpha - m as f64) * ml_eval(alpha, alpha + 1.0 - m as f64, z)?
            }
            DerivKind::FracDerivativeShifted(m) => {
                let e = ml_eval(alpha, alpha + 1.0 - m as f64, z)?;
                c * t.powf(alpha - m as f64) * (e - recip_gamma(alpha + 1.0 - m as f64))
            }
        };
        Ok(amp)
    }

    /// Ḣ^{μ}-norm of the requested quantity at time t, computed directly in
    /// the M-orthonormal eigenbasis: (Σ_k λ_k^μ amp_k²)^{1/2}.
    pub fn norm_at(&self, t: f64, norm_mu: f64, quantity: DerivKind) -> Result<f64> {
        let mut s = 0.0;
        for k in 0..self.n_modes() {
            let a = self.mode_amplitude(k, t, quantity)?;
            s += self.lambdas[k].powf(norm_mu) * a * a;
        }
        Ok(s.sqrt())
    }

    /// Coefficient vector at an arbitrary time.
    pub fn state_at(&self, t: f64) -> Result<DVector<f64>> {
        let mut v = DVector::zeros(self.spatial.mass().n());
        for k in 0..self.n_modes() {
            let a = self.mode_amplitude(k, t, DerivKind::Value)?;
            v.axpy(a, self.spatial.eigenvector(k), 1.0);
        }
        Ok(v)
    }

    /// Materializes the trajectory at the mesh nodes.
    pub fn trajectory(&self) -> Result<Trajectory> {
        let mut states = Vec::with_capacity(self.mesh.n_steps() + 1);
        for &t in self.mesh.nodes() {
            states.push(self.state_at(t)?);
        }
        Ok(Trajectory {
            mesh: Arc::clone(&self.mesh),
            states,
            provenance: format!("spectral-oracle(modes={})", self.n_modes()),
        })
    }

    /// Analytic quantity series at the mesh nodes (node 0 excluded for the
    /// derivative kinds).
    pub fn quantity_series(&self, quantity: DerivKind) -> Result<VectorSeries> {
        let n_steps = self.mesh.n_steps();
        let dim = self.spatial.mass().n();
        let mut values = Vec::with_capacity(n_steps + 1);
        let first_valid = match quantity {
            DerivKind::Value | DerivKind::Shifted => 0,
            _ => 1,
        };
        for (n, &t) in self.mesh.nodes().iter().enumerate() {
            if n < first_valid {
                values.push(DVector::zeros(dim));
                continue;
            }
            let mut v = DVector::zeros(dim);
            for k in 0..self.n_modes() {
                let a = self.mode_amplitude(k, t, quantity)?;
                v.axpy(a, self.spatial.eigenvector(k), 1.0);
            }
            values.push(v);
        }
        Series::with_first_valid(Arc::clone(&self.mesh), values, first_valid)
    }
}

/// m-th time derivative of a trajectory by divided differences on the graded
/// mesh; m = 0 returns the trajectory's series unchanged. Node 0 is
/// undefined for m >= 1.
pub fn time_derivative(trajectory: &Trajectory, m: usize) -> Result<VectorSeries> {
    derivative_series(&trajectory.series(), m)
}

/// Fractional derivative ∂_t^{m-α} u = ∂_t^m I^α u of a trajectory: product
/// integration of I^α followed by m-th divided differences. Node 0 is
/// undefined.
pub fn frac_time_derivative(trajectory: &Trajectory, m: usize, alpha: f64) -> Result<VectorSeries> {
    if m < 1 {
        return Err(Error::invalid("frac_time_derivative", "m must be >= 1"));
    }
    let series = trajectory.series();
    let ia = frac_integral(alpha, &series)?;
    derivative_series(&ia, m)
}
