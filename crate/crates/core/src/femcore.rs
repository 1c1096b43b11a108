//! One-dimensional continuous piecewise-linear finite elements on Ω = (0,1)
//! with homogeneous Dirichlet conditions.
//!
//! Assembles mass, stiffness (variable scalar κ ≥ 1), advection ⟨f·w, v'⟩ and
//! reaction ⟨f·w, v⟩ matrices by 3-point Gauss quadrature per cell, and
//! provides the discrete Ḣ^μ norms ‖v‖_μ = (Σ_k λ_k^μ ⟨v, Mφ_k⟩²)^{1/2}
//! built from the generalized eigenproblem K φ = λ M φ.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Uniform spatial mesh on (0,1); degrees of freedom are the interior nodes.
#[derive(Debug, Clone)]
pub struct SpaceMesh {
    n_cells: usize,
}

impl SpaceMesh {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::invalid("SpaceMesh", "need at least 2 cells"));
        }
        Ok(SpaceMesh { n_cells })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    pub fn n_dofs(&self) -> usize {
        self.n_cells - 1
    }

    /// Coordinate of interior degree of freedom i (0-based).
    pub fn dof_x(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h()
    }
}

/// Tridiagonal matrix; all P1 operators on an interval are tridiagonal.
#[derive(Debug, Clone)]
pub struct TriDiag {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl TriDiag {
    pub fn zeros(n: usize) -> Self {
        TriDiag { sub: vec![0.0; n.saturating_sub(1)], diag: vec![0.0; n], sup: vec![0.0; n.saturating_sub(1)] }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, v: &DVector<f64>) -> DVector<f64> {
        let n = self.n();
        let mut out = DVector::zeros(n);
        for i in 0..n {
            let mut s = self.diag[i] * v[i];
            if i > 0 {
                s += self.sub[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                s += self.sup[i] * v[i + 1];
            }
            out[i] = s;
        }
        out
    }

    /// self += s * other
    pub fn add_scaled(&mut self, other: &TriDiag, s: f64) {
        for (a, b) in self.diag.iter_mut().zip(&other.diag) {
            *a += s * b;
        }
        for (a, b) in self.sub.iter_mut().zip(&other.sub) {
            *a += s * b;
        }
        for (a, b) in self.sup.iter_mut().zip(&other.sup) {
            *a += s * b;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.diag[i]
            } else if j + 1 == i {
                self.sub[j]
            } else if i + 1 == j {
                self.sup[i]
            } else {
                0.0
            }
        })
    }

    /// Thomas algorithm; falls back to pivoted dense LU if a pivot degenerates.
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.n();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut ok = true;
        let mut denom = self.diag[0];
        if denom.abs() < 1e-300 {
            ok = false;
        } else {
            c[0] = if n > 1 { self.sup[0] / denom } else { 0.0 };
            d[0] = rhs[0] / denom;
            for i in 1..n {
                denom = self.diag[i] - self.sub[i - 1] * c[i - 1];
                if denom.abs() < 1e-300 || !denom.is_finite() {
                    ok = false;
                    break;
                }
                if i + 1 < n {
                    c[i] = self.sup[i] / denom;
                }
                d[i] = (rhs[i] - self.sub[i - 1] * d[i - 1]) / denom;
            }
        }
        if ok {
            let mut x = DVector::zeros(n);
            x[n - 1] = d[n - 1];
            for i in (0..n - 1).rev() {
                x[i] = d[i] - c[i] * x[i + 1];
            }
            return Ok(x);
        }
        self.to_dense()
            .lu()
            .solve(rhs)
            .ok_or_else(|| Error::LinearSolveFailure { step: 0, message: "singular tridiagonal system".into() })
    }
}

/// Scalar coefficient of x only (the diffusivity κ).
pub type SpaceFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;
/// Space-time coefficient f(x, t).
pub type SpaceTimeFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A time-dependent coefficient together with its analytic time derivative,
/// needed by the integrated-by-parts memory operators.
pub struct TimeCoeff {
    pub value: SpaceTimeFn,
    pub d_time: SpaceTimeFn,
}

impl TimeCoeff {
    pub fn new(
        value: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        d_time: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TimeCoeff { value: Box::new(value), d_time: Box::new(d_time) }
    }
}

/// The coefficients of the continuous problem. `None` entries are
/// identically zero; F and G must carry one more time derivative than a, b.
pub struct CoefficientField {
    pub kappa: SpaceFn,
    pub advect_f: Option<TimeCoeff>,
    pub advect_g: Option<TimeCoeff>,
    pub react_a: Option<TimeCoeff>,
    pub react_b: Option<TimeCoeff>,
}

impl CoefficientField {
    pub fn diffusion_only(kappa: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        CoefficientField {
            kappa: Box::new(kappa),
            advect_f: None,
            advect_g: None,
            react_a: None,
            react_b: None,
        }
    }
}

const GAUSS_XI: [f64; 3] = [-0.7745966692414834, 0.0, 0.7745966692414834];
const GAUSS_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Loops cells, accumulating entries for the interior-dof system; the
/// callback receives (test dof, trial dof, phi_i, dphi_i, phi_j, dphi_j,
/// x, quad weight).
fn assemble_with(mesh: &SpaceMesh, mut kernel: impl FnMut(usize, usize, f64, f64, f64, f64, f64, f64)) {
    let h = mesh.h();
    let n = mesh.n_dofs();
    for cell in 0..mesh.n_cells() {
        let xl = cell as f64 * h;
        // local basis: phi_left = (xr - x)/h, phi_right = (x - xl)/h
        // global dof indices (None when the node is a Dirichlet boundary node)
        let left: Option<usize> = if cell == 0 { None } else { Some(cell - 1) };
        let right: Option<usize> = if cell == mesh.n_cells() - 1 { None } else { Some(cell) };
        for (xi, w) in GAUSS_XI.iter().zip(GAUSS_W.iter()) {
            let x = xl + 0.5 * h * (1.0 + xi);
            let wq = 0.5 * h * w;
            let pl = (xl + h - x) / h;
            let pr = (x - xl) / h;
            let dl = -1.0 / h;
            let dr = 1.0 / h;
            let locals = [(left, pl, dl), (right, pr, dr)];
            for &(gi, pi, dpi) in &locals {
                let Some(i) = gi else { continue };
                debug_assert!(i < n);
                for &(gj, pj, dpj) in &locals {
                    let Some(j) = gj else { continue };
                    kernel(i, j, pi, dpi, pj, dpj, x, wq);
                }
            }
        }
    }
}

/// Mass matrix ⟨w, v⟩.
pub fn mass_matrix(mesh: &SpaceMesh) -> TriDiag {
    let mut m = TriDiag::zeros(mesh.n_dofs());
    assemble_with(mesh, |i, j, pi, _, pj, _, _, wq| {
        add_entry(&mut m, i, j, wq * pi * pj);
    });
    m
}

/// Stiffness matrix ⟨κ w', v'⟩. Rejects κ < 1 at any quadrature point: the
/// problem is assumed rescaled so the minimal diffusivity is 1.
pub fn stiffness_matrix(mesh: &SpaceMesh, kappa: &SpaceFn) -> Result<TriDiag> {
    let mut k = TriDiag::zeros(mesh.n_dofs());
    let mut bad: Option<(f64, f64)> = None;
    assemble_with(mesh, |i, j, _, dpi, _, dpj, x, wq| {
        let kv = kappa(x);
        if kv < 1.0 - 1e-12 && bad.is_none() {
            bad = Some((x, kv));
        }
        add_entry(&mut k, i, j, wq * kv * dpi * dpj);
    });
    if let Some((x, value)) = bad {
        return Err(Error::CoefficientBound { x, value });
    }
    Ok(k)
}

/// Advection-type matrix C with (C w)_i = ⟨f(·,t) w, v_i'⟩.
pub fn advection_matrix(mesh: &SpaceMesh, f: &SpaceTimeFn, t: f64) -> TriDiag {
    let mut c = TriDiag::zeros(mesh.n_dofs());
    assemble_with(mesh, |i, j, _, dpi, pj, _, x, wq| {
        add_entry(&mut c, i, j, wq * f(x, t) * pj * dpi);
    });
    c
}

/// Reaction-type matrix R with (R w)_i = ⟨f(·,t) w, v_i⟩.
pub fn reaction_matrix(mesh: &SpaceMesh, f: &SpaceTimeFn, t: f64) -> TriDiag {
    let mut r = TriDiag::zeros(mesh.n_dofs());
    assemble_with(mesh, |i, j, pi, _, pj, _, x, wq| {
        add_entry(&mut r, i, j, wq * f(x, t) * pj * pi);
    });
    r
}

fn add_entry(m: &mut TriDiag, i: usize, j: usize, v: f64) {
    if i == j {
        m.diag[i] += v;
    } else if j + 1 == i {
        m.sub[j] += v;
    } else if i + 1 == j {
        m.sup[i] += v;
    } else {
        unreachable!("P1 coupling beyond neighbors");
    }
}

/// The matrices of the weak form at a fixed time.
pub struct AssembledSystem {
    pub mass: TriDiag,
    pub stiffness: TriDiag,
    pub advect_f: Option<TriDiag>,
    pub advect_g: Option<TriDiag>,
    pub react_a: Option<TriDiag>,
    pub react_b: Option<TriDiag>,
}

/// Assembles every matrix of the weak form at time t.
pub fn assemble(coeffs: &CoefficientField, mesh: &SpaceMesh, t: f64) -> Result<AssembledSystem> {
    Ok(AssembledSystem {
        mass: mass_matrix(mesh),
        stiffness: stiffness_matrix(mesh, &coeffs.kappa)?,
        advect_f: coeffs.advect_f.as_ref().map(|c| advection_matrix(mesh, &c.value, t)),
        advect_g: coeffs.advect_g.as_ref().map(|c| advection_matrix(mesh, &c.value, t)),
        react_a: coeffs.react_a.as_ref().map(|c| reaction_matrix(mesh, &c.value, t)),
        react_b: coeffs.react_b.as_ref().map(|c| reaction_matrix(mesh, &c.value, t)),
    })
}

/// Load vector ⟨f, v_i⟩ by 3-point Gauss quadrature.
pub fn load_vector(mesh: &SpaceMesh, f: impl Fn(f64) -> f64) -> DVector<f64> {
    let h = mesh.h();
    let n = mesh.n_dofs();
    let mut load = DVector::zeros(n);
    for cell in 0..mesh.n_cells() {
        let xl = cell as f64 * h;
        for (xi, w) in GAUSS_XI.iter().zip(GAUSS_W.iter()) {
            let x = xl + 0.5 * h * (1.0 + xi);
            let wq = 0.5 * h * w;
            let fv = f(x);
            if cell > 0 {
                load[cell - 1] += wq * fv * (xl + h - x) / h;
            }
            if cell < mesh.n_cells() - 1 {
                load[cell] += wq * fv * (x - xl) / h;
            }
        }
    }
    load
}

/// L₂ projection of a function onto the P1 space (mass solve of the load).
pub fn l2_projection(mesh: &SpaceMesh, f: impl Fn(f64) -> f64) -> Result<DVector<f64>> {
    mass_matrix(mesh).solve(&load_vector(mesh, f))
}

/// Eigenpairs of K φ = λ M φ, M-orthonormalized and sorted ascending; the
/// substrate of the Ḣ^μ norms.
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    /// columns φ_k with φ_iᵀ M φ_j = δ_ij
    eigenvectors: Vec<DVector<f64>>,
    mass: TriDiag,
}

impl SpectralDecomposition {
    pub fn new(stiffness: &TriDiag, mass: &TriDiag) -> Result<Self> {
        let n = mass.n();
        let m_dense = mass.to_dense();
        let chol = m_dense.cholesky().ok_or_else(|| {
            Error::invalid("SpectralDecomposition", "mass matrix is not positive definite")
        })?;
        let l = chol.l();
        // A = L^{-1} K L^{-T}, solved as two triangular sweeps.
        let y = l
            .solve_lower_triangular(&stiffness.to_dense())
            .ok_or_else(|| Error::invalid("SpectralDecomposition", "singular Cholesky factor"))?;
        let a = l
            .solve_lower_triangular(&y.transpose())
            .ok_or_else(|| Error::invalid("SpectralDecomposition", "singular Cholesky factor"))?;
        let a = (&a + a.transpose()) * 0.5;
        let eig = a.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let lt = l.transpose();
        let mut eigenvalues = Vec::with_capacity(n);
        let mut eigenvectors = Vec::with_capacity(n);
        for &k in &order {
            let y_k: DVector<f64> = eig.eigenvectors.column(k).into();
            let phi = lt
                .solve_upper_triangular(&y_k)
                .ok_or_else(|| Error::invalid("SpectralDecomposition", "singular Cholesky factor"))?;
            eigenvalues.push(eig.eigenvalues[k]);
            eigenvectors.push(phi);
        }
        if eigenvalues[0] <= 0.0 {
            return Err(Error::invalid(
                "SpectralDecomposition",
                format!("non-positive smallest eigenvalue {}", eigenvalues[0]),
            ));
        }
        Ok(SpectralDecomposition { eigenvalues, eigenvectors, mass: mass.clone() })
    }

    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.eigenvalues[k]
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, k: usize) -> &DVector<f64> {
        &self.eigenvectors[k]
    }

    pub fn mass(&self) -> &TriDiag {
        &self.mass
    }

    /// Modal coefficients c_k = ⟨v, Mφ_k⟩ of a coefficient vector.
    pub fn modal_coefficients(&self, v: &DVector<f64>) -> Vec<f64> {
        let mv = self.mass.matvec(v);
        self.eigenvectors.iter().map(|phi| phi.dot(&mv)).collect()
    }
}

/// Discrete Ḣ^μ norm ‖v‖_μ = (Σ_k λ_k^μ ⟨v, Mφ_k⟩²)^{1/2} for 0 <= μ <= 2.
pub fn hmu_norm(mu: f64, v: &DVector<f64>, spectral: &SpectralDecomposition) -> Result<f64> {
    if !(0.0..=2.0).contains(&mu) {
        return Err(Error::invalid("hmu_norm", format!("mu = {mu} must lie in [0,2]")));
    }
    let coeffs = spectral.modal_coefficients(v);
    let mut s = 0.0;
    for (lambda, c) in spectral.eigenvalues.iter().zip(&coeffs) {
        s += lambda.powf(mu) * c * c;
    }
    Ok(s.sqrt())
}
