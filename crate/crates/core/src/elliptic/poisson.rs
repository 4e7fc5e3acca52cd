use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{BoundaryData, EllipticError};
use crate::fields::{Grid, ScalarField};
use crate::rearrange::MonotoneProfile;

/// Direct solver for `laplacian(u) = omega` with Dirichlet rows.
///
/// Angular FFT, then one tridiagonal radial solve per Fourier mode using the
/// same conservative stencil as [`crate::fields::laplacian`], so the
/// discrete Laplacian of the result reproduces `omega` on interior rows up
/// to round-off.
#[derive(Clone)]
pub struct PoissonSolver {
    grid: Arc<Grid>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    eigen: Vec<f64>,
}

impl std::fmt::Debug for PoissonSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PoissonSolver").field("grid", &self.grid).finish_non_exhaustive()
    }
}

impl PoissonSolver {
    pub fn new(grid: &Arc<Grid>) -> Self {
        let n = grid.n_theta();
        let mut planner = FftPlanner::new();
        let dt = grid.dtheta();
        let eigen = (0..n).map(|k| (2.0 - 2.0 * (k as f64 * dt).cos()) / (dt * dt)).collect();
        PoissonSolver {
            grid: grid.clone(),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            eigen,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn solve(&self, omega: &ScalarField, bc: &BoundaryData) -> Result<ScalarField, EllipticError> {
        let g = &self.grid;
        if !g.same_shape(omega.grid()) {
            return Err(crate::fields::FieldError::GridMismatch.into());
        }
        bc.validate(g)?;
        let (n_r, n) = (g.n_r(), g.n_theta());
        let h2 = g.dr() * g.dr();

        // Right-hand side per row in Fourier space; boundary rows hold the data.
        let mut spec = vec![Complex64::new(0.0, 0.0); n_r * n];
        for i in 0..n_r {
            let row = &mut spec[i * n..(i + 1) * n];
            for j in 0..n {
                let v = if g.is_boundary_row(i) { bc.row_value(g, i, j) } else { omega.at(i, j) };
                row[j] = Complex64::new(v, 0.0);
            }
            self.forward.process(row);
        }

        let rows: Vec<usize> = g.interior_rows().collect();
        let m = rows.len();
        let mut lower = vec![0.0; m];
        let mut upper = vec![0.0; m];
        for (a, &i) in rows.iter().enumerate() {
            let r = g.radius(i);
            lower[a] = if i == 0 { 0.0 } else { g.face(i - 1) / (r * h2) };
            upper[a] = g.face(i) / (r * h2);
        }
        let mut cp = vec![0.0; m];
        let mut dp = vec![Complex64::new(0.0, 0.0); m];
        for k in 0..n {
            let lam = self.eigen[k];
            // Thomas algorithm. Known neighbours move to the right-hand side.
            for (a, &i) in rows.iter().enumerate() {
                let r = g.radius(i);
                let diag = -(lower[a] + upper[a]) - lam / (r * r);
                let mut rhs = spec[i * n + k];
                if a == 0 && i > 0 {
                    rhs -= lower[a] * spec[(i - 1) * n + k];
                }
                if a + 1 == m {
                    rhs -= upper[a] * spec[(i + 1) * n + k];
                }
                let (l, denom_prev_c, prev_d) = if a == 0 {
                    (0.0, 0.0, Complex64::new(0.0, 0.0))
                } else {
                    (lower[a], cp[a - 1], dp[a - 1])
                };
                let denom = diag - l * denom_prev_c;
                cp[a] = if a + 1 < m { upper[a] / denom } else { 0.0 };
                dp[a] = (rhs - l * prev_d) / denom;
            }
            for a in (0..m).rev() {
                let next = if a + 1 < m { spec[rows[a + 1] * n + k] } else { Complex64::new(0.0, 0.0) };
                spec[rows[a] * n + k] = dp[a] - cp[a] * next;
            }
        }

        let scale = 1.0 / n as f64;
        let mut out = vec![0.0; n_r * n];
        for i in 0..n_r {
            if g.is_boundary_row(i) {
                for j in 0..n {
                    out[i * n + j] = bc.row_value(g, i, j);
                }
                continue;
            }
            let row = &mut spec[i * n..(i + 1) * n];
            self.inverse.process(row);
            for j in 0..n {
                out[i * n + j] = row[j].re * scale;
            }
        }
        Ok(ScalarField::new(g.clone(), out)?)
    }
}

/// One-off Poisson solve. Use [`PoissonSolver`] when solving repeatedly on
/// the same grid.
pub fn solve_poisson(grid: &Arc<Grid>, omega: &ScalarField, bc: &BoundaryData) -> Result<ScalarField, EllipticError> {
    PoissonSolver::new(grid).solve(omega, bc)
}

#[derive(Debug, Clone, Copy)]
pub struct SemilinearOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub damping: f64,
}

impl Default for SemilinearOptions {
    fn default() -> Self {
        SemilinearOptions { tol: 1e-9, max_iters: 500, damping: 0.8 }
    }
}

#[derive(Debug, Clone)]
pub struct SemilinearSolution {
    pub u: ScalarField,
    /// `max |laplacian(u) - f(u)|` over interior rows.
    pub residual: f64,
    pub iterations: usize,
}

/// Picard iteration for `laplacian(u) = f(u)`.
///
/// Switches to damped updates once the update norm stops shrinking.
pub fn solve_semilinear(
    grid: &Arc<Grid>,
    f: &MonotoneProfile,
    bc: &BoundaryData,
    u0: &ScalarField,
    opts: SemilinearOptions,
) -> Result<SemilinearSolution, EllipticError> {
    let solver = PoissonSolver::new(grid);
    let mut u = u0.clone();
    let mut beta: f64 = 1.0;
    let mut last_update = f64::INFINITY;
    for k in 1..=opts.max_iters {
        let next = solver.solve(&f.apply(&u), bc)?;
        let step = next.max_abs_diff(&u);
        if step > last_update && beta == 1.0 {
            beta = opts.damping;
        }
        u = if beta == 1.0 { next } else { u.zip_map(&next, |a, b| a + beta * (b - a))? };
        last_update = step;
        if step < opts.tol {
            let residual = semilinear_residual(&u, f);
            return Ok(SemilinearSolution { u, residual, iterations: k });
        }
    }
    Err(EllipticError::NoConvergence { iterations: opts.max_iters, residual: semilinear_residual(&u, f) })
}

pub(crate) fn semilinear_residual(u: &ScalarField, f: &MonotoneProfile) -> f64 {
    crate::fields::laplacian(u).max_abs_diff_interior(&f.apply(u))
}
