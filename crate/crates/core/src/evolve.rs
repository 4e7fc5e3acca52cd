//! Explicit time integration of vorticity transport `omega_t + v . grad omega = 0`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::elliptic::{BoundaryData, BoundaryValue, EllipticError, PoissonSolver};
use crate::fields::{
    d_r, d_theta, dirichlet_energy, integrate, velocity_from_stream, FieldError, Grid, GridKind, ScalarField,
};

#[derive(Debug, thiserror::Error)]
pub enum EvolveError {
    #[error("invalid evolution config: {0}")]
    InvalidConfig(String),
    #[error("time step {dt:e} exceeds the CFL limit {limit:e}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("vorticity blew up at t = {t} (max {max:e})")]
    Blowup { t: f64, max: f64 },
    #[error("evolution needs constant boundary values: {0}")]
    UnsupportedBoundary(String),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionConfig {
    /// Fixed step; `0` picks `cfl * h_min / max|v|`, refreshed every 10 steps.
    pub dt: f64,
    pub t_end: f64,
    pub cfl: f64,
    /// Steps between recorded samples.
    pub record_stride: usize,
    /// Steps between stored vorticity snapshots, if any.
    pub snapshot_stride: Option<usize>,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        EvolutionConfig { dt: 0.0, t_end: 1.0, cfl: 0.4, record_stride: 10, snapshot_stride: None }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(EvolveError::InvalidConfig(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(EvolveError::InvalidConfig(format!("cfl must lie in (0, 1), got {}", self.cfl)));
        }
        if !(self.dt >= 0.0 && self.dt.is_finite()) {
            return Err(EvolveError::InvalidConfig(format!("dt must be >= 0, got {}", self.dt)));
        }
        if self.record_stride == 0 || self.snapshot_stride == Some(0) {
            return Err(EvolveError::InvalidConfig("strides must be >= 1".into()));
        }
        Ok(())
    }
}

/// Exponential angular filter acting on the top third of the Fourier modes.
#[derive(Clone)]
struct SpectralFilter {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    sigma: Vec<f64>,
}

impl SpectralFilter {
    const STRENGTH: f64 = 36.0;
    const ORDER: i32 = 4;

    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let k_max = (n / 2) as f64;
        let k_cut = 2.0 * k_max / 3.0;
        let sigma = (0..n)
            .map(|k| {
                let kk = k.min(n - k) as f64;
                if kk <= k_cut {
                    1.0
                } else {
                    (-Self::STRENGTH * ((kk - k_cut) / (k_max - k_cut)).powi(Self::ORDER)).exp()
                }
            })
            .collect();
        SpectralFilter { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n), sigma }
    }

    fn apply(&self, f: &mut ScalarField) {
        let n = self.sigma.len();
        let scale = 1.0 / n as f64;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for row in f.values_mut().chunks_mut(n) {
            for (b, &v) in buf.iter_mut().zip(row.iter()) {
                *b = Complex64::new(v, 0.0);
            }
            self.forward.process(&mut buf);
            for (b, s) in buf.iter_mut().zip(&self.sigma) {
                *b *= s;
            }
            self.inverse.process(&mut buf);
            for (v, b) in row.iter_mut().zip(&buf) {
                *v = b.re * scale;
            }
        }
    }
}

/// Keeps the circulation around the inner circle fixed by adding a multiple
/// of the discrete harmonic `phi` (1 on the inner circle, 0 on the outer).
#[derive(Clone)]
struct InnerCirculation {
    phi: ScalarField,
    phi_circulation: f64,
    target: f64,
}

fn inner_circulation(u: &ScalarField) -> f64 {
    let g = u.grid();
    let r = g.radius(0);
    (0..g.n_theta()).map(|j| d_r(u, 0, j)).sum::<f64>() * r * g.dtheta()
}

/// Reusable state for stepping one flow.
#[derive(Clone)]
pub struct Evolver {
    grid: Arc<Grid>,
    solver: PoissonSolver,
    bc: BoundaryData,
    inner: Option<InnerCirculation>,
    filter: SpectralFilter,
}

impl Evolver {
    /// The circulation on the inner circle (annulus) is taken from the
    /// stream function of `omega0` with boundary data `bc`.
    pub fn new(omega0: &ScalarField, bc: &BoundaryData) -> Result<Self, EvolveError> {
        let grid = omega0.grid().clone();
        bc.validate(&grid)?;
        let outer = bc
            .outer
            .as_constant()
            .ok_or_else(|| EvolveError::UnsupportedBoundary("outer boundary is sampled".into()))?;
        let solver = PoissonSolver::new(&grid);
        let inner = match grid.kind() {
            GridKind::Disk => None,
            GridKind::Annulus => {
                let c = bc.inner.as_ref().and_then(BoundaryValue::as_constant).ok_or_else(|| {
                    EvolveError::UnsupportedBoundary("inner boundary is sampled".into())
                })?;
                let phi = solver.solve(&ScalarField::zeros(&grid), &BoundaryData::annulus(1.0, 0.0))?;
                let u0 = solver.solve(omega0, &BoundaryData::annulus(c, outer))?;
                Some(InnerCirculation { phi_circulation: inner_circulation(&phi), phi, target: inner_circulation(&u0) })
            }
        };
        let filter = SpectralFilter::new(grid.n_theta());
        let bc = match grid.kind() {
            GridKind::Disk => BoundaryData::disk(outer),
            GridKind::Annulus => BoundaryData::annulus(0.0, outer),
        };
        Ok(Evolver { grid, solver, bc, inner, filter })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Stream function of `omega` under the evolution boundary conditions.
    pub fn stream(&self, omega: &ScalarField) -> Result<ScalarField, EvolveError> {
        let mut u = self.solver.solve(omega, &self.bc)?;
        if let Some(ic) = &self.inner {
            let c = (ic.target - inner_circulation(&u)) / ic.phi_circulation;
            for (a, p) in u.values_mut().iter_mut().zip(ic.phi.values()) {
                *a += c * p;
            }
        }
        Ok(u)
    }

    /// `-(v . grad omega)` and the largest speed.
    fn tendency(&self, omega: &ScalarField) -> Result<(ScalarField, f64), EvolveError> {
        let u = self.stream(omega)?;
        let v = velocity_from_stream(&u);
        let g = &self.grid;
        let mut out = Vec::with_capacity(g.len());
        let mut speed: f64 = 0.0;
        for i in 0..g.n_r() {
            let r = g.radius(i);
            for j in 0..g.n_theta() {
                let (vr, vt) = (v.v_r.at(i, j), v.v_theta.at(i, j));
                speed = speed.max(vr.hypot(vt));
                out.push(-(vr * d_r(omega, i, j) + vt * d_theta(omega, i, j) / r));
            }
        }
        Ok((ScalarField::new(g.clone(), out)?, speed))
    }

    pub fn max_speed(&self, omega: &ScalarField) -> Result<f64, EvolveError> {
        Ok(velocity_from_stream(&self.stream(omega)?).max_speed())
    }

    /// `h_min / max|v|`, infinite for a fluid at rest.
    pub fn cfl_limit(&self, omega: &ScalarField) -> Result<f64, EvolveError> {
        let s = self.max_speed(omega)?;
        Ok(if s > 0.0 { self.grid.min_spacing() / s } else { f64::INFINITY })
    }

    /// One classical Runge-Kutta step followed by the angular filter.
    pub fn step(&self, omega: &ScalarField, dt: f64) -> Result<ScalarField, EvolveError> {
        let axpy = |a: &ScalarField, s: f64, k: &ScalarField| a.zip_map(k, |x, y| x + s * y);
        let (k1, _) = self.tendency(omega)?;
        let (k2, _) = self.tendency(&axpy(omega, 0.5 * dt, &k1)?)?;
        let (k3, _) = self.tendency(&axpy(omega, 0.5 * dt, &k2)?)?;
        let (k4, _) = self.tendency(&axpy(omega, dt, &k3)?)?;
        let mut next = omega.clone();
        let vals = next.values_mut();
        let (a, b, c, d) = (k1.values(), k2.values(), k3.values(), k4.values());
        for k in 0..vals.len() {
            vals[k] += dt / 6.0 * (a[k] + 2.0 * b[k] + 2.0 * c[k] + d[k]);
        }
        self.filter.apply(&mut next);
        Ok(next)
    }
}

/// Single step from scratch; see [`Evolver`] for repeated stepping.
pub fn step(omega: &ScalarField, bc: &BoundaryData, dt: f64) -> Result<ScalarField, EvolveError> {
    let ev = Evolver::new(omega, bc)?;
    let limit = ev.cfl_limit(omega)?;
    if dt > limit {
        return Err(EvolveError::CflViolation { dt, limit });
    }
    ev.step(omega, dt)
}

/// Returned by observers at every recorded sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Observation {
    pub stop: bool,
    /// `(omega_plus, omega_minus)` to store in the trajectory.
    pub angles: Option<(f64, f64)>,
}

pub trait Observer {
    fn observe(&mut self, t: f64, omega: &ScalarField, u: &ScalarField) -> Observation;
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub enstrophy: Vec<f64>,
    /// NaN where no observer supplied a value.
    pub omega_plus: Vec<f64>,
    pub omega_minus: Vec<f64>,
    pub snapshots: Vec<(f64, ScalarField)>,
    pub final_omega: ScalarField,
    pub steps: usize,
    pub stopped_early: bool,
}

/// Integrates to `config.t_end`, recording every `record_stride` steps and
/// at the final time.
pub fn evolve(
    omega0: &ScalarField,
    bc: &BoundaryData,
    config: &EvolutionConfig,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory, EvolveError> {
    config.validate()?;
    let ev = Evolver::new(omega0, bc)?;
    let w_max0 = omega0.max_abs();
    let mut traj = Trajectory {
        times: Vec::new(),
        energy: Vec::new(),
        enstrophy: Vec::new(),
        omega_plus: Vec::new(),
        omega_minus: Vec::new(),
        snapshots: Vec::new(),
        final_omega: omega0.clone(),
        steps: 0,
        stopped_early: false,
    };
    let mut omega = omega0.clone();
    let mut t = 0.0;
    let mut dt = 0.0;
    let mut n = 0usize;
    let mut record = |t: f64, n: usize, omega: &ScalarField, traj: &mut Trajectory| -> Result<bool, EvolveError> {
        let u = ev.stream(omega)?;
        traj.times.push(t);
        traj.energy.push(dirichlet_energy(&u));
        traj.enstrophy.push(integrate(&omega.map(|w| w * w)));
        let mut stop = false;
        let mut angles = (f64::NAN, f64::NAN);
        for obs in observers.iter_mut() {
            let o = obs.observe(t, omega, &u);
            stop |= o.stop;
            if let Some(a) = o.angles {
                angles = a;
            }
        }
        traj.omega_plus.push(angles.0);
        traj.omega_minus.push(angles.1);
        if let Some(s) = config.snapshot_stride {
            if n % s == 0 {
                traj.snapshots.push((t, omega.clone()));
            }
        }
        Ok(stop)
    };

    if record(0.0, 0, &omega, &mut traj)? {
        traj.stopped_early = true;
        return Ok(traj);
    }
    while t < config.t_end {
        if n % 10 == 0 {
            let limit = ev.cfl_limit(&omega)?;
            dt = if config.dt > 0.0 {
                if config.dt > limit {
                    return Err(EvolveError::CflViolation { dt: config.dt, limit });
                }
                config.dt
            } else if limit.is_finite() {
                config.cfl * limit
            } else {
                config.t_end
            };
        }
        let last = t + dt >= config.t_end * (1.0 - 1e-12);
        let h = if last { config.t_end - t } else { dt };
        omega = ev.step(&omega, h)?;
        t = if last { config.t_end } else { t + h };
        n += 1;
        let w_max = omega.max_abs();
        if w_max0 > 0.0 && w_max > 1e6 * w_max0 {
            return Err(EvolveError::Blowup { t, max: w_max });
        }
        if (n % config.record_stride == 0 || last) && record(t, n, &omega, &mut traj)? {
            traj.stopped_early = !last;
            break;
        }
    }
    traj.steps = n;
    traj.final_omega = omega;
    Ok(traj)
}

/// `omega + eps * sin(m theta) * psi(r)`.
pub fn perturb(omega: &ScalarField, eps: f64, m: u32, psi: impl Fn(f64) -> f64) -> ScalarField {
    let g = omega.grid();
    let bump = ScalarField::from_polar(g, |r, t| eps * (m as f64 * t).sin() * psi(r));
    omega + &bump
}
