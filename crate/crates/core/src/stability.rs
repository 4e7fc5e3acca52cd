//! Angle functionals of near-radial vorticity, velocity Jacobians and the
//! perturbation growth and escape experiments on the annulus.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2};

use crate::elliptic::BoundaryData;
use crate::evolve::{evolve, perturb, EvolutionConfig, EvolveError, Evolver, Observation, Observer, Trajectory};
use crate::fields::{d_r, d_theta, gradient, CartesianSampler, ScalarField, VectorField};
use crate::steady::{radial_instability_hypothesis, SteadyError};

#[derive(Debug, thiserror::Error)]
pub enum StabilityError {
    #[error("gradient too small ({min:e}) for the angle ratio")]
    GradientDegenerate { min: f64 },
    #[error("field is not increasing in r at row {row}, column {col}")]
    NotMonotoneRadial { row: usize, col: usize },
    #[error("could not tell which of omega+ and -omega- dominates: {0}")]
    BranchUndetermined(String),
    #[error("base vorticity fails the monotone radial hypothesis")]
    HypothesisFailed,
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Steady(#[from] SteadyError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleFunctionals {
    pub h_plus: f64,
    pub h_minus: f64,
    pub h_star: f64,
    pub argmax: [f64; 2],
    pub argmin: [f64; 2],
}

/// Quadratic least-squares fit on the 3x3 index neighbourhood of
/// `(i, j)`; returns the stationary value and its index offset when it is
/// an extremum of the requested kind inside the stencil.
fn refine_2d(q: &dyn Fn(usize, usize) -> f64, i: usize, j: usize, n: usize, maximize: bool) -> Option<(f64, f64, f64)> {
    let mut a = DMatrix::<f64>::zeros(9, 6);
    let mut b = DVector::<f64>::zeros(9);
    let mut k = 0;
    for di in -1i64..=1 {
        for dj in -1i64..=1 {
            let (x, y) = (di as f64, dj as f64);
            a.row_mut(k).copy_from_slice(&[1.0, x, y, x * x, x * y, y * y]);
            let jj = (j as i64 + dj).rem_euclid(n as i64) as usize;
            b[k] = q((i as i64 + di) as usize, jj);
            k += 1;
        }
    }
    let c = a.svd(true, true).solve(&b, 1e-14).ok()?;
    let hess = Matrix2::new(2.0 * c[3], c[4], c[4], 2.0 * c[5]);
    let det = hess.determinant();
    let definite = det > 0.0 && if maximize { hess[(0, 0)] < 0.0 } else { hess[(0, 0)] > 0.0 };
    if !definite {
        return None;
    }
    let p = hess.try_inverse()? * nalgebra::Vector2::new(-c[1], -c[2]);
    if p[0].abs() > 1.0 || p[1].abs() > 1.0 {
        return None;
    }
    Some((c[0] + 0.5 * (c[1] * p[0] + c[2] * p[1]), p[0], p[1]))
}

/// Three-point parabola in the angular direction.
fn refine_1d(q: &dyn Fn(usize, usize) -> f64, i: usize, j: usize, n: usize, maximize: bool) -> Option<(f64, f64)> {
    let (a, b, c) = (q(i, (j + n - 1) % n), q(i, j), q(i, (j + 1) % n));
    let curv = a - 2.0 * b + c;
    if (maximize && curv >= 0.0) || (!maximize && curv <= 0.0) {
        return None;
    }
    let s = 0.5 * (a - c) / curv;
    Some((b - 0.25 * (a - c) * s, s))
}

/// `sup` and `inf` of `q = (r^-1 d_theta h) / |grad h|` over interior rows.
///
/// The discrete extrema are refined by a local quadratic fit so that the
/// values move smoothly as features drift between nodes.
pub fn angle_functionals(h: &ScalarField, grad_tol: f64) -> Result<AngleFunctionals, StabilityError> {
    let g = h.grid();
    let n = g.n_theta();
    let rows: Vec<usize> = g.interior_rows().collect();
    let mut q = vec![0.0; g.len()];
    let mut min_grad = f64::INFINITY;
    for &i in &rows {
        let r = g.radius(i);
        for j in 0..n {
            let hr = d_r(h, i, j);
            if !(hr > 0.0) {
                return Err(StabilityError::NotMonotoneRadial { row: i, col: j });
            }
            let ht = d_theta(h, i, j) / r;
            let norm = hr.hypot(ht);
            min_grad = min_grad.min(norm);
            q[i * n + j] = ht / norm;
        }
    }
    if !(min_grad > grad_tol) {
        return Err(StabilityError::GradientDegenerate { min: min_grad });
    }
    let qf = |i: usize, j: usize| q[i * n + j];
    let (first, last) = (rows[0], rows[rows.len() - 1]);

    let extremum = |maximize: bool| -> (f64, [f64; 2]) {
        let mut best = (0usize, 0usize);
        let mut val = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
        for &i in &rows {
            for j in 0..n {
                let v = qf(i, j);
                if (maximize && v > val) || (!maximize && v < val) {
                    val = v;
                    best = (i, j);
                }
            }
        }
        let (i, j) = best;
        let (mut di, mut dj) = (0.0, 0.0);
        if i > first && i < last {
            if let Some((v, a, b)) = refine_2d(&qf, i, j, n, maximize) {
                val = v;
                di = a;
                dj = b;
            }
        } else if let Some((v, b)) = refine_1d(&qf, i, j, n, maximize) {
            val = v;
            dj = b;
        }
        let r = g.radius(i) + di * g.dr();
        let t = (j as f64 + dj) * g.dtheta();
        (val, [r * t.cos(), r * t.sin()])
    };
    let (h_plus, argmax) = extremum(true);
    let (h_minus, argmin) = extremum(false);
    // Exactly radial fields have q identically zero; keep that exact.
    let (h_plus, h_minus) = if q.iter().all(|&v| v == 0.0) { (0.0, 0.0) } else { (h_plus, h_minus) };
    Ok(AngleFunctionals { h_plus, h_minus, h_star: h_plus - h_minus, argmax, argmin })
}

pub type Mat2 = [[f64; 2]; 2];

/// Centered-difference Jacobian `J[a][b] = d v_a / d x_b` of the Cartesian
/// velocity, differentiating the cubic interpolant with step `step`.
pub fn jacobian_with(s: &CartesianSampler, x: [f64; 2], step: f64) -> Mat2 {
    let mut j = [[0.0; 2]; 2];
    for b in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[b] += step;
        xm[b] -= step;
        let (vp, vm) = (s.sample(xp[0], xp[1]), s.sample(xm[0], xm[1]));
        for a in 0..2 {
            j[a][b] = (vp[a] - vm[a]) / (2.0 * step);
        }
    }
    j
}

pub fn jacobian_at(v: &VectorField, x: [f64; 2]) -> Mat2 {
    let step = 0.25 * v.grid().dr();
    jacobian_with(&v.sampler(), x, step)
}

/// Jacobian expressed in the local `(e_r, e_theta)` frame, minus the solid
/// rotation at angular speed `v_theta / r`. For a radial flow this is
/// `[[0, 0], [a, 0]]` with `a = d v_theta/dr - v_theta/r`.
pub fn corotating_jacobian(v: &VectorField, x: [f64; 2]) -> Mat2 {
    let s = v.sampler();
    let j = jacobian_with(&s, x, 0.25 * v.grid().dr());
    let r = x[0].hypot(x[1]);
    let (c, sn) = (x[0] / r, x[1] / r);
    let rot = Matrix2::new(c, -sn, sn, c);
    let jm = Matrix2::new(j[0][0], j[0][1], j[1][0], j[1][1]);
    let local = rot.transpose() * jm * rot;
    let vel = s.sample(x[0], x[1]);
    let omega = (-sn * vel[0] + c * vel[1]) / r;
    [[local[(0, 0)], local[(0, 1)] + omega], [local[(1, 0)] - omega, local[(1, 1)]]]
}

/// Probe-set check of `d/dt grad omega(X(t)) = -J^T grad omega` along
/// particle paths over one step `dt`. Returns the largest deviation
/// divided by the largest `|J^T grad omega|` (the raw deviation when the
/// latter vanishes).
pub fn vorticity_gradient_transport_check(
    omega: &ScalarField,
    bc: &BoundaryData,
    dt: f64,
) -> Result<f64, StabilityError> {
    let g = omega.grid();
    let ev = Evolver::new(omega, bc)?;
    let u = ev.stream(omega)?;
    let v = crate::fields::velocity_from_stream(&u);
    let vs = v.sampler();
    let omega1 = ev.step(omega, dt)?;
    let grad0 = gradient(omega).to_cartesian();
    let grad1 = gradient(&omega1).to_cartesian();
    let gs0 = CartesianSampler::from_components(grad0.0, grad0.1);
    let gs1 = CartesianSampler::from_components(grad1.0, grad1.1);

    let (r0, r1) = (g.r_inner(), g.r_outer());
    let margin = 0.15 * (r1 - r0);
    let step = 0.25 * g.dr();
    let (mut dev, mut scale) = (0.0f64, 0.0f64);
    for a in 0..10 {
        let r = r0 + margin + (r1 - r0 - 2.0 * margin) * a as f64 / 9.0;
        for b in 0..10 {
            let t = 2.0 * PI * (b as f64 + 0.5) / 10.0;
            let x = [r * t.cos(), r * t.sin()];
            // Particle position after dt, classical RK4 on the frozen field.
            let f = |p: [f64; 2]| vs.sample(p[0], p[1]);
            let k1 = f(x);
            let k2 = f([x[0] + 0.5 * dt * k1[0], x[1] + 0.5 * dt * k1[1]]);
            let k3 = f([x[0] + 0.5 * dt * k2[0], x[1] + 0.5 * dt * k2[1]]);
            let k4 = f([x[0] + dt * k3[0], x[1] + dt * k3[1]]);
            let y = [
                x[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                x[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
            ];
            let g0 = gs0.sample(x[0], x[1]);
            let g1 = gs1.sample(y[0], y[1]);
            let j = jacobian_with(&vs, x, step);
            let rhs = [-(j[0][0] * g0[0] + j[1][0] * g0[1]), -(j[0][1] * g0[0] + j[1][1] * g0[1])];
            let lhs = [(g1[0] - g0[0]) / dt, (g1[1] - g0[1]) / dt];
            dev = dev.max((lhs[0] - rhs[0]).hypot(lhs[1] - rhs[1]));
            scale = scale.max(rhs[0].hypot(rhs[1]));
        }
    }
    Ok(if scale > 0.0 { dev / scale } else { dev })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

#[derive(Debug, Clone)]
pub struct GrowthReport {
    pub times: Vec<f64>,
    pub omega_plus: Vec<f64>,
    pub omega_minus: Vec<f64>,
    /// Least-squares slope of `log` of the dominant functional over the fit window.
    pub c0: f64,
    /// Forward difference over the first recorded stride.
    pub d_omega_plus_dt0: f64,
    pub branch: Branch,
    /// Number of samples in the fit window.
    pub window: usize,
    pub trajectory: Trajectory,
}

impl GrowthReport {
    /// Dominant functional: `omega+` on the plus branch, `-omega-` otherwise.
    pub fn dominant(&self) -> Vec<f64> {
        match self.branch {
            Branch::Plus => self.omega_plus.clone(),
            Branch::Minus => self.omega_minus.iter().map(|v| -v).collect(),
        }
    }
}

struct AngleObserver {
    grad_tol: f64,
    error: Option<StabilityError>,
}

impl Observer for AngleObserver {
    fn observe(&mut self, _t: f64, omega: &ScalarField, _u: &ScalarField) -> Observation {
        match angle_functionals(omega, self.grad_tol) {
            Ok(a) => Observation { stop: false, angles: Some((a.h_plus, a.h_minus)) },
            Err(e) => {
                self.error = Some(e);
                Observation { stop: true, angles: None }
            }
        }
    }
}

fn check_base(omega_tilde: &ScalarField) -> Result<(), StabilityError> {
    if !radial_instability_hypothesis(omega_tilde)?.pass {
        return Err(StabilityError::HypothesisFailed);
    }
    Ok(())
}

/// Evolves `omega_tilde + eps sin(m theta) psi(r)` and measures the growth
/// of the dominant angle functional.
pub fn growth_experiment(
    omega_tilde: &ScalarField,
    bc: &BoundaryData,
    eps: f64,
    m: u32,
    psi: impl Fn(f64) -> f64,
    config: &EvolutionConfig,
) -> Result<GrowthReport, StabilityError> {
    check_base(omega_tilde)?;
    let omega0 = perturb(omega_tilde, eps, m, psi);
    let mut obs = AngleObserver { grad_tol: 0.0, error: None };
    let traj = evolve(&omega0, bc, config, &mut [&mut obs])?;
    if let Some(e) = obs.error {
        return Err(e);
    }
    let times = traj.times.clone();
    let (wp, wm) = (traj.omega_plus.clone(), traj.omega_minus.clone());
    if times.len() < 3 {
        return Err(StabilityError::BranchUndetermined("fewer than three samples".into()));
    }

    let scale = wp[0].abs().max(wm[0].abs()).max(f64::MIN_POSITIVE);
    let (d0, d1) = (wp[0] + wm[0], wp[1] + wm[1]);
    let tiny = 1e-12 * scale;
    if d1.abs() <= tiny {
        return Err(StabilityError::BranchUndetermined(format!("omega+ + omega- = {d1:e} after one stride")));
    }
    if d0.abs() > tiny && d0.signum() != d1.signum() {
        return Err(StabilityError::BranchUndetermined("omega+ + omega- changed sign in the first stride".into()));
    }
    let branch = if d1 > 0.0 { Branch::Plus } else { Branch::Minus };

    let dom: Vec<f64> = match branch {
        Branch::Plus => wp.clone(),
        Branch::Minus => wm.iter().map(|v| -v).collect(),
    };
    // Window: until the dominant functional doubles or the branch flips.
    let mut window = 1;
    while window < times.len() {
        let k = window;
        let holds = match branch {
            Branch::Plus => wp[k] > -wm[k],
            Branch::Minus => -wm[k] > wp[k],
        };
        if !holds || dom[k] <= 0.0 {
            break;
        }
        window += 1;
        if dom[k] >= 2.0 * dom[0] {
            break;
        }
    }
    let c0 = if window >= 2 {
        let ts = &times[..window];
        let ls: Vec<f64> = dom[..window].iter().map(|v| v.ln()).collect();
        let tm = ts.iter().sum::<f64>() / window as f64;
        let lm = ls.iter().sum::<f64>() / window as f64;
        let num: f64 = ts.iter().zip(&ls).map(|(t, l)| (t - tm) * (l - lm)).sum();
        let den: f64 = ts.iter().map(|t| (t - tm) * (t - tm)).sum();
        num / den
    } else {
        f64::NAN
    };
    let d_omega_plus_dt0 = (wp[1] - wp[0]) / (times[1] - times[0]);
    Ok(GrowthReport { times, omega_plus: wp, omega_minus: wm, c0, d_omega_plus_dt0, branch, window, trajectory: traj })
}

/// Max norms of a perturbation and of its first and second derivatives.
pub fn c2_gauge(diff: &ScalarField) -> f64 {
    let g = diff.grid();
    let n = g.n_theta();
    let (h, dt) = (g.dr(), g.dtheta());
    let mut m0: f64 = 0.0;
    let mut m1: f64 = 0.0;
    let mut m2: f64 = 0.0;
    let grad = gradient(diff);
    for i in 0..g.n_r() {
        let r = g.radius(i);
        for j in 0..n {
            m0 = m0.max(diff.at(i, j).abs());
            m1 = m1.max(grad.v_r.at(i, j).abs()).max(grad.v_theta.at(i, j).abs());
            let (jp, jm) = ((j + 1) % n, (j + n - 1) % n);
            let tt = (diff.at(i, jp) - 2.0 * diff.at(i, j) + diff.at(i, jm)) / (dt * dt * r * r);
            m2 = m2.max(tt.abs());
            if !g.is_boundary_row(i) || g.kind() == crate::fields::GridKind::Disk && i + 1 < g.n_r() {
                let up = diff.at(i + 1, j);
                let dn = diff.at_ext(i as isize - 1, j);
                let rr = (up - 2.0 * diff.at(i, j) + dn) / (h * h);
                let rt = (diff.at(i + 1, jp) - diff.at(i + 1, jm) - diff.at_ext(i as isize - 1, jp)
                    + diff.at_ext(i as isize - 1, jm))
                    / (4.0 * h * dt * r);
                m2 = m2.max(rr.abs()).max(rt.abs());
            }
        }
    }
    m0.max(m1).max(m2)
}

#[derive(Debug, Clone)]
pub struct EscapeReport {
    pub escaped: bool,
    pub t_escape: Option<f64>,
    pub times: Vec<f64>,
    pub gauge: Vec<f64>,
    pub omega_plus: Vec<f64>,
    pub omega_minus: Vec<f64>,
    pub trajectory: Trajectory,
}

struct EscapeObserver<'a> {
    base: &'a ScalarField,
    delta: f64,
    gauge: Vec<f64>,
    t_escape: Option<f64>,
    angles: AngleObserver,
}

impl Observer for EscapeObserver<'_> {
    fn observe(&mut self, t: f64, omega: &ScalarField, u: &ScalarField) -> Observation {
        let n = c2_gauge(&(omega - self.base));
        self.gauge.push(n);
        let mut o = self.angles.observe(t, omega, u);
        if o.stop {
            // Outside the monotone regime the angle ratio is undefined;
            // the gauge is still meaningful.
            self.angles.error = None;
            o = Observation { stop: false, angles: Some((f64::NAN, f64::NAN)) };
        }
        if t > 0.0 && n > self.delta && self.t_escape.is_none() {
            self.t_escape = Some(t);
            o.stop = true;
        }
        o
    }
}

/// Runs until the C2 gauge of `omega(t) - omega_tilde` exceeds `delta` or
/// `config.t_end` is reached.
pub fn escape_experiment(
    omega_tilde: &ScalarField,
    bc: &BoundaryData,
    eps: f64,
    m: u32,
    psi: impl Fn(f64) -> f64,
    delta: f64,
    config: &EvolutionConfig,
) -> Result<EscapeReport, StabilityError> {
    check_base(omega_tilde)?;
    let omega0 = perturb(omega_tilde, eps, m, psi);
    let mut obs = EscapeObserver {
        base: omega_tilde,
        delta,
        gauge: Vec::new(),
        t_escape: None,
        angles: AngleObserver { grad_tol: 0.0, error: None },
    };
    let traj = evolve(&omega0, bc, config, &mut [&mut obs])?;
    Ok(EscapeReport {
        escaped: obs.t_escape.is_some(),
        t_escape: obs.t_escape,
        times: traj.times.clone(),
        gauge: obs.gauge,
        omega_plus: traj.omega_plus.clone(),
        omega_minus: traj.omega_minus.clone(),
        trajectory: traj,
    })
}

/// Shear pattern of a near-radial flow: the radial derivative of the
/// angular velocity component dominates, the other polar derivatives are
/// small.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShearPattern {
    pub min_dvt_dr: f64,
    /// Largest of `|r^-1 d_theta v_theta|`, `|r^-1 d_theta v_r|`, `|d_r v_r|`.
    pub max_other: f64,
}

impl ShearPattern {
    pub fn holds(&self, delta: f64, omega_plus: f64, omega_minus: f64, k: f64) -> bool {
        self.min_dvt_dr.abs() > 1.0 && self.max_other <= k * (delta + omega_plus.abs() + omega_minus.abs())
    }
}

/// Evaluated on interior rows.
pub fn shear_pattern(v: &VectorField) -> ShearPattern {
    let g = v.grid();
    let (mut lo, mut other) = (f64::INFINITY, 0.0f64);
    for i in g.interior_rows() {
        let r = g.radius(i);
        for j in 0..g.n_theta() {
            lo = lo.min(d_r(&v.v_theta, i, j).abs());
            other = other
                .max((d_theta(&v.v_theta, i, j) / r).abs())
                .max((d_theta(&v.v_r, i, j) / r).abs())
                .max(d_r(&v.v_r, i, j).abs());
        }
    }
    ShearPattern { min_dvt_dr: lo, max_other: other }
}
