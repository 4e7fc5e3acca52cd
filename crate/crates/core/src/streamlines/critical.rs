use nalgebra::{Complex, DMatrix, DVector, Matrix2, Vector2};

use super::{cell_size, StreamlineError};
use crate::fields::{CartesianSampler, GridKind, ScalarField, VectorField};

const DEGREE: usize = 5;
const SIGNIFICANT: f64 = 1e-3;

/// Zeros of the velocity: cells where both Cartesian components change
/// sign, refined by Newton on the interpolated field.
pub fn find_critical_points(v: &VectorField) -> Vec<[f64; 2]> {
    let g = v.grid().clone();
    let (vx, vy) = v.to_cartesian();
    let vmax = v.max_speed();
    if vmax == 0.0 {
        return Vec::new();
    }
    let s = CartesianSampler::from_components(vx.clone(), vy.clone());
    let n = g.n_theta();
    let straddles = |vals: &[f64]| {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lo <= 0.0 && hi >= 0.0
    };

    // (start, sign change found)
    let mut starts: Vec<([f64; 2], bool)> = Vec::new();
    if g.kind() == GridKind::Disk && straddles(vx.row(0)) && straddles(vy.row(0)) {
        starts.push(([0.0, 0.0], true));
    }
    for i in 0..g.n_r() - 1 {
        for j in 0..n {
            let jp = (j + 1) % n;
            let cx = [vx.at(i, j), vx.at(i, jp), vx.at(i + 1, j), vx.at(i + 1, jp)];
            let cy = [vy.at(i, j), vy.at(i, jp), vy.at(i + 1, j), vy.at(i + 1, jp)];
            if straddles(&cx) && straddles(&cy) {
                let r = 0.5 * (g.radius(i) + g.radius(i + 1));
                let t = (j as f64 + 0.5) * g.dtheta();
                starts.push(([r * t.cos(), r * t.sin()], true));
            }
        }
    }

    // Degenerate zeros need not flip the sign of either component; take
    // local minima of the speed as well.
    let speed = v.magnitude();
    for i in 1..g.n_r() - 1 {
        for j in 0..n {
            let c = speed.at(i, j);
            let lower = (-1i64..=1).all(|di| {
                (-1i64..=1).all(|dj| {
                    let jj = (j as i64 + dj).rem_euclid(n as i64) as usize;
                    (di == 0 && dj == 0) || speed.at((i as i64 + di) as usize, jj) > c
                })
            });
            if lower {
                starts.push((g.node_xy(i, j), false));
            }
        }
    }

    let mut found: Vec<([f64; 2], f64)> = Vec::new();
    // A degenerate zero of the exact field may survive discretization only
    // as a near-zero minimum of the speed, at the truncation error level.
    let h = g.dr() / g.r_outer();
    let floor = h * h * vmax;
    for (x0, sign_change) in starts {
        let size = cell_size(&g, x0[0].hypot(x0[1]));
        let x = match newton(&s, x0, size, vmax) {
            Some(x) => x,
            None if !sign_change => match min_speed(&s, x0, size) {
                Some((x, sp)) if sp <= floor => x,
                _ => continue,
            },
            None => continue,
        };
        let f = s.sample(x[0], x[1]);
        let res = f[0].hypot(f[1]);
        let r = x[0].hypot(x[1]);
        // Interpolation noise splits a degenerate zero into a cluster of
        // nearby roots; keep the one with the smallest speed.
        match found.iter_mut().find(|(p, _)| (p[0] - x[0]).hypot(p[1] - x[1]) <= 2.0 * cell_size(&g, r)) {
            Some(p) if res < p.1 => *p = (x, res),
            Some(_) => {}
            None => found.push((x, res)),
        }
    }
    found.into_iter().map(|p| p.0).collect()
}

fn jacobian(s: &CartesianSampler, x: [f64; 2], fd: f64) -> Matrix2<f64> {
    let mut j = Matrix2::zeros();
    for b in 0..2 {
        let mut xp = x;
        let mut xm = x;
        xp[b] += fd;
        xm[b] -= fd;
        let (fp, fm) = (s.sample(xp[0], xp[1]), s.sample(xm[0], xm[1]));
        for a in 0..2 {
            j[(a, b)] = (fp[a] - fm[a]) / (2.0 * fd);
        }
    }
    j
}

fn newton(s: &CartesianSampler, x0: [f64; 2], size: f64, vmax: f64) -> Option<[f64; 2]> {
    let g = s.grid();
    let fd = 0.05 * size;
    let mut x = x0;
    for _ in 0..40 {
        let f = s.sample(x[0], x[1]);
        if f[0].hypot(f[1]) <= 1e-13 * vmax {
            break;
        }
        let mut d = jacobian(s, x, fd).try_inverse()? * Vector2::new(-f[0], -f[1]);
        let len = d.norm();
        if len > size {
            d *= size / len;
        }
        x = [x[0] + d[0], x[1] + d[1]];
        if !g.contains(x[0], x[1]) {
            return None;
        }
        if len < 1e-13 * size {
            break;
        }
    }
    let f = s.sample(x[0], x[1]);
    let close = (x[0] - x0[0]).hypot(x[1] - x0[1]) <= 2.0 * size;
    (f[0].hypot(f[1]) <= 1e-6 * vmax && close).then_some(x)
}

/// Levenberg-Marquardt minimization of the speed. Returns the minimizer
/// and the speed there.
fn min_speed(s: &CartesianSampler, x0: [f64; 2], size: f64) -> Option<([f64; 2], f64)> {
    let g = s.grid();
    let fd = 0.05 * size;
    let speed = |x: [f64; 2]| {
        let f = s.sample(x[0], x[1]);
        f[0].hypot(f[1])
    };
    let mut x = x0;
    let mut cur = speed(x);
    let mut mu = 1e-3;
    for _ in 0..100 {
        let f = s.sample(x[0], x[1]);
        let j = jacobian(s, x, fd);
        let jtj = j.transpose() * j;
        let damp = mu * jtj.trace().max(f64::MIN_POSITIVE);
        let mut d = (jtj + Matrix2::identity() * damp).try_inverse()? * (j.transpose() * Vector2::new(-f[0], -f[1]));
        if d.norm() > size {
            d *= size / d.norm();
        }
        let y = [x[0] + d[0], x[1] + d[1]];
        if g.contains(y[0], y[1]) && speed(y) < cur {
            x = y;
            cur = speed(y);
            mu = (mu / 3.0).max(1e-12);
        } else {
            mu *= 4.0;
            if mu > 1e6 {
                break;
            }
        }
        if d.norm() < 1e-12 * size {
            break;
        }
    }
    ((x[0] - x0[0]).hypot(x[1] - x0[1]) <= 2.0 * size).then_some((x, cur))
}

/// Leading-order type of a stagnation point. Velocity is
/// `(-u_y, u_x)` in the principal frame of the Hessian of `u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalKind {
    /// Non-degenerate Hessian: `v = (a y2, b y1) + o(|y|)` with
    /// `u = (mu1 y1^2 + mu2 y2^2) / 2`, `a = -mu2`, `b = mu1`.
    Morse { a: f64, b: f64 },
    /// Vanishing Hessian: `v = (Im(a z^n), Re(a z^n)) + o(|z|^n)`.
    Harmonic { n: u32, a: Complex<f64> },
    /// Rank-one Hessian; `y1` runs along the degenerate direction:
    /// `v = (a y2 + o(y2), Re(alpha z^n) + ...)`.
    Degenerate { a: f64, alpha: Complex<f64>, n: u32 },
    /// Within one cell of the boundary.
    BoundaryDegenerate,
}

impl CriticalKind {
    pub fn label(&self) -> &'static str {
        match self {
            CriticalKind::Morse { .. } => "i",
            CriticalKind::Harmonic { .. } => "ii",
            CriticalKind::Degenerate { .. } => "iii",
            CriticalKind::BoundaryDegenerate => "boundary-degenerate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPointReport {
    pub location: [f64; 2],
    pub kind: CriticalKind,
    /// Ascending.
    pub hessian_eigenvalues: [f64; 2],
    /// RMS misfit of the local polynomial.
    pub residual: f64,
}

fn monomials() -> Vec<(usize, usize)> {
    let mut m = Vec::new();
    for k in 0..=DEGREE {
        for b in 0..=k {
            m.push((k - b, b));
        }
    }
    m
}

fn pw(x: f64, k: usize) -> f64 {
    x.powi(k as i32)
}

struct Fit {
    coef: DVector<f64>,
    residual: f64,
}

fn fit(u: &ScalarField, x0: [f64; 2], radius: f64, mons: &[(usize, usize)]) -> Result<Fit, StreamlineError> {
    let g = u.grid();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for i in 0..g.n_r() {
        if (g.radius(i) - x0[0].hypot(x0[1])).abs() > radius {
            continue;
        }
        for j in 0..g.n_theta() {
            let [x, y] = g.node_xy(i, j);
            let (xi, eta) = ((x - x0[0]) / radius, (y - x0[1]) / radius);
            if xi * xi + eta * eta <= 1.0 {
                rows.extend(mons.iter().map(|&(a, b)| pw(xi, a) * pw(eta, b)));
                rhs.push(u.at(i, j));
            }
        }
    }
    let m = rhs.len();
    if m < 2 * mons.len() {
        return Err(StreamlineError::TooFewNodes(m));
    }
    let a = DMatrix::from_row_slice(m, mons.len(), &rows);
    let b = DVector::from_vec(rhs);
    let coef = a.clone().svd(true, true).solve(&b, 1e-13).expect("svd solve");
    let residual = ((&a * &coef - &b).norm_squared() / m as f64).sqrt();
    Ok(Fit { coef, residual })
}

/// Gradient and Hessian of the fitted polynomial in scaled coordinates.
fn derivatives(c: &DVector<f64>, mons: &[(usize, usize)], z: [f64; 2]) -> (Vector2<f64>, Matrix2<f64>) {
    let d = |k: usize, x: f64| if k == 0 { 0.0 } else { k as f64 * pw(x, k - 1) };
    let dd = |k: usize, x: f64| if k < 2 { 0.0 } else { (k * (k - 1)) as f64 * pw(x, k - 2) };
    let mut grad = Vector2::zeros();
    let mut hess = Matrix2::zeros();
    for (&(p, q), &w) in mons.iter().zip(c.iter()) {
        let (x, y) = (z[0], z[1]);
        grad[0] += w * d(p, x) * pw(y, q);
        grad[1] += w * pw(x, p) * d(q, y);
        hess[(0, 0)] += w * dd(p, x) * pw(y, q);
        hess[(0, 1)] += w * d(p, x) * d(q, y);
        hess[(1, 1)] += w * pw(x, p) * dd(q, y);
    }
    hess[(1, 0)] = hess[(0, 1)];
    (grad, hess)
}

/// Zero of the fitted gradient near the fit centre, by damped Gauss-Newton;
/// degenerate zeros converge linearly.
fn stationary_point(c: &DVector<f64>, mons: &[(usize, usize)]) -> Option<[f64; 2]> {
    let mut z = Vector2::zeros();
    let (g0, h0) = derivatives(c, mons, [0.0, 0.0]);
    let scale = g0.norm() + h0.norm() + c.amax();
    for _ in 0..200 {
        let (g, h) = derivatives(c, mons, [z[0], z[1]]);
        if g.norm() <= 1e-15 * scale {
            break;
        }
        let jtj = h.transpose() * h;
        let mu = 1e-14 * (jtj.trace() + scale * scale * 1e-20);
        let step = (jtj + Matrix2::identity() * mu).try_inverse()? * (h.transpose() * -g);
        let step = if step.norm() > 0.25 { step * (0.25 / step.norm()) } else { step };
        z += step;
        if z.norm() > 0.5 {
            return None;
        }
        if step.norm() < 1e-15 {
            break;
        }
    }
    Some([z[0], z[1]])
}

/// Fits `u` near `x0` by a degree-5 polynomial in `(x - x0) / R` on the
/// disk of radius `R = 5 dr` and reads the type off the Hessian rank.
///
/// The fit is recentred on the stationary point of the fitted polynomial,
/// so `x0` need only be within a cell or two of the critical point; the
/// report carries the refined location.
pub fn classify_critical_point(u: &ScalarField, x0: [f64; 2]) -> Result<CriticalPointReport, StreamlineError> {
    let g = u.grid();
    let radius = 5.0 * g.dr();
    let mons = monomials();
    let mut x0 = x0;
    let mut f = fit(u, x0, radius, &mons)?;
    for _ in 0..4 {
        let Some(z) = stationary_point(&f.coef, &mons) else { break };
        let shift = z[0].hypot(z[1]) * radius;
        if shift < 1e-12 * radius {
            break;
        }
        let moved = [x0[0] + z[0] * radius, x0[1] + z[1] * radius];
        if !g.contains(moved[0], moved[1]) {
            break;
        }
        x0 = moved;
        f = fit(u, x0, radius, &mons)?;
    }
    let Fit { coef: c, residual } = f;
    let coef = |p: usize, q: usize| c[mons.iter().position(|&t| t == (p, q)).unwrap()];
    let leading = mons.iter().zip(c.iter()).filter(|((p, q), _)| p + q >= 2).fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    if !(leading > 0.0) || residual > 0.1 * leading {
        return Err(StreamlineError::FitUnderresolved { residual, leading });
    }
    let thresh = SIGNIFICANT * leading;
    let r2 = radius * radius;
    let hess = Matrix2::new(2.0 * coef(2, 0), coef(1, 1), coef(1, 1), 2.0 * coef(0, 2)) / r2;
    let eig = hess.symmetric_eigen();
    let (k0, k1) = if eig.eigenvalues[0] <= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let mu = [eig.eigenvalues[k0], eig.eigenvalues[k1]];
    let significant = |l: f64| (0.5 * l * r2).abs() > thresh;
    let report = |kind| CriticalPointReport { location: x0, kind, hessian_eigenvalues: mu, residual };

    let r0 = x0[0].hypot(x0[1]);
    let edge = cell_size(g, r0);
    let near_outer = g.r_outer() - r0 < edge;
    let near_inner = g.kind() == GridKind::Annulus && r0 - g.r_inner() < edge;
    if near_outer || near_inner {
        return Ok(report(CriticalKind::BoundaryDegenerate));
    }

    match (significant(mu[0]), significant(mu[1])) {
        (true, true) => Ok(report(CriticalKind::Morse { a: -mu[1], b: mu[0] })),
        (false, false) => {
            for k in 3..=DEGREE {
                // Mode-k Fourier coefficient of the degree-k part on the unit circle.
                let samples = 4 * k + 4;
                let (mut ca, mut cb) = (0.0, 0.0);
                for s in 0..samples {
                    let phi = 2.0 * std::f64::consts::PI * s as f64 / samples as f64;
                    let (cs, sn) = (phi.cos(), phi.sin());
                    let p: f64 = (0..=k).map(|q| coef(k - q, q) * pw(cs, k - q) * pw(sn, q)).sum();
                    ca += p * (k as f64 * phi).cos();
                    cb += p * (k as f64 * phi).sin();
                }
                let scale = 2.0 / samples as f64;
                let h = Complex::new(ca * scale, -cb * scale);
                if h.norm() > thresh {
                    let a = h * (k as f64 / pw(radius, k));
                    return Ok(report(CriticalKind::Harmonic { n: (k - 1) as u32, a }));
                }
            }
            Err(StreamlineError::FitUnderresolved { residual, leading })
        }
        _ => {
            let (lam, dvec) = if significant(mu[0]) {
                (mu[0], eig.eigenvectors.column(k1).into_owned())
            } else {
                (mu[1], eig.eigenvectors.column(k0).into_owned())
            };
            let along = |d: [f64; 2], k: usize| -> f64 { (0..=k).map(|q| coef(k - q, q) * pw(d[0], k - q) * pw(d[1], q)).sum() };
            let mut d = [dvec[0], dvec[1]];
            let Some(k) = (3..=DEGREE).find(|&k| along(d, k).abs() > thresh) else {
                return Err(StreamlineError::FitUnderresolved { residual, leading });
            };
            if k % 2 == 1 && along(d, k) < 0.0 {
                d = [-d[0], -d[1]];
            }
            let e = [-d[1], d[0]];
            let n = k - 1;
            // Coefficient of t^n in the derivative of u along e, on the axis.
            let hn: f64 = (0..=n + 1)
                .map(|q| {
                    let p = n + 1 - q;
                    let dx = if p > 0 { p as f64 * pw(d[0], p - 1) * pw(d[1], q) * e[0] } else { 0.0 };
                    let dy = if q > 0 { q as f64 * pw(d[0], p) * pw(d[1], q - 1) * e[1] } else { 0.0 };
                    coef(p, q) * (dx + dy)
                })
                .sum();
            let re = k as f64 * along(d, k) / pw(radius, k);
            let im = -hn / pw(radius, n + 1);
            Ok(report(CriticalKind::Degenerate { a: -lam, alpha: Complex::new(re, im), n: n as u32 }))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{velocity_from_stream, Grid};

    fn shifted(g: &std::sync::Arc<crate::fields::Grid>, c: [f64; 2], f: impl Fn(f64, f64) -> f64) -> ScalarField {
        ScalarField::from_xy(g, |x, y| f(x - c[0], y - c[1]))
    }

    #[test]
    fn three_types() {
        let g = Grid::disk(1.0, 64, 128).unwrap();
        let c = [0.3, 0.2];
        let r = classify_critical_point(&shifted(&g, c, |x, y| x * y), c).unwrap();
        match r.kind {
            CriticalKind::Morse { a, b } => assert!((a + 1.0).abs() < 1e-6 && (b + 1.0).abs() < 1e-6, "{a} {b}"),
            k => panic!("{k:?}"),
        }
        let r = classify_critical_point(&shifted(&g, c, |x, y| (x * x * x - 3.0 * x * y * y) / 3.0), c).unwrap();
        match r.kind {
            CriticalKind::Harmonic { n, a } => assert!(n == 2 && (a - Complex::new(1.0, 0.0)).norm() < 1e-6, "{n} {a}"),
            k => panic!("{k:?}"),
        }
        let r = classify_critical_point(&shifted(&g, c, |x, y| y * y + x * x * x), c).unwrap();
        match r.kind {
            CriticalKind::Degenerate { a, alpha, n } => {
                assert!(n == 2 && (a.abs() - 2.0).abs() < 1e-6, "{a} {n}");
                assert!((alpha - Complex::new(3.0, 0.0)).norm() < 1e-6, "{alpha}");
            }
            k => panic!("{k:?}"),
        }
    }

    #[test]
    fn critical_points_of_simple_flows() {
        let a = Grid::annulus(1.0, 2.0, 32, 64).unwrap();
        assert!(find_critical_points(&velocity_from_stream(&ScalarField::radial(&a, |r| r.powi(4)))).is_empty());
        let d = Grid::disk(1.0, 32, 64).unwrap();
        let pts = find_critical_points(&velocity_from_stream(&ScalarField::radial(&d, |r| r * r)));
        assert_eq!(pts.len(), 1);
        assert!(pts[0][0].hypot(pts[0][1]) < d.dr());
        let tilt = ScalarField::from_polar(&d, |r, t| r * r - 1.0 + 0.1 * r * t.sin());
        let pts = find_critical_points(&velocity_from_stream(&tilt));
        assert_eq!(pts.len(), 1, "{pts:?}");
        // u = x^2 + y^2 + 0.1 y has its minimum at (0, -0.05).
        assert!(pts[0][0].abs() < d.dr() && (pts[0][1] + 0.05).abs() < d.dr(), "{pts:?}");
    }
}
