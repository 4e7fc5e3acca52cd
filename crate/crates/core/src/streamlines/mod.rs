//! Streamline tracing, curvature diagnostics and stagnation points.

mod critical;

pub use critical::{classify_critical_point, find_critical_points, CriticalKind, CriticalPointReport};

use crate::fields::{CartesianSampler, Grid, VectorField};

#[derive(Debug, thiserror::Error)]
pub enum StreamlineError {
    #[error("velocity vanishes at the start point ({speed:e})")]
    StartAtStagnation { speed: f64 },
    #[error("start point ({x}, {y}) is outside the domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error("streamline is not closed")]
    NotClosed,
    #[error("polynomial fit under-resolved: residual {residual:e} vs leading term {leading:e}")]
    FitUnderresolved { residual: f64, leading: f64 },
    #[error("too few grid nodes ({0}) inside the fit disk")]
    TooFewNodes(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Closed,
    LeftDomain,
    Stagnation,
    MaxSteps,
}

#[derive(Debug, Clone)]
pub struct Streamline {
    pub points: Vec<[f64; 2]>,
    pub arclength: Vec<f64>,
    /// Travel time to each point, `integral ds / |v|`.
    pub time: Vec<f64>,
    pub curvature: Vec<f64>,
    pub closed: bool,
    pub closure_gap: f64,
    pub stop: StopReason,
}

impl Streamline {
    pub fn length(&self) -> f64 {
        self.arclength.last().copied().unwrap_or(0.0)
    }

    /// Travel time of the whole curve; the period when closed.
    pub fn duration(&self) -> f64 {
        self.time.last().copied().unwrap_or(0.0)
    }
}

fn unit(s: &CartesianSampler, p: [f64; 2]) -> ([f64; 2], f64) {
    let v = s.sample(p[0], p[1]);
    let n = v[0].hypot(v[1]);
    if n == 0.0 {
        ([0.0, 0.0], 0.0)
    } else {
        ([v[0] / n, v[1] / n], n)
    }
}

fn add(p: [f64; 2], d: [f64; 2], h: f64) -> [f64; 2] {
    [p[0] + h * d[0], p[1] + h * d[1]]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Closest point to `c` on segment `a b` and its parameter.
fn project(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> ([f64; 2], f64) {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 > 0.0 { (((c[0] - a[0]) * d[0] + (c[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (add(a, d, t), t)
}

/// Classical RK4 in arclength on the unit tangent of the interpolated
/// velocity.
pub fn trace(v: &VectorField, x0: [f64; 2], step: f64, max_steps: usize) -> Result<Streamline, StreamlineError> {
    trace_with(&v.sampler(), x0, step, max_steps)
}

pub fn trace_with(
    s: &CartesianSampler,
    x0: [f64; 2],
    step: f64,
    max_steps: usize,
) -> Result<Streamline, StreamlineError> {
    let grid = s.grid();
    if !grid.contains(x0[0], x0[1]) {
        return Err(StreamlineError::OutsideDomain { x: x0[0], y: x0[1] });
    }
    let (t0, speed0) = unit(s, x0);
    if speed0 <= 1e-8 {
        return Err(StreamlineError::StartAtStagnation { speed: speed0 });
    }
    let stag = 1e-8f64.max(1e-10 * speed0);
    let mut pts = vec![x0];
    let mut arc = vec![0.0];
    let mut time = vec![0.0];
    let mut inv_speed = 1.0 / speed0;
    let mut stop = StopReason::MaxSteps;
    let mut gap = f64::NAN;
    let mut left_start = false;

    for _ in 0..max_steps {
        let p = *pts.last().unwrap();
        let (k1, _) = unit(s, p);
        let (k2, _) = unit(s, add(p, k1, 0.5 * step));
        let (k3, _) = unit(s, add(p, k2, 0.5 * step));
        let (k4, _) = unit(s, add(p, k3, step));
        let d = [
            (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) / 6.0,
            (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) / 6.0,
        ];
        let mut q = add(p, d, step);

        if !grid.contains(q[0], q[1]) {
            // Bisect to the boundary crossing.
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..50 {
                let mid = 0.5 * (lo + hi);
                let m = add(p, d, mid * step);
                if grid.contains(m[0], m[1]) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            q = add(p, d, lo * step);
            let (_, sp) = unit(s, q);
            push(&mut pts, &mut arc, &mut time, &mut inv_speed, q, sp);
            stop = StopReason::LeftDomain;
            break;
        }

        let far = dist(q, x0) > 2.0 * step;
        if left_start && !far {
            let (c, _) = project(p, q, x0);
            let (tq, _) = unit(s, q);
            if dist(c, x0) < 0.5 * step && tq[0] * t0[0] + tq[1] * t0[1] > 0.0 && dist(c, p) < dist(q, p) {
                gap = dist(c, x0);
                // Avoid a sliver segment at the seam.
                if pts.len() > 3 && dist(p, x0) < 0.25 * step {
                    pts.pop();
                    arc.pop();
                    time.pop();
                    inv_speed = 1.0 / unit(s, *pts.last().unwrap()).1;
                }
                push(&mut pts, &mut arc, &mut time, &mut inv_speed, x0, speed0);
                stop = StopReason::Closed;
                break;
            }
        }
        left_start |= far;

        let (_, sp) = unit(s, q);
        push(&mut pts, &mut arc, &mut time, &mut inv_speed, q, sp);
        if sp < stag {
            stop = StopReason::Stagnation;
            break;
        }
    }
    let closed = stop == StopReason::Closed;
    let curvature = curvature_samples(&pts, closed);
    Ok(Streamline { points: pts, arclength: arc, time, curvature, closed, closure_gap: gap, stop })
}

fn push(
    pts: &mut Vec<[f64; 2]>,
    arc: &mut Vec<f64>,
    time: &mut Vec<f64>,
    inv_speed: &mut f64,
    q: [f64; 2],
    speed: f64,
) {
    let p = *pts.last().unwrap();
    let ds = dist(p, q);
    let inv = if speed > 0.0 { 1.0 / speed } else { f64::INFINITY };
    arc.push(arc.last().unwrap() + ds);
    time.push(time.last().unwrap() + 0.5 * ds * (*inv_speed + inv));
    *inv_speed = inv;
    pts.push(q);
}

/// Circumscribed-circle curvature `4 * area / (a b c)` at each point.
fn curvature_samples(pts: &[[f64; 2]], closed: bool) -> Vec<f64> {
    let n = pts.len();
    if n < 3 {
        return vec![0.0; n];
    }
    // A closed curve stores the start once at each end; skip the duplicate
    // when wrapping.
    let m = if closed && dist(pts[0], pts[n - 1]) < 1e-12 { n - 1 } else { n };
    let kappa = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let den = dist(a, b) * dist(b, c) * dist(a, c);
        if den > 0.0 {
            2.0 * cross.abs() / den
        } else {
            0.0
        }
    };
    let mut out = vec![0.0; n];
    for k in 0..m {
        out[k] = if k > 0 && k + 1 < m {
            kappa(pts[k - 1], pts[k], pts[k + 1])
        } else if closed {
            kappa(pts[(k + m - 1) % m], pts[k], pts[(k + 1) % m])
        } else {
            f64::NAN
        };
    }
    if !closed {
        out[0] = out[1];
        out[m - 1] = out[m - 2];
    }
    if m < n {
        out[n - 1] = out[0];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureStats {
    pub max: f64,
    /// Arclength-weighted mean.
    pub mean: f64,
    /// Total variation of the tangent angle.
    pub total_turn: f64,
}

pub fn curvature_stats(s: &Streamline) -> CurvatureStats {
    let n = s.points.len();
    let max = s.curvature.iter().copied().fold(0.0, f64::max);
    let (mut acc, mut len) = (0.0, 0.0);
    for k in 1..n {
        let ds = s.arclength[k] - s.arclength[k - 1];
        acc += 0.5 * ds * (s.curvature[k] + s.curvature[k - 1]);
        len += ds;
    }
    let mut turn = 0.0;
    let seg = |k: usize| {
        let (a, b) = (s.points[k], s.points[k + 1]);
        (b[1] - a[1]).atan2(b[0] - a[0])
    };
    let segs = n.saturating_sub(1);
    let count = if s.closed { segs } else { segs.saturating_sub(1) };
    for k in 0..count {
        let mut d = seg((k + 1) % segs) - seg(k);
        d = (d + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
        turn += d.abs();
    }
    CurvatureStats { max, mean: if len > 0.0 { acc / len } else { 0.0 }, total_turn: turn }
}

fn winding_number(poly: &[[f64; 2]], c: [f64; 2]) -> i64 {
    let mut total = 0.0;
    let n = poly.len();
    for k in 0..n {
        let a = poly[k];
        let b = poly[(k + 1) % n];
        let ta = (a[1] - c[1]).atan2(a[0] - c[0]);
        let tb = (b[1] - c[1]).atan2(b[0] - c[0]);
        let mut d = tb - ta;
        d = (d + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI;
        total += d;
    }
    (total / (2.0 * std::f64::consts::PI)).round() as i64
}

/// Winding number about the region centroid is `+-1` and every region
/// point lies inside the curve.
pub fn encircles(s: &Streamline, region: &[[f64; 2]]) -> Result<bool, StreamlineError> {
    if !s.closed {
        return Err(StreamlineError::NotClosed);
    }
    if region.is_empty() {
        return Ok(false);
    }
    let n = region.len() as f64;
    let c = [region.iter().map(|p| p[0]).sum::<f64>() / n, region.iter().map(|p| p[1]).sum::<f64>() / n];
    let w = winding_number(&s.points, c);
    Ok(w.abs() == 1 && region.iter().all(|&p| winding_number(&s.points, p) == w))
}

/// Grid cell diameter at radius `r`.
pub fn cell_size(grid: &Grid, r: f64) -> f64 {
    grid.dr().max(r.max(0.5 * grid.dr()) * grid.dtheta())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{velocity_from_stream, ScalarField};
    use std::f64::consts::PI;

    #[test]
    fn circle_orbit() {
        let g = Grid::annulus(1.0, 2.0, 64, 128).unwrap();
        let u = ScalarField::radial(&g, |r| r.powi(4));
        let v = velocity_from_stream(&u);
        let step = 0.01;
        let s = trace(&v, [1.5, 0.0], step, 10_000).unwrap();
        assert!(s.closed);
        assert!(s.closure_gap < step * step, "{}", s.closure_gap);
        let rerr = s.points.iter().map(|p| (p[0].hypot(p[1]) - 1.5).abs()).fold(0.0, f64::max);
        assert!(rerr < 1e-3, "{rerr}");
        let st = curvature_stats(&s);
        assert!((st.max * 1.5 - 1.0).abs() < 0.01, "{st:?}");
        assert!((st.total_turn - 2.0 * PI).abs() < 0.01, "{st:?}");
        // Counter-clockwise under the stream convention.
        assert!(s.points[5][1] > 0.0);
        assert!(encircles(&s, &[[0.0, 0.0], [0.5, 0.5]]).unwrap());
        assert!(!encircles(&s, &[[1.9, 0.0]]).unwrap());
        // Stream function constant along the curve.
        let drift = s.points.iter().map(|p| (u.sample(p[0], p[1]) - 1.5f64.powi(4)).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-4, "{drift}");
    }

    #[test]
    fn chord_exits() {
        let g = Grid::disk(1.0, 32, 64).unwrap();
        let v = VectorField::from_cartesian(&g, |_, _| [1.0, 0.0]);
        let s = trace(&v, [0.0, 0.0], 0.02, 1000).unwrap();
        assert_eq!(s.stop, StopReason::LeftDomain);
        assert!(!s.closed);
        let end = *s.points.last().unwrap();
        assert!((end[0] - 1.0).abs() < 1e-6 && end[1].abs() < 1e-9, "{end:?}");
        assert!(curvature_stats(&s).max < 1e-6);
        assert!(matches!(encircles(&s, &[[0.0, 0.0]]), Err(StreamlineError::NotClosed)));
    }

    #[test]
    fn rigid_rotation_period() {
        let g = Grid::disk(1.0, 32, 64).unwrap();
        // omega = 4, angular speed 2.
        let v = velocity_from_stream(&ScalarField::radial(&g, |r| r * r));
        let s = trace(&v, [0.5, 0.0], 0.01, 10_000).unwrap();
        assert!(s.closed);
        assert!((s.duration() / PI - 1.0).abs() < 0.01, "{}", s.duration());
        let z = VectorField::zeros(&g);
        assert!(matches!(trace(&z, [0.5, 0.0], 0.01, 10), Err(StreamlineError::StartAtStagnation { .. })));
    }
}
