use std::f64::consts::PI;

use super::{EllipticError, LevelCurve};
use crate::fields::ScalarField;

/// `H(x) = log|x| / 2pi`, so that `laplacian(H) = delta`.
pub fn fundamental_solution(d: f64) -> f64 {
    d.ln() / (2.0 * PI)
}

/// Cell-quadrature logarithmic potential `integral omega(y) H(x - y) dy`.
///
/// Each cell is treated as a uniform disk of equal area, which keeps the
/// kernel bounded when `x` sits on or near a node.
pub fn newtonian_potential(omega: &ScalarField, x: [f64; 2]) -> f64 {
    let g = omega.grid();
    let mut acc = 0.0;
    for i in 0..g.n_r() {
        let area = g.area(i);
        let rho = (area / PI).sqrt();
        let log_rho = rho.ln();
        for j in 0..g.n_theta() {
            let w = omega.at(i, j);
            if w == 0.0 {
                continue;
            }
            let [px, py] = g.node_xy(i, j);
            let d = (x[0] - px).hypot(x[1] - py);
            let k = if d < rho { log_rho - (rho * rho - d * d) / (2.0 * rho * rho) } else { d.ln() };
            acc += w * area * k;
        }
    }
    acc / (2.0 * PI)
}

fn dist_to_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
    let l2 = ex * ex + ey * ey;
    let t = if l2 > 0.0 { (((p[0] - a[0]) * ex + (p[1] - a[1]) * ey) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (p[0] - a[0] - t * ex).hypot(p[1] - a[1] - t * ey)
}

/// Trapezoid-rule single layer `integral_curve mu(y) H(x - y) ds(y)` with
/// `mu` given at the curve points.
pub fn single_layer(curve: &LevelCurve, mu: &[f64], x: [f64; 2]) -> Result<f64, EllipticError> {
    let pts = &curve.points;
    assert_eq!(mu.len(), pts.len(), "one density value per curve point");
    let mut max_seg: f64 = 0.0;
    let mut dist = f64::INFINITY;
    for w in pts.windows(2) {
        max_seg = max_seg.max((w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]));
        dist = dist.min(dist_to_segment(x, w[0], w[1]));
    }
    if dist < max_seg {
        return Err(EllipticError::PointOnCurve { distance: dist });
    }
    let mut acc = 0.0;
    for k in 0..pts.len().saturating_sub(1) {
        let (a, b) = (pts[k], pts[k + 1]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let ha = fundamental_solution((x[0] - a[0]).hypot(x[1] - a[1]));
        let hb = fundamental_solution((x[0] - b[0]).hypot(x[1] - b[1]));
        acc += 0.5 * len * (mu[k] * ha + mu[k + 1] * hb);
    }
    Ok(acc)
}

/// Exact `integral_segment H(x - y) ds(y)` over the straight segment `a b`.
/// Finite even when `x` lies on the segment.
pub fn segment_log_integral(x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
    let len = ex.hypot(ey);
    if len == 0.0 {
        return 0.0;
    }
    let (ux, uy) = (ex / len, ey / len);
    let (px, py) = (a[0] - x[0], a[1] - x[1]);
    let s0 = px * ux + py * uy;
    let d = (px * uy - py * ux).abs();
    let prim = |s: f64| {
        let q = s * s + d * d;
        let log_term = if q > 0.0 { s * q.ln() } else { 0.0 };
        let atan_term = if d > 0.0 { 2.0 * d * (s / d).atan() } else { 0.0 };
        0.5 * (log_term - 2.0 * s + atan_term)
    };
    (prim(s0 + len) - prim(s0)) / (2.0 * PI)
}
