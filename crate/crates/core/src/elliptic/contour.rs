use std::collections::HashMap;

use super::EllipticError;
use crate::fields::{gradient, CartesianSampler, ScalarField};

/// One connected component of `{u = level}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCurve {
    pub level: f64,
    /// Polyline; for closed curves the first point is repeated at the end.
    pub points: Vec<[f64; 2]>,
    /// `|grad u|` at each point.
    pub normal_derivative: Vec<f64>,
    pub closed: bool,
}

impl LevelCurve {
    pub fn length(&self) -> f64 {
        self.points.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum()
    }
}

const MIN_GRADIENT: f64 = 1e-6;

/// Marching squares on the `(row, column)` lattice, periodic in `theta`.
/// Returns every component of every requested level, in level order.
pub fn extract_level_curves(u: &ScalarField, levels: &[f64]) -> Result<Vec<LevelCurve>, EllipticError> {
    let (lo, hi) = (u.min(), u.max());
    let grad = CartesianSampler::new(&gradient(u));
    let mut out = Vec::new();
    for &t in levels {
        if !(t > lo && t < hi) {
            return Err(EllipticError::DegenerateLevel {
                level: t,
                reason: format!("outside the open range ({lo}, {hi})"),
            });
        }
        let curves = trace_level(u, t);
        if curves.is_empty() {
            return Err(EllipticError::DegenerateLevel { level: t, reason: "no contour found".into() });
        }
        for (points, closed) in curves {
            let normal_derivative: Vec<f64> = points
                .iter()
                .map(|p| {
                    let [gx, gy] = grad.sample(p[0], p[1]);
                    gx.hypot(gy)
                })
                .collect();
            let min_grad = normal_derivative.iter().copied().fold(f64::INFINITY, f64::min);
            if min_grad <= MIN_GRADIENT {
                return Err(EllipticError::DegenerateLevel {
                    level: t,
                    reason: format!("gradient {min_grad:e} on the curve"),
                });
            }
            out.push(LevelCurve { level: t, points, normal_derivative, closed });
        }
    }
    Ok(out)
}

fn trace_level(u: &ScalarField, t: f64) -> Vec<(Vec<[f64; 2]>, bool)> {
    let g = u.grid();
    let (n_r, n) = (g.n_r(), g.n_theta());
    let radial = |i: usize, j: usize| 2 * (i * n + j);
    let angular = |i: usize, j: usize| 2 * (i * n + j) + 1;

    let mut segments: Vec<[usize; 2]> = Vec::new();
    for i in 0..n_r - 1 {
        for j in 0..n {
            let jp = (j + 1) % n;
            let vals = [u.at(i, j), u.at(i + 1, j), u.at(i + 1, jp), u.at(i, jp)];
            let above = vals.map(|v| v >= t);
            let edges = [radial(i, j), angular(i + 1, j), radial(i, jp), angular(i, j)];
            let crossed: Vec<usize> = (0..4).filter(|&e| above[e] != above[(e + 1) % 4]).collect();
            match crossed.len() {
                2 => segments.push([edges[crossed[0]], edges[crossed[1]]]),
                4 => {
                    let center = 0.25 * vals.iter().sum::<f64>() >= t;
                    if center == above[0] {
                        segments.push([edges[0], edges[1]]);
                        segments.push([edges[2], edges[3]]);
                    } else {
                        segments.push([edges[3], edges[0]]);
                        segments.push([edges[1], edges[2]]);
                    }
                }
                _ => {}
            }
        }
    }

    let mut by_edge: HashMap<usize, Vec<usize>> = HashMap::new();
    for (s, e) in segments.iter().enumerate() {
        by_edge.entry(e[0]).or_default().push(s);
        by_edge.entry(e[1]).or_default().push(s);
    }

    let point_on = |edge: usize| -> [f64; 2] {
        let k = edge / 2;
        let (i, j) = (k / n, k % n);
        let (i2, j2) = if edge % 2 == 0 { (i + 1, j) } else { (i, (j + 1) % n) };
        let (a, b) = (u.at(i, j), u.at(i2, j2));
        let s = if b != a { ((t - a) / (b - a)).clamp(0.0, 1.0) } else { 0.5 };
        let (fi, fj) = if edge % 2 == 0 { (i as f64 + s, j as f64) } else { (i as f64, j as f64 + s) };
        let r = g.radius(0) + fi * g.dr();
        let th = fj * g.dtheta();
        [r * th.cos(), r * th.sin()]
    };

    let mut used = vec![false; segments.len()];
    let mut curves = Vec::new();
    let walk = |start_seg: usize, start_edge: usize, used: &mut Vec<bool>| -> (Vec<[f64; 2]>, bool) {
        let mut pts = vec![point_on(start_edge)];
        let mut seg = start_seg;
        let mut edge = start_edge;
        loop {
            used[seg] = true;
            let e = segments[seg];
            edge = if e[0] == edge { e[1] } else { e[0] };
            pts.push(point_on(edge));
            if edge == start_edge {
                return (pts, true);
            }
            match by_edge[&edge].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => return (pts, false),
            }
        }
    };
    // Open components first, starting from edges touched only once.
    for s in 0..segments.len() {
        if used[s] {
            continue;
        }
        if let Some(&e) = segments[s].iter().find(|e| by_edge[e].len() == 1) {
            curves.push(walk(s, e, &mut used));
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            curves.push(walk(s, segments[s][0], &mut used));
        }
    }
    curves
}
