use super::{extract_level_curves, segment_log_integral, solve_poisson, BoundaryData, BoundaryValue, EllipticError, LevelCurve};
use crate::fields::{GridKind, ScalarField};
use crate::rearrange::MonotoneProfile;

#[derive(Debug, Clone, Copy)]
pub struct CoareaOptions {
    pub n_levels: usize,
    /// Fractions of `[min u, max u]` bounding the level range.
    pub range: (f64, f64),
}

impl Default for CoareaOptions {
    fn default() -> Self {
        CoareaOptions { n_levels: 200, range: (0.0, 1.0) }
    }
}

#[derive(Debug, Clone)]
pub struct CoareaReport {
    /// Largest `|R(x) - u(x)|` over the samples.
    pub deviation: f64,
    pub per_sample: Vec<f64>,
    pub levels: Vec<f64>,
}

/// Sum over level curves of `f(t) * integral_{u=t} H(x-y) / |grad u| ds * dt`.
fn level_sum(curves: &[LevelCurve], weights: &[f64], x: [f64; 2]) -> f64 {
    let mut acc = 0.0;
    for (c, &w) in curves.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let mut s = 0.0;
        for k in 0..c.points.len() - 1 {
            let mu = 0.5 * (1.0 / c.normal_derivative[k] + 1.0 / c.normal_derivative[k + 1]);
            s += mu * segment_log_integral(x, c.points[k], c.points[k + 1]);
        }
        acc += w * s;
    }
    acc
}

/// Rebuilds `u` from its level curves plus a harmonic boundary correction
/// and reports the mismatch at the sample points.
///
/// Levels are midpoints of `n_levels` equal slabs of the chosen range.
/// Each segment integral is evaluated in closed form, so samples may sit
/// arbitrarily close to a level curve.
pub fn coarea_identity_check(
    u: &ScalarField,
    f: &MonotoneProfile,
    samples: &[[f64; 2]],
    opts: CoareaOptions,
) -> Result<CoareaReport, EllipticError> {
    let g = u.grid();
    let (a, b) = (u.min(), u.max());
    let lo = a + opts.range.0 * (b - a);
    let hi = a + opts.range.1 * (b - a);
    let dt = (hi - lo) / opts.n_levels as f64;
    let levels: Vec<f64> = (0..opts.n_levels).map(|k| lo + (k as f64 + 0.5) * dt).collect();
    let curves = if f.values().iter().all(|&v| v == 0.0) {
        Vec::new()
    } else {
        extract_level_curves(u, &levels)?
    };
    let weights: Vec<f64> = curves.iter().map(|c| f.eval(c.level) * dt).collect();

    let boundary = |i: usize| -> BoundaryValue {
        BoundaryValue::Sampled(
            (0..g.n_theta()).map(|j| u.at(i, j) - level_sum(&curves, &weights, g.node_xy(i, j))).collect(),
        )
    };
    let bc = BoundaryData {
        inner: (g.kind() == GridKind::Annulus).then(|| boundary(0)),
        outer: boundary(g.n_r() - 1),
    };
    let w = solve_poisson(g, &ScalarField::zeros(g), &bc)?;

    let per_sample: Vec<f64> = samples
        .iter()
        .map(|&x| (level_sum(&curves, &weights, x) + w.sample(x[0], x[1]) - u.sample(x[0], x[1])).abs())
        .collect();
    let deviation = per_sample.iter().copied().fold(0.0, f64::max);
    Ok(CoareaReport { deviation, per_sample, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;

    #[test]
    fn harmonic_u_with_zero_profile() {
        let g = Grid::disk(1.0, 24, 48).unwrap();
        let edge = ScalarField::from_xy(&g, |x, y| x * x - y * y + 0.3 * x);
        let bc = BoundaryData { inner: None, outer: BoundaryValue::Sampled(edge.row(23).to_vec()) };
        let u = solve_poisson(&g, &ScalarField::zeros(&g), &bc).unwrap();
        let rep = coarea_identity_check(&u, &MonotoneProfile::constant(0.0), &[[0.1, 0.2], [-0.5, 0.3]], Default::default())
            .unwrap();
        assert!(rep.deviation < 1e-8, "{}", rep.deviation);
    }
}
