//! Steady flows: construction, steadiness residual and Arnold-type ratios.

use std::fmt;
use std::sync::Arc;

use crate::elliptic::{solve_semilinear, BoundaryData, EllipticError, SemilinearOptions};
use crate::fields::{gradient, laplacian, velocity_from_stream, FieldError, Grid, ScalarField, VectorField};
use crate::rearrange::MonotoneProfile;

#[derive(Debug, thiserror::Error)]
pub enum SteadyError {
    #[error("flow is not steady (residual {0:e})")]
    NotSteady(f64),
    #[error("vorticity gradient vanishes on {0:.1}% of the domain")]
    TooDegenerate(f64),
    #[error("field is not radial (angular variation {0:e})")]
    NotRadial(f64),
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone)]
pub struct SteadyFlow {
    pub u: ScalarField,
    pub v: VectorField,
    pub omega: ScalarField,
    pub residual: f64,
    pub profile: Option<MonotoneProfile>,
}

const RADIAL_RESIDUAL_LIMIT: f64 = 1e-6;

/// Flow with radial stream function `u(r)`.
pub fn radial_steady(grid: &Arc<Grid>, profile: impl Fn(f64) -> f64) -> Result<SteadyFlow, SteadyError> {
    let u = ScalarField::new(grid.clone(), ScalarField::radial(grid, profile).into_values())?;
    let omega = laplacian(&u);
    let residual = steadiness_residual(&u, &omega);
    if residual > RADIAL_RESIDUAL_LIMIT {
        return Err(SteadyError::NotSteady(residual));
    }
    Ok(SteadyFlow { v: velocity_from_stream(&u), u, omega, residual, profile: None })
}

/// Flow solving `laplacian(u) = f(u)` with the given boundary data.
pub fn semilinear_steady(
    grid: &Arc<Grid>,
    f: &MonotoneProfile,
    bc: &BoundaryData,
    u0: &ScalarField,
) -> Result<SteadyFlow, SteadyError> {
    let sol = solve_semilinear(grid, f, bc, u0, SemilinearOptions::default())?;
    let u = sol.u;
    // Equal to laplacian(u) on interior rows; on the boundary rows the
    // equation itself is the better vorticity estimate.
    let omega = f.apply(&u);
    let residual = steadiness_residual(&u, &omega);
    Ok(SteadyFlow { v: velocity_from_stream(&u), u, omega, residual, profile: Some(f.clone()) })
}

/// `max |v . grad omega|` over interior rows, divided by
/// `max|v| * max|grad omega|`.
pub fn steadiness_residual(u: &ScalarField, omega: &ScalarField) -> f64 {
    let g = u.grid();
    let v = velocity_from_stream(u);
    let gw = gradient(omega);
    let (mut adv, mut vmax, mut gmax) = (0.0f64, 0.0f64, 0.0f64);
    for i in g.interior_rows() {
        for j in 0..g.n_theta() {
            let (vr, vt) = (v.v_r.at(i, j), v.v_theta.at(i, j));
            let (wr, wt) = (gw.v_r.at(i, j), gw.v_theta.at(i, j));
            adv = adv.max((vr * wr + vt * wt).abs());
            vmax = vmax.max(vr.hypot(vt));
            gmax = gmax.max(wr.hypot(wt));
        }
    }
    adv / (vmax * gmax + f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VorticitySign {
    Positive,
    Negative,
    Mixed,
}

impl fmt::Display for VorticitySign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VorticitySign::Positive => "+",
            VorticitySign::Negative => "-",
            VorticitySign::Mixed => "mixed",
        })
    }
}

pub fn vorticity_sign(omega: &ScalarField) -> VorticitySign {
    if omega.min() > 0.0 {
        VorticitySign::Positive
    } else if omega.max() < 0.0 {
        VorticitySign::Negative
    } else {
        VorticitySign::Mixed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArnoldReport {
    pub ratio_inf: f64,
    pub ratio_sup: f64,
    /// Area fraction of nodes skipped because `|grad omega| <= tol`.
    pub excluded_fraction: f64,
    pub sign: VorticitySign,
}

impl ArnoldReport {
    pub fn valid(&self) -> bool {
        self.excluded_fraction < 0.05
    }
}

/// Bounds of `(grad u . grad omega) / |grad omega|^2` over nodes where the
/// vorticity gradient exceeds `tol` (default `1e-6 * max |grad omega|`).
pub fn arnold_ratio(u: &ScalarField, omega: &ScalarField, tol: Option<f64>) -> Result<ArnoldReport, SteadyError> {
    u.check_grid(omega)?;
    let g = u.grid();
    let gu = gradient(u);
    let gw = gradient(omega);
    let norm = gw.magnitude();
    let tol = tol.unwrap_or(1e-6 * norm.max());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut excluded = 0.0;
    for i in 0..g.n_r() {
        for j in 0..g.n_theta() {
            let n = norm.at(i, j);
            if !(n > tol) {
                excluded += g.area(i);
                continue;
            }
            let dot = gu.v_r.at(i, j) * gw.v_r.at(i, j) + gu.v_theta.at(i, j) * gw.v_theta.at(i, j);
            let rho = dot / (n * n);
            lo = lo.min(rho);
            hi = hi.max(rho);
        }
    }
    let frac = excluded / g.total_area();
    if frac > 0.5 {
        return Err(SteadyError::TooDegenerate(100.0 * frac));
    }
    Ok(ArnoldReport { ratio_inf: lo, ratio_sup: hi, excluded_fraction: frac, sign: vorticity_sign(omega) })
}

/// Margins for the monotone-radial-vorticity hypothesis of the instability
/// experiments: `omega > 0` and `d omega / dr > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialHypothesis {
    pub min_omega: f64,
    pub min_domega_dr: f64,
    pub pass: bool,
    /// Whether `min d omega/dr > 1`, the normalized form of the hypothesis.
    pub normalized: bool,
}

pub fn radial_instability_hypothesis(omega: &ScalarField) -> Result<RadialHypothesis, SteadyError> {
    let var = omega.max_theta_variation();
    if var > 1e-8 {
        return Err(SteadyError::NotRadial(var));
    }
    let min_omega = omega.min();
    let min_domega_dr = gradient(omega).v_r.min();
    Ok(RadialHypothesis {
        min_omega,
        min_domega_dr,
        pass: min_omega > 0.0 && min_domega_dr > 0.0,
        normalized: min_domega_dr > 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn annulus() -> Arc<Grid> {
        Grid::annulus(1.0, 2.0, 64, 128).unwrap()
    }

    #[test]
    fn radial_examples() {
        let g = annulus();
        let f = radial_steady(&g, |r| r.powi(4)).unwrap();
        assert!(f.residual < 1e-10);
        let exact = ScalarField::radial(&g, |r| 16.0 * r * r);
        assert!(f.omega.max_abs_diff_interior(&exact) / 64.0 < 1e-3);
        let c = radial_steady(&g, |_| 2.0).unwrap();
        assert_eq!(c.residual, 0.0);
        assert_eq!(c.v.max_speed(), 0.0);
        assert!(radial_steady(&g, f64::ln).unwrap().residual < 1e-10);
    }

    #[test]
    fn residual_detects_unsteady() {
        let g = annulus();
        let u = ScalarField::from_polar(&g, |r, t| r.powi(4) + 0.1 * r * t.sin());
        assert!(steadiness_residual(&u, &laplacian(&u)) > 1e-3);
        let z = ScalarField::zeros(&g);
        assert_eq!(steadiness_residual(&z, &z), 0.0);
    }

    #[test]
    fn arnold_r4() {
        let g = annulus();
        let u = ScalarField::radial(&g, |r| r.powi(4));
        let rep = arnold_ratio(&u, &laplacian(&u), None).unwrap();
        assert!((rep.ratio_inf / 0.125 - 1.0).abs() < 0.02, "{rep:?}");
        assert!((rep.ratio_sup / 0.5 - 1.0).abs() < 0.02, "{rep:?}");
        assert_eq!(rep.sign, VorticitySign::Positive);
        assert!(rep.valid());
        let flat = ScalarField::radial(&g, f64::ln);
        assert!(matches!(arnold_ratio(&flat, &ScalarField::zeros(&g), None), Err(SteadyError::TooDegenerate(_))));
    }

    #[test]
    fn hypothesis_examples() {
        let g = annulus();
        let h = radial_instability_hypothesis(&ScalarField::radial(&g, |r| 16.0 * r * r)).unwrap();
        assert!(h.pass && h.normalized);
        assert!((h.min_domega_dr - 32.0).abs() < 1e-9);
        assert!(!radial_instability_hypothesis(&ScalarField::constant(&g, 3.0)).unwrap().pass);
        assert!(!radial_instability_hypothesis(&ScalarField::radial(&g, |r| -r)).unwrap().pass);
        let bumpy = ScalarField::from_polar(&g, |r, t| r + 1e-3 * t.cos());
        assert!(matches!(radial_instability_hypothesis(&bumpy), Err(SteadyError::NotRadial(_))));
    }

    #[test]
    fn affine_profile_flow_is_steady() {
        let g = Grid::disk(1.0, 32, 64).unwrap();
        let f = MonotoneProfile::affine(2.0, -1.0, -10.0, 10.0).unwrap();
        let bc = BoundaryData {
            inner: None,
            outer: crate::elliptic::BoundaryValue::Sampled((0..64).map(|j| (g.theta(j)).cos() * 0.3).collect()),
        };
        let flow = semilinear_steady(&g, &f, &bc, &ScalarField::zeros(&g)).unwrap();
        assert!(flow.residual < 1e-6, "{}", flow.residual);
    }
}
