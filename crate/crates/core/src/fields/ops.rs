use super::{GridKind, ScalarField, VectorField};

/// Second-order radial derivative at node `(i, j)`. One-sided at stored
/// boundary circles, mirrored through the pole on the innermost disk row.
pub(crate) fn d_r(f: &ScalarField, i: usize, j: usize) -> f64 {
    let g = f.grid();
    let h = g.dr();
    let last = g.n_r() - 1;
    if i == 0 && g.kind() == GridKind::Annulus {
        (-3.0 * f.at(0, j) + 4.0 * f.at(1, j) - f.at(2, j)) / (2.0 * h)
    } else if i == last {
        (3.0 * f.at(last, j) - 4.0 * f.at(last - 1, j) + f.at(last - 2, j)) / (2.0 * h)
    } else {
        (f.at(i + 1, j) - f.at_ext(i as isize - 1, j)) / (2.0 * h)
    }
}

/// Centered angular derivative `d/dtheta` (not divided by r).
#[inline]
pub(crate) fn d_theta(f: &ScalarField, i: usize, j: usize) -> f64 {
    let n = f.grid().n_theta();
    (f.at(i, (j + 1) % n) - f.at(i, (j + n - 1) % n)) / (2.0 * f.grid().dtheta())
}

#[inline]
fn d_theta2(f: &ScalarField, i: usize, j: usize) -> f64 {
    let n = f.grid().n_theta();
    let dt = f.grid().dtheta();
    (f.at(i, (j + 1) % n) - 2.0 * f.at(i, j) + f.at(i, (j + n - 1) % n)) / (dt * dt)
}

/// Polar gradient `(d_r f, r^-1 d_theta f)`.
pub fn gradient(f: &ScalarField) -> VectorField {
    let g = f.grid().clone();
    let mut gr = Vec::with_capacity(g.len());
    let mut gt = Vec::with_capacity(g.len());
    for i in 0..g.n_r() {
        let r = g.radius(i);
        for j in 0..g.n_theta() {
            gr.push(d_r(f, i, j));
            gt.push(d_theta(f, i, j) / r);
        }
    }
    VectorField { v_r: ScalarField::from_raw(g.clone(), gr), v_theta: ScalarField::from_raw(g, gt) }
}

/// Discrete polar Laplacian.
///
/// Interior rows use the conservative form
/// `(r_{i+1/2}(u_{i+1}-u_i) - r_{i-1/2}(u_i-u_{i-1})) / (r_i h^2)`, which is
/// exact for `r^2` and needs no pole value on a disk since the inner face
/// has zero radius. Boundary rows use one-sided five-point stencils.
pub fn laplacian(u: &ScalarField) -> ScalarField {
    let g = u.grid().clone();
    let h = g.dr();
    let last = g.n_r() - 1;
    let mut out = Vec::with_capacity(g.len());
    for i in 0..g.n_r() {
        let r = g.radius(i);
        for j in 0..g.n_theta() {
            let radial = if g.is_boundary_row(i) {
                let (f, sign): ([f64; 5], f64) = if i == 0 {
                    ([0, 1, 2, 3, 4.min(last)].map(|k| u.at(k, j)), -1.0)
                } else {
                    ([0, 1, 2, 3, 4].map(|k| u.at_ext(last as isize - k, j)), 1.0)
                };
                let (urr, ur) = if g.n_r() >= 5 || g.kind() == GridKind::Disk {
                    (
                        (35.0 * f[0] - 104.0 * f[1] + 114.0 * f[2] - 56.0 * f[3] + 11.0 * f[4]) / (12.0 * h * h),
                        sign * (25.0 * f[0] - 48.0 * f[1] + 36.0 * f[2] - 16.0 * f[3] + 3.0 * f[4]) / (12.0 * h),
                    )
                } else {
                    (
                        (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / (h * h),
                        sign * (3.0 * f[0] - 4.0 * f[1] + f[2]) / (2.0 * h),
                    )
                };
                urr + ur / r
            } else {
                let outer = g.face(i);
                let inner = if i == 0 { 0.0 } else { g.face(i - 1) };
                let below = if i == 0 { 0.0 } else { u.at(i - 1, j) };
                (outer * (u.at(i + 1, j) - u.at(i, j)) - inner * (u.at(i, j) - below)) / (r * h * h)
            };
            out.push(radial + d_theta2(u, i, j) / (r * r));
        }
    }
    ScalarField::from_raw(g, out)
}

/// Velocity of a stream function: `v_r = -r^-1 d_theta u`, `v_theta = d_r u`,
/// so that `curl v = laplacian(u)`.
pub fn velocity_from_stream(u: &ScalarField) -> VectorField {
    let grad = gradient(u);
    VectorField { v_r: grad.v_theta.map(|a| -a), v_theta: grad.v_r }
}

fn times_r(f: &ScalarField) -> ScalarField {
    let g = f.grid();
    let mut vals = f.values().to_vec();
    for i in 0..g.n_r() {
        let r = g.radius(i);
        let n = g.n_theta();
        vals[i * n..(i + 1) * n].iter_mut().for_each(|v| *v *= r);
    }
    ScalarField::from_raw(g.clone(), vals)
}

/// Scalar vorticity `r^-1 (d_r(r v_theta) - d_theta v_r)`.
pub fn curl(v: &VectorField) -> ScalarField {
    // r * v_theta has even parity through the pole, so the mirrored ghost
    // row is valid for it.
    let p = times_r(&v.v_theta);
    let g = p.grid().clone();
    let mut out = Vec::with_capacity(g.len());
    for i in 0..g.n_r() {
        let r = g.radius(i);
        for j in 0..g.n_theta() {
            out.push((d_r(&p, i, j) - d_theta(&v.v_r, i, j)) / r);
        }
    }
    ScalarField::from_raw(g, out)
}

/// `r^-1 d_r(r v_r) + r^-1 d_theta v_theta`.
pub fn divergence(v: &VectorField) -> ScalarField {
    let p = times_r(&v.v_r);
    let g = p.grid().clone();
    let mut out = Vec::with_capacity(g.len());
    for i in 0..g.n_r() {
        let r = g.radius(i);
        for j in 0..g.n_theta() {
            out.push((d_r(&p, i, j) + d_theta(&v.v_theta, i, j)) / r);
        }
    }
    ScalarField::from_raw(g, out)
}

/// Outward flux of `v` through the grid circle at row `i`.
pub fn ring_flux(v: &VectorField, i: usize) -> f64 {
    let g = v.grid();
    g.radius(i) * g.dtheta() * v.v_r.row(i).iter().sum::<f64>()
}

/// Area-weighted sum of node values.
pub fn integrate(f: &ScalarField) -> f64 {
    let g = f.grid();
    (0..g.n_r()).map(|i| g.area(i) * f.row(i).iter().sum::<f64>()).sum()
}

/// Discrete `1/2 * integral |grad u|^2`, summed over cell faces.
///
/// When `u` vanishes on the boundary rows this equals
/// `-1/2 * integrate(u * laplacian(u))` to round-off.
pub fn dirichlet_energy(u: &ScalarField) -> f64 {
    let g = u.grid();
    let (h, dt, n) = (g.dr(), g.dtheta(), g.n_theta());
    let mut e = 0.0;
    for i in 0..g.n_r() - 1 {
        let w = g.face(i) * dt / h;
        let (a, b) = (u.row(i), u.row(i + 1));
        e += w * a.iter().zip(b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>();
    }
    for i in 0..g.n_r() {
        let r = g.radius(i);
        let w = g.area(i) / (r * r * dt * dt);
        let row = u.row(i);
        e += w * (0..n).map(|j| (row[(j + 1) % n] - row[j]).powi(2)).sum::<f64>();
    }
    0.5 * e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;
    use std::f64::consts::PI;

    fn max_err(f: &ScalarField, exact: impl Fn(f64, f64) -> f64, rows: impl Iterator<Item = usize>) -> f64 {
        let g = f.grid();
        let mut m: f64 = 0.0;
        for i in rows {
            for j in 0..g.n_theta() {
                m = m.max((f.at(i, j) - exact(g.radius(i), g.theta(j))).abs());
            }
        }
        m
    }

    #[test]
    fn gradient_of_r_squared_and_sin() {
        let g = Grid::annulus(1.0, 2.0, 33, 64).unwrap();
        let grad = gradient(&ScalarField::radial(&g, |r| r * r));
        assert!(max_err(&grad.v_r, |r, _| 2.0 * r, 0..33) < 1e-12);
        assert!(grad.v_theta.max_abs() < 1e-12);
        let grad = gradient(&ScalarField::from_polar(&g, |_, t| t.sin()));
        let e = max_err(&grad.v_theta, |r, t| t.cos() / r, 0..33);
        assert!(e < 2.0 * g.dtheta().powi(2), "{e}");
        let c = gradient(&ScalarField::constant(&g, 3.0));
        assert_eq!(c.v_r.max_abs(), 0.0);
        assert_eq!(c.v_theta.max_abs(), 0.0);
    }

    #[test]
    fn laplacian_r4_and_log() {
        let g = Grid::annulus(1.0, 2.0, 64, 32).unwrap();
        let l = laplacian(&ScalarField::radial(&g, |r| r.powi(4)));
        let rel = max_err(&l, |r, _| 16.0 * r * r, g.interior_rows()) / 16.0;
        assert!(rel < 1e-2, "{rel}");
        let l = laplacian(&ScalarField::radial(&g, f64::ln));
        assert!(l.max_abs() < 10.0 * g.dr() * g.dr(), "{}", l.max_abs());
    }

    #[test]
    fn laplacian_r2_exact_on_disk() {
        let g = Grid::disk(1.0, 20, 16).unwrap();
        let l = laplacian(&ScalarField::radial(&g, |r| r * r));
        assert!(max_err(&l, |_, _| 4.0, 0..20) < 1e-10);
    }

    #[test]
    fn velocity_examples() {
        let g = Grid::annulus(1.0, 2.0, 65, 64).unwrap();
        let v = velocity_from_stream(&ScalarField::radial(&g, |r| r.powi(4)));
        assert!(v.v_r.max_abs() < 1e-12);
        assert!(max_err(&v.v_theta, |r, _| 4.0 * r.powi(3), 0..65) < 1e-2);
        // u = y gives Cartesian v = (-1, 0) in this convention.
        let v = velocity_from_stream(&ScalarField::from_xy(&g, |_, y| y));
        let (vx, vy) = v.to_cartesian();
        assert!((&vx + &ScalarField::constant(&g, 1.0)).max_abs() < 1e-2);
        assert!(vy.max_abs() < 1e-2);
    }

    #[test]
    fn curl_examples() {
        let g = Grid::disk(1.0, 32, 32).unwrap();
        let rigid = VectorField::new(ScalarField::zeros(&g), ScalarField::radial(&g, |r| r)).unwrap();
        assert!(max_err(&curl(&rigid), |_, _| 2.0, 0..32) < 1e-12);
        assert_eq!(curl(&VectorField::zeros(&g)).max_abs(), 0.0);
        let a = Grid::annulus(1.0, 2.0, 64, 32).unwrap();
        let u = ScalarField::radial(&a, |r| r.powi(4));
        let w = curl(&velocity_from_stream(&u));
        let err = (&w - &laplacian(&u)).max_abs() / 64.0;
        assert!(err < 1e-2, "{err}");
    }

    #[test]
    fn flux_vanishes() {
        let g = Grid::disk(1.0, 16, 32).unwrap();
        let u = ScalarField::from_xy(&g, |x, y| (3.0 * x).sin() * y + x * x * y);
        let v = velocity_from_stream(&u);
        for i in 0..16 {
            assert!(ring_flux(&v, i).abs() < 1e-12);
        }
    }

    #[test]
    fn integrate_examples() {
        let g = Grid::annulus(1.0, 2.0, 17, 16).unwrap();
        assert!((integrate(&ScalarField::constant(&g, 1.0)) - 3.0 * PI).abs() < 1e-10);
        let quad = integrate(&ScalarField::radial(&g, |r| 2.0 - 3.0 * r * r));
        let exact = 2.0 * PI * ((4.0 - 0.75 * 16.0) - (1.0 - 0.75));
        assert!((quad - exact).abs() < 1e-11, "{quad} {exact}");
        assert!(integrate(&ScalarField::from_polar(&g, |_, t| t.sin())).abs() < 1e-12);
        let d = Grid::disk(1.0, 64, 16).unwrap();
        let q = integrate(&ScalarField::radial(&d, |r| r * r));
        assert!((q - PI / 2.0).abs() < 4.0 * d.dr() * d.dr(), "{q}");
    }

    #[test]
    fn energy_matches_green_identity() {
        for g in [Grid::disk(1.0, 12, 16).unwrap(), Grid::annulus(0.5, 1.5, 12, 16).unwrap()] {
            let r_out = g.r_outer();
            let r_in = g.r_inner();
            let u = ScalarField::from_polar(&g, |r, t| (r_out - r) * (r - r_in) * (1.0 + 0.3 * (2.0 * t).cos() + r * t.sin()));
            let lhs = dirichlet_energy(&u);
            let prod = u.zip_map(&laplacian(&u), |a, b| a * b).unwrap();
            let rhs = -0.5 * integrate(&prod);
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "{lhs} {rhs}");
        }
    }
}
