use std::sync::Arc;

use eulerlab::elliptic::{solve_poisson, BoundaryData};
use eulerlab::fields::{laplacian, read_dump, write_dump, Grid, ScalarField};
use eulerlab::rearrange::{transplant_values, Direction};
use eulerlab::steady::arnold_ratio;
use proptest::prelude::*;

fn grid() -> Arc<Grid> {
    Grid::annulus(1.0, 2.0, 16, 32).unwrap()
}

/// Smooth fields from a few random Fourier-radial modes.
fn smooth(coef: &[f64]) -> impl Fn(f64, f64) -> f64 + '_ {
    move |r, t| coef.iter().enumerate().map(|(k, c)| c * (r * (k as f64 + 1.0)).sin() * ((k as f64) * t).cos()).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn poisson_is_linear(a in prop::collection::vec(-2.0f64..2.0, 4), b in prop::collection::vec(-2.0f64..2.0, 4),
                         s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let g = grid();
        let wa = ScalarField::from_polar(&g, smooth(&a));
        let wb = ScalarField::from_polar(&g, smooth(&b));
        let ba = BoundaryData::annulus(a[0], a[1]);
        let bb = BoundaryData::annulus(b[0], b[1]);
        let ua = solve_poisson(&g, &wa, &ba).unwrap();
        let ub = solve_poisson(&g, &wb, &bb).unwrap();
        let w = wa.zip_map(&wb, |x, y| s * x + t * y).unwrap();
        let u = solve_poisson(&g, &w, &ba.combine(s, &bb, t)).unwrap();
        let lin = ua.zip_map(&ub, |x, y| s * x + t * y).unwrap();
        prop_assert!(u.max_abs_diff(&lin) < 1e-9 * (1.0 + lin.max_abs()));
    }

    #[test]
    fn poisson_round_trip(a in prop::collection::vec(-2.0f64..2.0, 4)) {
        let g = grid();
        let w = ScalarField::from_polar(&g, smooth(&a));
        let u = solve_poisson(&g, &w, &BoundaryData::annulus(0.3, -0.2)).unwrap();
        prop_assert!(laplacian(&u).max_abs_diff_interior(&w) < 1e-9 * (1.0 + w.max_abs()));
    }

    #[test]
    fn transplant_permutes_equal_areas(h in prop::collection::vec(-5.0f64..5.0, 1..40), seed in any::<u64>()) {
        let n = h.len();
        let u: Vec<f64> = (0..n).map(|k| ((k as u64 * 2654435761 + seed) % 1000) as f64).collect();
        for dir in [Direction::Min, Direction::Max] {
            let out = transplant_values(&h, &u, &vec![1.0; n], dir);
            let (mut a, mut b) = (out.clone(), h.clone());
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
            for i in 0..n {
                for j in 0..n {
                    if u[i] < u[j] {
                        let ordered = if dir == Direction::Min { out[i] <= out[j] } else { out[i] >= out[j] };
                        prop_assert!(ordered);
                    }
                }
            }
        }
    }

    #[test]
    fn arnold_ratio_scales(p in 2.0f64..6.0, c in 0.1f64..10.0) {
        let g = grid();
        let u = ScalarField::radial(&g, |r| r.powf(p));
        let w = laplacian(&u);
        let a = arnold_ratio(&u, &w, None).unwrap();
        let b = arnold_ratio(&u.map(|v| c * v), &w.map(|v| c * v), None).unwrap();
        prop_assert!((a.ratio_inf - b.ratio_inf).abs() <= 1e-9 * a.ratio_inf.abs());
        prop_assert!((a.ratio_sup - b.ratio_sup).abs() <= 1e-9 * a.ratio_sup.abs());
        // Scaling the vorticity alone scales the ratio inversely.
        let d = arnold_ratio(&u, &w.map(|v| c * v), None).unwrap();
        prop_assert!((d.ratio_inf * c - a.ratio_inf).abs() <= 1e-9 * a.ratio_inf.abs());
    }

    #[test]
    fn dump_round_trip(a in prop::collection::vec(-1e6f64..1e6, 4), disk in any::<bool>()) {
        let g = if disk { Grid::disk(0.7, 6, 10).unwrap() } else { Grid::annulus(0.3, 1.9, 5, 12).unwrap() };
        let f = ScalarField::from_polar(&g, smooth(&a));
        let mut buf = Vec::new();
        write_dump(&f, &mut buf).unwrap();
        let back = read_dump(buf.as_slice()).unwrap();
        prop_assert_eq!(back.values(), f.values());
        prop_assert_eq!(back.grid().kind(), g.kind());
    }
}
