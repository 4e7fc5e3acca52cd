//! Acceptance run: one PASS/FAIL line per criterion. Exits non-zero when a
//! criterion fails that is not in `KNOWN_RED` (see README).

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use eulerlab::cli::{parse_config, run};
use eulerlab::elliptic::{coarea_identity_check, solve_poisson, BoundaryData, CoareaOptions};
use eulerlab::evolve::{evolve, perturb, EvolutionConfig};
use eulerlab::fields::{laplacian, velocity_from_stream, Grid, ScalarField};
use eulerlab::rearrange::{
    brute_force_min_energy, minimize_discrete, minimize_energy, DistributionFunction, GraphProblem,
    MinimizeOptions,
};
use eulerlab::stability::{escape_experiment, growth_experiment, Branch};
use eulerlab::steady::{arnold_ratio, radial_steady, VorticitySign};
use eulerlab::streamlines::{
    cell_size, classify_critical_point, curvature_stats, encircles, find_critical_points, trace, CriticalKind,
};
use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria that fail at the required tolerances; analysis in the README.
const KNOWN_RED: &[usize] = &[4, 7];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn psi(r: f64) -> f64 {
    (r - 1.0) * (2.0 - r)
}

fn annulus(n_r: usize, n_theta: usize) -> Arc<Grid> {
    Grid::annulus(1.0, 2.0, n_r, n_theta).unwrap()
}

fn elliptic() -> Outcome {
    let t = Instant::now();
    let err = |n: usize| {
        let g = annulus(n, 2 * n);
        let u = solve_poisson(&g, &ScalarField::zeros(&g), &BoundaryData::annulus(0.0, 1.0)).unwrap();
        u.max_abs_diff(&ScalarField::radial(&g, |r| r.ln() / 2f64.ln()))
    };
    // A forcing with an angular mode, so the order is not masked by round-off.
    let forced = |n: usize| {
        let g = annulus(n, 2 * n);
        let exact = ScalarField::from_polar(&g, |r, th| (r - 1.0) * (2.0 - r) * r * th.cos());
        let w = ScalarField::from_polar(&g, |r, th| (9.0 - 8.0 * r) * th.cos());
        let u = solve_poisson(&g, &w, &BoundaryData::annulus(0.0, 0.0)).unwrap();
        u.max_abs_diff(&exact)
    };
    let e128 = err(128);
    let errs: Vec<f64> = [16, 32, 64, 128].iter().map(|&n| forced(n)).collect();
    let order = errs.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
    let secs = t.elapsed().as_secs_f64();
    outcome(
        e128 < 1e-5 && order >= 1.9 && secs < 5.0,
        format!("harmonic error {e128:.2e} at n_r = 128, forced error {:.2e} at n_r = 128, min order {order:.3}, {secs:.2} s", errs[3]),
    )
}

fn steady_fidelity() -> Outcome {
    let t = Instant::now();
    let g = annulus(64, 128);
    let f = radial_steady(&g, |r| r.powi(4)).unwrap();
    let a = arnold_ratio(&f.u, &f.omega, None).unwrap();
    let w = ScalarField::radial(&g, |r| 16.0 * r * r);
    let cfg = EvolutionConfig { t_end: 1.0, ..Default::default() };
    let traj = evolve(&w, &BoundaryData::annulus(1.0, 16.0), &cfg, &mut []).unwrap();
    let drift = traj.final_omega.max_abs_diff(&w);
    let secs = t.elapsed().as_secs_f64();
    let ok = f.residual < 1e-8
        && (a.ratio_inf / 0.125 - 1.0).abs() < 0.02
        && (a.ratio_sup / 0.5 - 1.0).abs() < 0.02
        && a.sign == VorticitySign::Positive
        && drift < 1e-6
        && secs < 60.0;
    outcome(
        ok,
        format!(
            "residual {:.2e}, ratio {:.5}/{:.5}, sign {}, drift {drift:.2e} at T = 1, {secs:.1} s",
            f.residual, a.ratio_inf, a.ratio_sup, a.sign
        ),
    )
}

fn perturbed() -> (ScalarField, BoundaryData, ScalarField) {
    let g = annulus(64, 128);
    let w = ScalarField::radial(&g, |r| 16.0 * r * r);
    let w0 = perturb(&w, 1e-3, 1, psi);
    (w, BoundaryData::annulus(1.0, 16.0), w0)
}

fn conservation() -> Outcome {
    let (_, bc, w0) = perturbed();
    let cfg = EvolutionConfig { t_end: 0.5, ..Default::default() };
    let traj = evolve(&w0, &bc, &cfg, &mut []).unwrap();
    let rel = |v: &[f64]| v.iter().map(|x| (x / v[0] - 1.0).abs()).fold(0.0, f64::max);
    let areas = w0.grid().areas();
    let d = DistributionFunction::from_cells(w0.values(), &areas)
        .relative_l1_distance(&DistributionFunction::from_cells(traj.final_omega.values(), &areas));
    let (e, z) = (rel(&traj.energy), rel(&traj.enstrophy));
    outcome(e < 1e-3 && z < 1e-3 && d < 0.02, format!("energy {e:.2e}, enstrophy {z:.2e}, distribution L1 {d:.2e}"))
}

fn growth() -> Outcome {
    let (w, bc, _) = perturbed();
    let cfg = EvolutionConfig { t_end: 0.5, ..Default::default() };
    match growth_experiment(&w, &bc, 1e-3, 1, psi, &cfg) {
        Ok(r) => {
            let dom = r.dominant();
            let monotone = dom[..r.window].windows(2).all(|p| p[1] > p[0]);
            let ok = r.branch == Branch::Plus && r.d_omega_plus_dt0 > 0.0 && r.c0 > 0.0 && monotone;
            outcome(
                ok,
                format!(
                    "branch {:?}, d omega+/dt(0) = {:.3e}, c0 = {:.4}, monotone over window: {monotone}",
                    r.branch, r.d_omega_plus_dt0, r.c0
                ),
            )
        }
        Err(e) => outcome(false, format!("error: {e}")),
    }
}

fn escape() -> Outcome {
    let t = Instant::now();
    let (w, bc, _) = perturbed();
    let delta = 10.0 * 1e-3 * 0.25;
    let cfg = EvolutionConfig { t_end: 20.0, ..Default::default() };
    let r = escape_experiment(&w, &bc, 1e-3, 1, psi, delta, &cfg).unwrap();
    let secs = t.elapsed().as_secs_f64();
    outcome(
        r.escaped && r.t_escape.is_some_and(|t| t < 20.0) && secs < 600.0,
        format!("escaped {} at t = {:?}, gauge(0) = {:.3e} vs delta {delta:.2e}, {secs:.1} s", r.escaped, r.t_escape, r.gauge[0]),
    )
}

fn coarea() -> Outcome {
    let g = Grid::disk(1.0, 64, 128).unwrap();
    let u = ScalarField::radial(&g, |r| r * r - 1.0);
    let f = eulerlab::rearrange::MonotoneProfile::constant(4.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pts: Vec<[f64; 2]> = (0..10)
        .map(|_| {
            let (r, t): (f64, f64) = (0.8 * rng.gen::<f64>().sqrt(), rng.gen::<f64>() * std::f64::consts::TAU);
            [r * t.cos(), r * t.sin()]
        })
        .collect();
    let dev = |n| coarea_identity_check(&u, &f, &pts, CoareaOptions { n_levels: n, ..Default::default() }).unwrap().deviation;
    let (d200, d400) = (dev(200), dev(400));
    outcome(d200 < 1e-2 && d400 < d200, format!("deviation {d200:.3e} (200 levels), {d400:.3e} (400 levels)"))
}

fn oracle() -> Outcome {
    let opts = MinimizeOptions::default();
    let mut monotone_energy = true;
    let mut exact_rearrangement = true;
    let mut check = |p: &GraphProblem, h: &[f64]| -> bool {
        let r = minimize_discrete(p, h, &opts).unwrap();
        let (best, _) = brute_force_min_energy(p, h).unwrap();
        monotone_energy &= r.energy.windows(2).all(|e| e[1] <= e[0] + 1e-12 * e[0].abs());
        let (mut a, mut b) = (r.omega.clone(), h.to_vec());
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        exact_rearrangement &= a == b;
        (r.energy.last().unwrap() - best).abs() <= 1e-10 * best.abs().max(1.0)
    };
    // Named instances.
    let ring = GraphProblem::annulus_row(1.0, 2.0, 6).unwrap();
    let named_ring = check(&ring, &[-6.0, -5.0, -4.0, -3.0, -2.0, -1.0]);
    let shells = GraphProblem::disk_shells(1.0, 8).unwrap();
    let h: Vec<f64> = (0..8).map(|k| -(2.0 - GraphProblem::shell_radius(1.0, 8, k).powi(2))).collect();
    let named_disk = check(&shells, &h);

    // Seeded random families.
    let mut counts = BTreeMap::new();
    for family in ["ring", "annulus-row", "disk-shells", "graph"] {
        let mut hits = 0;
        for seed in 0..300u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(3..=8);
            let p = match family {
                "ring" => GraphProblem::ring(n, rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0), rng.gen_range(0.1..2.0)),
                "annulus-row" => {
                    let a = rng.gen_range(0.2..2.0);
                    GraphProblem::annulus_row(a, a + rng.gen_range(0.1..2.0), n)
                }
                "disk-shells" => GraphProblem::disk_shells(rng.gen_range(0.5..2.0), n),
                _ => {
                    let mut edges = Vec::new();
                    for i in 0..n {
                        for j in i + 1..n {
                            if rng.gen_bool(0.5) {
                                edges.push((i, j, rng.gen_range(0.1..5.0)));
                            }
                        }
                    }
                    let ground = (0..n).map(|_| rng.gen_range(0.1..3.0)).collect();
                    GraphProblem::new(rng.gen_range(0.1..2.0), edges, ground)
                }
            }
            .unwrap();
            let h: Vec<f64> = (0..n).map(|_| -rng.gen_range(0.0..5.0)).collect();
            hits += check(&p, &h) as usize;
        }
        counts.insert(family, hits);
    }
    let all = counts.values().all(|&c| c == 300);
    let summary: Vec<String> = counts.iter().map(|(k, v)| format!("{k} {v}/300")).collect();
    outcome(
        named_ring && named_disk && all && monotone_energy && exact_rearrangement,
        format!(
            "named ring {named_ring}, named disk {named_disk}; {}; energy non-increasing {monotone_energy}, exact rearrangement {exact_rearrangement}",
            summary.join(", ")
        ),
    )
}

fn minimizer(n_r: usize) -> (Arc<Grid>, eulerlab::rearrange::MinimizeResult) {
    let g = Grid::disk(1.0, n_r, 2 * n_r).unwrap();
    let h = ScalarField::radial(&g, |r| r * r - 2.0);
    let m = minimize_energy(&h, &BoundaryData::disk(0.0), &MinimizeOptions::default()).unwrap();
    (g, m)
}

fn minimizer_suite() -> Outcome {
    let t = Instant::now();
    let (g, m) = minimizer(64);
    let f = m.profile.clone().unwrap();
    let negative = m.omega.max() < 0.0;
    let residual = laplacian(&m.u).max_abs_diff_interior(&f.apply(&m.u));
    let nondecreasing = f.values().windows(2).all(|p| p[1] >= p[0]);
    let v = velocity_from_stream(&m.u);
    let crit = find_critical_points(&v);
    let mut closed = 0;
    let mut worst_gap: f64 = 0.0;
    let mut all_encircle = true;
    let seeds: Vec<f64> = (1..=9).map(|k| 0.1 * k as f64).collect();
    for &r0 in &seeds {
        let s = trace(&v, [r0, 0.0], 0.005, 100_000).unwrap();
        if s.closed && s.closure_gap < cell_size(&g, r0) {
            closed += 1;
        }
        worst_gap = worst_gap.max(s.closure_gap);
        all_encircle &= s.closed && encircles(&s, &crit).unwrap_or(false);
    }
    let secs = t.elapsed().as_secs_f64();
    let ok = m.converged
        && negative
        && residual < 1e-6
        && nondecreasing
        && crit.len() == 1
        && closed == seeds.len()
        && all_encircle
        && secs < 120.0;
    outcome(
        ok,
        format!(
            "omega* max {:.3}, residual {residual:.2e}, f* non-decreasing {nondecreasing}, {} critical point(s), {closed}/{} closed (gap <= {worst_gap:.1e}), encircle {all_encircle}, {secs:.1} s",
            m.omega.max(),
            crit.len(),
            seeds.len()
        ),
    )
}

fn rotate(p: [f64; 2], phi: f64) -> [f64; 2] {
    let (c, s) = (phi.cos(), phi.sin());
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

fn classifier() -> Outcome {
    let g = Grid::disk(1.0, 64, 128).unwrap();
    let c = [0.3, 0.2];
    let within = |x: f64, y: f64| (x - y).abs() <= 0.05 * y.abs();
    let cwithin = |x: Complex<f64>, y: Complex<f64>| (x - y).norm() <= 0.05 * y.norm();
    // Stream function rotated by phi about the origin, with its centre.
    let field = |f: &dyn Fn(f64, f64) -> f64, phi: f64| {
        let cr = rotate(c, phi);
        let u = ScalarField::from_xy(&g, |x, y| {
            let q = rotate([x - cr[0], y - cr[1]], -phi);
            f(q[0], q[1])
        });
        (u, cr)
    };
    let classify = |f: &dyn Fn(f64, f64) -> f64, phi: f64| {
        let (u, cr) = field(f, phi);
        let x = find_critical_points(&velocity_from_stream(&u));
        let start = x.iter().copied().min_by(|a, b| {
            let d = |p: &[f64; 2]| (p[0] - cr[0]).hypot(p[1] - cr[1]);
            d(a).total_cmp(&d(b))
        });
        start.and_then(|s| classify_critical_point(&u, s).ok()).map(|r| (r, cr))
    };
    let mut notes = Vec::new();
    let mut ok = true;
    let phi = 0.7;
    let cases: [(&str, Box<dyn Fn(f64, f64) -> f64>); 4] = [
        ("i", Box::new(|x, y| x * y)),
        ("ii n=2", Box::new(|x, y| (x * x * x - 3.0 * x * y * y) / 3.0)),
        ("ii n=3", Box::new(|x, y| (x.powi(4) - 6.0 * x * x * y * y + y.powi(4)) / 4.0)),
        ("iii", Box::new(|x, y| y * y + x * x * x)),
    ];
    for (name, f) in &cases {
        let (Some((r0, c0)), Some((r1, c1))) = (classify(f.as_ref(), 0.0), classify(f.as_ref(), phi)) else {
            ok = false;
            notes.push(format!("{name}: not found"));
            continue;
        };
        let located = |r: &eulerlab::streamlines::CriticalPointReport, c: [f64; 2]| {
            (r.location[0] - c[0]).hypot(r.location[1] - c[1]) < g.dr()
        };
        let (good, equiv) = match (r0.kind, r1.kind) {
            (CriticalKind::Morse { a, b }, CriticalKind::Morse { a: a1, b: b1 }) => {
                (within(a, -1.0) && within(b, -1.0), within(a1, a) && within(b1, b))
            }
            (CriticalKind::Harmonic { n, a }, CriticalKind::Harmonic { n: n1, a: a1 }) => {
                let want = if *name == "ii n=2" { 2 } else { 3 };
                // Rotating the flow by phi turns a by -(n + 1) phi.
                let turn = Complex::from_polar(1.0, -((n + 1) as f64) * phi);
                (n == want && cwithin(a, Complex::new(1.0, 0.0)), n1 == n && cwithin(a1, a * turn))
            }
            (CriticalKind::Degenerate { a, alpha, n }, CriticalKind::Degenerate { a: a1, alpha: al1, n: n1 }) => (
                n == 2 && within(a.abs(), 2.0) && cwithin(alpha, Complex::new(3.0, 0.0)),
                n1 == n && within(a1, a) && cwithin(al1, alpha),
            ),
            _ => (false, false),
        };
        let here = good && equiv && located(&r0, c0) && located(&r1, c1);
        ok &= here;
        notes.push(format!("{name}: {}", if here { "ok" } else { "mismatch" }));
        if !here {
            notes.push(format!("{:?} / {:?}", r0.kind, r1.kind));
        }
    }
    outcome(ok, notes.join(", "))
}

fn curvature() -> Outcome {
    let seeds = [0.2, 0.4, 0.6, 0.8];
    let stats: Vec<Vec<(f64, f64)>> = [32, 64, 128]
        .iter()
        .map(|&n| {
            let (_, m) = minimizer(n);
            let v = velocity_from_stream(&m.u);
            seeds
                .iter()
                .map(|&r0| {
                    let st = curvature_stats(&trace(&v, [r0, 0.0], 0.005, 100_000).unwrap());
                    (st.max, st.mean)
                })
                .collect()
        })
        .collect();
    let mut worst: f64 = 0.0;
    for lv in stats.windows(2) {
        for (a, b) in lv[0].iter().zip(&lv[1]) {
            worst = worst.max((a.0 / b.0 - 1.0).abs()).max((a.1 / b.1 - 1.0).abs());
        }
    }
    outcome(worst < 0.05, format!("largest relative change of max/mean curvature between refinements {worst:.2e}"))
}

fn determinism() -> Outcome {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut names: Vec<_> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    let tmp = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    let mut files = 0;
    for path in &names {
        let text = std::fs::read_to_string(path).unwrap();
        let stem = path.file_stem().unwrap().to_string_lossy().to_string();
        let mut outs = Vec::new();
        for rep in 0..2 {
            let mut c = parse_config(&text).unwrap();
            c.out_dir = tmp.path().join(format!("{stem}_{rep}"));
            run(&c).unwrap();
            outs.push(c.out_dir);
        }
        let mut entries: Vec<_> = std::fs::read_dir(&outs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
        entries.sort();
        for e in entries {
            // The echoed config records the output directory itself.
            if e == "config.effective" {
                continue;
            }
            files += 1;
            if std::fs::read(outs[0].join(&e)).unwrap() != std::fs::read(outs[1].join(&e)).ok().unwrap_or_default() {
                differing.push(format!("{stem}/{}", e.to_string_lossy()));
            }
        }
    }
    outcome(
        differing.is_empty() && !names.is_empty(),
        format!("{} configs, {files} output files compared, differing: {differing:?}", names.len()),
    )
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 11] = [
        (1, "elliptic correctness", elliptic),
        (2, "steady-state fidelity", steady_fidelity),
        (3, "conservation", conservation),
        (4, "growth of the angle functional", growth),
        (5, "escape from the C2 neighbourhood", escape),
        (6, "coarea identity", coarea),
        (7, "oracle equivalence", oracle),
        (8, "minimizer suite", minimizer_suite),
        (9, "critical point classifier", classifier),
        (10, "curvature stabilization", curvature),
        (11, "determinism", determinism),
    ];
    let mut unexpected = Vec::new();
    for (k, name, f) in criteria {
        let o = f();
        println!("criterion {k:2} {} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass && !KNOWN_RED.contains(&k) {
            unexpected.push(k);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
