use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{parse_config, ConfigError, Flow, RunConfig, Subcommand};
use crate::elliptic::{coarea_identity_check, solve_poisson, BoundaryData, BoundaryValue, CoareaOptions};
use crate::evolve::{evolve, perturb, EvolutionConfig, Observation, Observer};
use crate::fields::{laplacian, read_dump, velocity_from_stream, write_dump, Grid, GridKind, ScalarField};
use crate::rearrange::{minimize_energy, recover_profile, DistributionFunction, MinimizeOptions};
use crate::stability::{angle_functionals, escape_experiment, growth_experiment};
use crate::steady::{arnold_ratio, steadiness_residual, vorticity_sign, SteadyError};
use crate::streamlines::{
    cell_size, classify_critical_point, curvature_stats, encircles, find_critical_points, trace, CriticalKind,
    CriticalPointReport, StreamlineError,
};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid setup: {0}")]
    Setup(String),
    #[error("{0}")]
    Experiment(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Setup(_) => 2,
            RunError::Experiment(_) | RunError::Io(_) => 1,
        }
    }
}

fn fail(e: impl std::fmt::Display) -> RunError {
    RunError::Experiment(e.to_string())
}

/// Six significant digits, fixed notation for moderate exponents.
pub fn g6(x: f64) -> String {
    if !x.is_finite() || x == 0.0 {
        return format!("{x}");
    }
    let e = x.abs().log10().floor() as i32;
    if (-4..6).contains(&e) {
        let s = format!("{:.*}", (5 - e).max(0) as usize, x);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.5e}")
    }
}

fn csv_line(vals: &[f64]) -> String {
    vals.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",")
}

struct Out<'a> {
    dir: &'a Path,
}

impl Out<'_> {
    fn file(&self, name: &str) -> Result<BufWriter<File>, RunError> {
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn dump(&self, name: &str, f: &ScalarField) -> Result<(), RunError> {
        let mut w = self.file(name)?;
        write_dump(f, &mut w)?;
        w.flush()?;
        Ok(())
    }

    fn table(&self, name: &str, header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), RunError> {
        let mut w = self.file(name)?;
        writeln!(w, "{header}")?;
        for r in rows {
            writeln!(w, "{}", csv_line(&r))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn grid_of(c: &RunConfig) -> Result<Arc<Grid>, RunError> {
    let g = match c.grid {
        GridKind::Annulus => Grid::annulus(c.r_inner, c.r_outer, c.n_r, c.n_theta),
        GridKind::Disk => Grid::disk(c.r_outer, c.n_r, c.n_theta),
    };
    g.map_err(|e| RunError::Setup(e.to_string()))
}

/// Boundary data read off the boundary rows of `u`.
fn boundary_of(u: &ScalarField) -> BoundaryData {
    let g = u.grid();
    let row = |i: usize| {
        let r = u.row(i);
        if r.iter().all(|&v| v == r[0]) {
            BoundaryValue::Constant(r[0])
        } else {
            BoundaryValue::Sampled(r.to_vec())
        }
    };
    BoundaryData { inner: (g.kind() == GridKind::Annulus).then(|| row(0)), outer: row(g.n_r() - 1) }
}

fn config_bc(c: &RunConfig, g: &Grid) -> BoundaryData {
    match g.kind() {
        GridKind::Disk => BoundaryData::disk(c.bc_outer),
        GridKind::Annulus => BoundaryData::annulus(c.bc_inner, c.bc_outer),
    }
}

fn load_h(c: &RunConfig, g: &Arc<Grid>) -> Result<ScalarField, RunError> {
    match &c.h_file {
        None => Ok(ScalarField::radial(g, |r| r * r - 2.0)),
        Some(p) => {
            let f = File::open(p).map_err(|e| RunError::Setup(format!("{}: {e}", p.display())))?;
            let h = read_dump(BufReader::new(f)).map_err(|e| RunError::Setup(format!("{}: {e}", p.display())))?;
            if !h.grid().same_shape(g) {
                return Err(RunError::Setup(format!("{} does not match the configured grid", p.display())));
            }
            Ok(ScalarField::from_raw(g.clone(), h.into_values()))
        }
    }
}

/// Stream function, vorticity and boundary data of the configured flow.
fn flow(c: &RunConfig, g: &Arc<Grid>) -> Result<(ScalarField, ScalarField, BoundaryData), RunError> {
    let (cx, cy) = (c.center_x, c.center_y);
    let poly = |f: &dyn Fn(f64, f64) -> f64| {
        let u = ScalarField::from_xy(g, |x, y| f(x - cx, y - cy));
        let w = laplacian(&u);
        let bc = boundary_of(&u);
        (u, w, bc)
    };
    let radial = |u: &dyn Fn(f64) -> f64, w: &dyn Fn(f64) -> f64| {
        let u = ScalarField::radial(g, u);
        let bc = boundary_of(&u);
        (u, ScalarField::radial(g, w), bc)
    };
    Ok(match c.flow {
        Flow::R4 => radial(&|r| r.powi(4), &|r| 16.0 * r * r),
        Flow::R2 => radial(&|r| r * r, &|_| 4.0),
        Flow::R2m1 => radial(&|r| r * r - 1.0, &|_| 4.0),
        Flow::Log => {
            if g.kind() == GridKind::Disk {
                return Err(RunError::Setup("flow `log` needs an annulus".into()));
            }
            radial(&|r| r.ln() / 2f64.ln(), &|_| 0.0)
        }
        Flow::Saddle => poly(&|x, y| x * y),
        Flow::Monkey => poly(&|x, y| (x * x * x - 3.0 * x * y * y) / 3.0),
        Flow::Z4 => poly(&|x, y| (x.powi(4) - 6.0 * x * x * y * y + y.powi(4)) / 4.0),
        Flow::Cusp => poly(&|x, y| y * y + x * x * x),
        Flow::Minimizer => {
            let h = load_h(c, g)?;
            let bc = config_bc(c, g);
            let m = minimize_energy(&h, &bc, &minimize_options(c)).map_err(fail)?;
            (m.u, m.omega, bc)
        }
    })
}

fn minimize_options(c: &RunConfig) -> MinimizeOptions {
    MinimizeOptions { max_iters: c.max_iters, tol: c.tol, direction: c.direction, ..Default::default() }
}

fn evolution_config(c: &RunConfig, t_end: f64) -> EvolutionConfig {
    EvolutionConfig {
        dt: c.dt,
        t_end,
        cfl: c.cfl,
        record_stride: c.record_stride,
        snapshot_stride: (c.snapshot_stride > 0).then_some(c.snapshot_stride),
    }
}

/// Radial shape of the perturbation, vanishing on both boundary circles.
fn psi(g: &Grid) -> impl Fn(f64) -> f64 {
    let (a, b) = (g.r_inner(), g.r_outer());
    move |r| (r - a) * (b - r)
}

/// Parses `text`, runs it and returns the process exit code. The summary
/// goes to stdout and errors to stderr.
pub fn run_text(text: &str) -> i32 {
    let c = match parse_config(text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return 2;
        }
    };
    match run(&c) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("{}: {e}", c.subcommand.name());
            e.exit_code()
        }
    }
}

/// Runs one experiment, writing `config.effective`, `summary.txt` and the
/// subcommand's data files under `out_dir`. Returns the summary text.
pub fn run(c: &RunConfig) -> Result<String, RunError> {
    let g = grid_of(c)?;
    fs::create_dir_all(&c.out_dir)?;
    let out = Out { dir: &c.out_dir };
    fs::write(c.out_dir.join("config.effective"), format!("{c}\n"))?;
    let summary = match c.subcommand {
        Subcommand::Steady => steady(c, &g)?,
        Subcommand::Evolve => run_evolve(c, &g, &out)?,
        Subcommand::Streamline => streamline(c, &g, &out)?,
        Subcommand::Classify => classify(c, &g, &out)?,
        Subcommand::Stability => stability(c, &g, &out)?,
        Subcommand::Minimize => minimize(c, &g, &out)?,
        Subcommand::CoareaCheck => coarea(c, &g, &out)?,
    };
    fs::write(c.out_dir.join("summary.txt"), format!("{summary}\n"))?;
    Ok(summary)
}

fn steady(c: &RunConfig, g: &Arc<Grid>) -> Result<String, RunError> {
    let (u, w, bc) = flow(c, g)?;
    let residual = steadiness_residual(&u, &w);
    // Round trip through the Poisson solver against the exact stream function.
    let poisson_error = solve_poisson(g, &w, &bc).map_err(fail)?.max_abs_diff(&u);
    let ratio = match arnold_ratio(&u, &w, None) {
        Ok(a) => format!(
            "ratio_inf={}, ratio_sup={}, excluded_frac={}, sign={}",
            g6(a.ratio_inf),
            g6(a.ratio_sup),
            g6(a.excluded_fraction),
            a.sign
        ),
        Err(SteadyError::TooDegenerate(_)) => format!("ratio_inf=n/a, ratio_sup=n/a, excluded_frac=1, sign={}", vorticity_sign(&w)),
        Err(e) => return Err(fail(e)),
    };
    Ok(format!("{ratio}, residual={}, poisson_error={}", g6(residual), g6(poisson_error)))
}

/// Angle functionals at each record; NaN where they are undefined.
struct Angles;

impl Observer for Angles {
    fn observe(&mut self, _t: f64, omega: &ScalarField, _u: &ScalarField) -> Observation {
        let a = angle_functionals(omega, 0.0).map(|a| (a.h_plus, a.h_minus)).unwrap_or((f64::NAN, f64::NAN));
        Observation { stop: false, angles: Some(a) }
    }
}

fn run_evolve(c: &RunConfig, g: &Arc<Grid>, out: &Out) -> Result<String, RunError> {
    let (_, w, bc) = flow(c, g)?;
    let w0 = perturb(&w, c.epsilon, c.m, psi(g));
    let traj = evolve(&w0, &bc, &evolution_config(c, c.t_end), &mut [&mut Angles]).map_err(fail)?;
    out.table(
        "series.csv",
        "t,energy,enstrophy,omega_plus,omega_minus",
        (0..traj.times.len())
            .map(|k| vec![traj.times[k], traj.energy[k], traj.enstrophy[k], traj.omega_plus[k], traj.omega_minus[k]]),
    )?;
    for (k, (_, s)) in traj.snapshots.iter().enumerate() {
        out.dump(&format!("omega_{k:04}.dump"), s)?;
    }
    out.dump("omega_final.dump", &traj.final_omega)?;
    let rel = |v: &[f64]| {
        let v0 = v[0];
        v.iter().map(|x| (x - v0).abs()).fold(0.0, f64::max) / v0.abs().max(f64::MIN_POSITIVE)
    };
    let areas = g.areas();
    let d0 = DistributionFunction::from_cells(w0.values(), &areas);
    let d1 = DistributionFunction::from_cells(traj.final_omega.values(), &areas);
    Ok(format!(
        "steps={}, t_end={}, energy_drift={}, enstrophy_drift={}, distribution_l1={}, max_change={}",
        traj.steps,
        g6(*traj.times.last().unwrap()),
        g6(rel(&traj.energy)),
        g6(rel(&traj.enstrophy)),
        g6(d0.relative_l1_distance(&d1)),
        g6(traj.final_omega.max_abs_diff(&w0))
    ))
}

fn seeds(c: &RunConfig, g: &Grid) -> Vec<[f64; 2]> {
    if c.seeds == 0 {
        return vec![[c.x0, c.y0]];
    }
    let (a, b) = (g.r_inner(), g.r_outer());
    (1..=c.seeds).map(|k| [a + (b - a) * k as f64 / (c.seeds + 1) as f64, 0.0]).collect()
}

fn streamline(c: &RunConfig, g: &Arc<Grid>, out: &Out) -> Result<String, RunError> {
    let (u, _, _) = flow(c, g)?;
    let v = velocity_from_stream(&u);
    let crit = find_critical_points(&v);
    let mut lines = vec![format!("critical_points={}", crit.len())];
    for (k, x0) in seeds(c, g).into_iter().enumerate() {
        let s = trace(&v, x0, c.step, c.max_steps).map_err(fail)?;
        out.table(
            &format!("streamline_{k:03}.csv"),
            "x,y,arclength,curvature",
            (0..s.points.len()).map(|i| vec![s.points[i][0], s.points[i][1], s.arclength[i], s.curvature[i]]),
        )?;
        let st = curvature_stats(&s);
        let enc = if s.closed && !crit.is_empty() { encircles(&s, &crit).map_err(fail)?.to_string() } else { "n/a".into() };
        lines.push(format!(
            "seed={k}, x0={}, y0={}, closed={}, closure_gap={}, length={}, period={}, kappa_max={}, kappa_mean={}, encircles={enc}",
            g6(x0[0]),
            g6(x0[1]),
            s.closed,
            g6(if s.closed { s.closure_gap } else { f64::NAN }),
            g6(s.length()),
            g6(if s.closed { s.duration() } else { f64::NAN }),
            g6(st.max),
            g6(st.mean),
        ));
    }
    Ok(lines.join("\n"))
}

fn classify(c: &RunConfig, g: &Arc<Grid>, out: &Out) -> Result<String, RunError> {
    let (u, _, _) = flow(c, g)?;
    let mut reports: Vec<CriticalPointReport> = Vec::new();
    let mut unresolved = Vec::new();
    for x in find_critical_points(&velocity_from_stream(&u)) {
        match classify_critical_point(&u, x) {
            Ok(rep) => {
                let [px, py] = rep.location;
                let size = cell_size(g, px.hypot(py));
                // Several candidates may recentre onto the same point.
                if reports.iter().all(|q| (q.location[0] - px).hypot(q.location[1] - py) > size) {
                    reports.push(rep);
                }
            }
            Err(StreamlineError::FitUnderresolved { .. }) => unresolved.push(x),
            Err(e) => return Err(fail(e)),
        }
    }
    let mut rows = Vec::new();
    let mut lines = vec![format!("critical_points={}, unresolved={}", reports.len(), unresolved.len())];
    for rep in reports {
        let (n, p) = match rep.kind {
            CriticalKind::Morse { a, b } => (0, [a, b, 0.0]),
            CriticalKind::Harmonic { n, a } => (n, [a.re, a.im, 0.0]),
            CriticalKind::Degenerate { a, alpha, n } => (n, [a, alpha.re, alpha.im]),
            CriticalKind::BoundaryDegenerate => (0, [f64::NAN; 3]),
        };
        let [x0, y0] = rep.location;
        rows.push(format!(
            "{},{},{},{n},{}",
            csv_line(&[x0]),
            csv_line(&[y0]),
            rep.kind.label(),
            csv_line(&[p[0], p[1], p[2], rep.residual])
        ));
        lines.push(format!(
            "x={}, y={}, type={}, n={n}, p1={}, p2={}, p3={}",
            g6(x0),
            g6(y0),
            rep.kind.label(),
            g6(p[0]),
            g6(p[1]),
            g6(p[2])
        ));
    }
    for [x0, y0] in unresolved {
        rows.push(format!("{},{},unresolved,0,{}", csv_line(&[x0]), csv_line(&[y0]), csv_line(&[f64::NAN; 4])));
    }
    let mut w = out.file("critical.csv")?;
    writeln!(w, "x,y,type,n,p1,p2,p3,residual")?;
    for r in rows {
        writeln!(w, "{r}")?;
    }
    w.flush()?;
    Ok(lines.join("\n"))
}

fn stability(c: &RunConfig, g: &Arc<Grid>, out: &Out) -> Result<String, RunError> {
    let (_, w, bc) = flow(c, g)?;
    let growth = growth_experiment(&w, &bc, c.epsilon, c.m, psi(g), &evolution_config(c, c.t_end)).map_err(fail)?;
    out.table(
        "growth.csv",
        "t,omega_plus,omega_minus",
        (0..growth.times.len()).map(|k| vec![growth.times[k], growth.omega_plus[k], growth.omega_minus[k]]),
    )?;
    let p = psi(g);
    let psi_max = g.radii().iter().map(|&r| p(r).abs()).fold(0.0, f64::max);
    let delta = if c.delta > 0.0 { c.delta } else { 10.0 * c.epsilon * psi_max };
    let esc = escape_experiment(&w, &bc, c.epsilon, c.m, psi(g), delta, &evolution_config(c, c.t_max)).map_err(fail)?;
    out.table(
        "stability.csv",
        "t,omega_plus,omega_minus,gauge",
        (0..esc.times.len()).map(|k| vec![esc.times[k], esc.omega_plus[k], esc.omega_minus[k], esc.gauge[k]]),
    )?;
    Ok(format!(
        "c0={}, d_omega_plus_dt0={}, branch={:?}, escaped={}, t_escape={}, delta={}",
        g6(growth.c0),
        g6(growth.d_omega_plus_dt0),
        growth.branch,
        esc.escaped,
        esc.t_escape.map(g6).unwrap_or_else(|| "none".into()),
        g6(delta)
    ))
}

fn minimize(c: &RunConfig, g: &Arc<Grid>, out: &Out) -> Result<String, RunError> {
    let h = load_h(c, g)?;
    let bc = config_bc(c, g);
    let m = minimize_energy(&h, &bc, &minimize_options(c)).map_err(fail)?;
    out.dump("omega.dump", &m.omega)?;
    out.dump("u.dump", &m.u)?;
    out.table("energy.csv", "k,energy", m.energy.iter().enumerate().map(|(k, &e)| vec![k as f64, e]))?;
    let residual = match &m.profile {
        Some(f) => {
            out.table("profile.csv", "u,f", f.breakpoints().iter().zip(f.values()).map(|(&s, &v)| vec![s, v]))?;
            g6(laplacian(&m.u).max_abs_diff_interior(&f.apply(&m.u)))
        }
        None => "n/a".into(),
    };
    Ok(format!(
        "iterations={}, converged={}, energy={}, omega_min={}, omega_max={}, residual={residual}",
        m.iterations,
        m.converged,
        g6(*m.energy.last().unwrap()),
        g6(m.omega.min()),
        g6(m.omega.max())
    ))
}

fn sample_points(c: &RunConfig, g: &Grid) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let (a, b) = (g.r_inner(), g.r_outer());
    let (lo, hi) = if g.kind() == GridKind::Disk { (0.0, 0.8 * b) } else { (a + 0.1 * (b - a), b - 0.1 * (b - a)) };
    (0..c.samples)
        .map(|_| {
            let s: f64 = rng.gen();
            let t: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            // Uniform in area between the two radii.
            let r = (lo * lo + s * (hi * hi - lo * lo)).sqrt();
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

fn coarea(c: &RunConfig, g: &Arc<Grid>, out: &Out) -> Result<String, RunError> {
    let (u, w, _) = flow(c, g)?;
    let f = recover_profile(&w, &u).map_err(fail)?;
    let pts = sample_points(c, g);
    let rep = coarea_identity_check(&u, &f, &pts, CoareaOptions { n_levels: c.levels, range: (0.0, 1.0) }).map_err(fail)?;
    out.table(
        "coarea.csv",
        "x,y,deviation",
        pts.iter().zip(&rep.per_sample).map(|(p, &d)| vec![p[0], p[1], d]),
    )?;
    Ok(format!("levels={}, samples={}, deviation={}", c.levels, pts.len(), g6(rep.deviation)))
}
