use std::path::Path;
use std::process::Command;

fn eulerlab(config: &str, out: &Path) -> (i32, String, String) {
    let dir = out.parent().unwrap();
    let path = dir.join(format!("{}.conf", out.file_name().unwrap().to_string_lossy()));
    std::fs::write(&path, config).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_eulerlab")).arg(&path).arg("--out-dir").arg(out).output().unwrap();
    (o.status.code().unwrap(), String::from_utf8(o.stdout).unwrap(), String::from_utf8(o.stderr).unwrap())
}

#[test]
fn steady_reports_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("steady");
    let (code, stdout, _) = eulerlab("subcommand = steady\nflow = r4\n", &out);
    assert_eq!(code, 0);
    let ratio: f64 = stdout.split("ratio_inf=").nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((ratio - 0.125).abs() < 0.0025, "{stdout}");
    assert!(stdout.contains("sign=+"));
    let echo = std::fs::read_to_string(out.join("config.effective")).unwrap();
    assert!(echo.contains("subcommand = steady") && echo.contains("n_r = 64"));
    assert_eq!(std::fs::read_to_string(out.join("summary.txt")).unwrap().trim(), stdout.trim());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, _, err) = eulerlab("n_r = 2\n", &tmp.path().join("bad_grid"));
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("line 1"));
    let (code, _, err) = eulerlab("epsilon = banana\n", &tmp.path().join("bad_type"));
    assert_eq!(code, 2);
    assert!(err.contains("line 1") && err.contains("epsilon"), "{err}");
    let (code, _, _) = eulerlab("colour = blue\n", &tmp.path().join("bad_key"));
    assert_eq!(code, 2);
    // Radial instability needs a positive, increasing vorticity.
    let (code, _, err) = eulerlab("subcommand = stability\ngrid = disk\nr_outer = 1\nflow = r2m1\n", &tmp.path().join("bad_run"));
    assert_eq!(code, 1, "{err}");
}

#[test]
fn output_formats() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("min");
    let (code, stdout, err) =
        eulerlab("subcommand = minimize\ngrid = disk\nr_outer = 1\nn_r = 16\nn_theta = 32\n", &out);
    assert_eq!(code, 0, "{err}");
    assert!(stdout.contains("converged=true"));
    let profile = std::fs::read_to_string(out.join("profile.csv")).unwrap();
    assert!(profile.starts_with("u,f\n"));
    let energy = std::fs::read_to_string(out.join("energy.csv")).unwrap();
    let e: Vec<f64> = energy.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(e.windows(2).all(|p| p[1] <= p[0]));
    let omega = eulerlab::fields::read_dump(std::io::BufReader::new(std::fs::File::open(out.join("omega.dump")).unwrap())).unwrap();
    assert_eq!(omega.grid().n_r(), 16);

    let out = tmp.path().join("line");
    let (code, _, err) = eulerlab("subcommand = streamline\nx0 = 1.5\n", &out);
    assert_eq!(code, 0, "{err}");
    let s = std::fs::read_to_string(out.join("streamline_000.csv")).unwrap();
    assert!(s.starts_with("x,y,arclength,curvature\n"));
    let first: Vec<f64> = s.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], 1.5);
    // 17 significant digits in data files.
    assert!(s.lines().nth(2).unwrap().split(',').all(|v| v.split('e').next().unwrap().trim_start_matches('-').len() == 18));
}

#[test]
fn evolve_series_and_env_default() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("ev.conf");
    std::fs::write(&path, "subcommand = evolve\nn_r = 16\nn_theta = 32\nt_end = 0.05\nsnapshot_stride = 10\n").unwrap();
    let root = tmp.path().join("root");
    let o = Command::new(env!("CARGO_BIN_EXE_eulerlab"))
        .arg(&path)
        .env(eulerlab::cli::OUT_ENV, &root)
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let series = std::fs::read_to_string(root.join("series.csv")).unwrap();
    assert!(series.starts_with("t,energy,enstrophy,omega_plus,omega_minus\n"));
    assert!(root.join("omega_0000.dump").exists() && root.join("omega_final.dump").exists());
}
