use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::fields::GridKind;
use crate::rearrange::Direction;

/// Default output root when `out_dir` is not given.
pub const OUT_ENV: &str = "EULERLAB_OUT";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: `{key}` expects {expected}, got `{value}`")]
    TypeError { line: usize, key: String, expected: &'static str, value: String },
    #[error("line {line}: `{key}` {msg}")]
    RangeError { line: usize, key: String, msg: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: `{key}` given twice")]
    Duplicate { line: usize, key: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Steady,
    Evolve,
    Streamline,
    Classify,
    Stability,
    Minimize,
    CoareaCheck,
}

impl Subcommand {
    pub const ALL: [Subcommand; 7] = [
        Subcommand::Steady,
        Subcommand::Evolve,
        Subcommand::Streamline,
        Subcommand::Classify,
        Subcommand::Stability,
        Subcommand::Minimize,
        Subcommand::CoareaCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Steady => "steady",
            Subcommand::Evolve => "evolve",
            Subcommand::Streamline => "streamline",
            Subcommand::Classify => "classify",
            Subcommand::Stability => "stability",
            Subcommand::Minimize => "minimize",
            Subcommand::CoareaCheck => "coarea-check",
        }
    }
}

impl FromStr for Subcommand {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Subcommand::ALL.into_iter().find(|c| c.name() == s).ok_or(())
    }
}

/// Named stream functions. Polynomial ones are centred at `(center_x, center_y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    /// `r^4`, vorticity `16 r^2`.
    R4,
    /// `r^2`, rigid rotation.
    R2,
    /// `r^2 - 1`.
    R2m1,
    /// `ln r / ln 2`, harmonic on annulus(1, 2).
    Log,
    /// `x y`, a nondegenerate saddle.
    Saddle,
    /// `Re z^3 / 3`.
    Monkey,
    /// `Re z^4 / 4`.
    Z4,
    /// `y^2 + x^3`, degenerate.
    Cusp,
    /// Energy minimizer over rearrangements of `h`.
    Minimizer,
}

impl Flow {
    const NAMES: [(&'static str, Flow); 9] = [
        ("r4", Flow::R4),
        ("r2", Flow::R2),
        ("r2m1", Flow::R2m1),
        ("log", Flow::Log),
        ("saddle", Flow::Saddle),
        ("monkey", Flow::Monkey),
        ("z4", Flow::Z4),
        ("cusp", Flow::Cusp),
        ("minimizer", Flow::Minimizer),
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES.iter().find(|(_, f)| *f == self).unwrap().0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub grid: GridKind,
    pub r_inner: f64,
    pub r_outer: f64,
    pub n_r: usize,
    pub n_theta: usize,
    pub flow: Flow,
    pub center_x: f64,
    pub center_y: f64,
    /// Dump file with the rearranged field; `None` uses `r^2 - 2`.
    pub h_file: Option<PathBuf>,
    pub bc_inner: f64,
    pub bc_outer: f64,
    pub epsilon: f64,
    pub m: u32,
    pub t_end: f64,
    pub t_max: f64,
    /// `0` means `10 * epsilon * max|psi|`.
    pub delta: f64,
    pub cfl: f64,
    pub dt: f64,
    pub record_stride: usize,
    /// `0` disables field dumps during `evolve`.
    pub snapshot_stride: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub direction: Direction,
    pub levels: usize,
    pub samples: usize,
    pub x0: f64,
    pub y0: f64,
    /// Extra seeds spread along the positive x axis; `0` traces from `(x0, y0)` only.
    pub seeds: usize,
    pub step: f64,
    pub max_steps: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            subcommand: Subcommand::Steady,
            grid: GridKind::Annulus,
            r_inner: 1.0,
            r_outer: 2.0,
            n_r: 64,
            n_theta: 128,
            flow: Flow::R4,
            center_x: 0.0,
            center_y: 0.0,
            h_file: None,
            bc_inner: 0.0,
            bc_outer: 0.0,
            epsilon: 1e-3,
            m: 1,
            t_end: 1.0,
            t_max: 20.0,
            delta: 0.0,
            cfl: 0.4,
            dt: 0.0,
            record_stride: 10,
            snapshot_stride: 0,
            max_iters: 200,
            tol: 1e-14,
            direction: Direction::Min,
            levels: 200,
            samples: 10,
            x0: 1.5,
            y0: 0.0,
            seeds: 0,
            step: 0.01,
            max_steps: 100_000,
            seed: 0,
            out_dir: default_out_dir(),
        }
    }
}

fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
}

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Entry<'_> {
    fn parse<T: FromStr>(&self, expected: &'static str) -> Result<T, ConfigError> {
        self.value.parse().map_err(|_| ConfigError::TypeError {
            line: self.line,
            key: self.key.into(),
            expected,
            value: self.value.into(),
        })
    }

    fn float(&self) -> Result<f64, ConfigError> {
        let v: f64 = self.parse("a number")?;
        if !v.is_finite() {
            return Err(self.range("must be finite"));
        }
        Ok(v)
    }

    fn range(&self, msg: impl Into<String>) -> ConfigError {
        ConfigError::RangeError { line: self.line, key: self.key.into(), msg: msg.into() }
    }
}

/// Parses `key = value` lines; `#` starts a comment. Missing keys take
/// their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut c = RunConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    let mut lines = std::collections::HashMap::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body.split_once('=').ok_or(ConfigError::Syntax { line })?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax { line });
        }
        if seen.contains(&key) {
            return Err(ConfigError::Duplicate { line, key: key.into() });
        }
        seen.push(key);
        lines.insert(key, line);
        let e = Entry { line, key, value };
        match key {
            "subcommand" => {
                c.subcommand = value.parse().map_err(|_| ConfigError::TypeError {
                    line,
                    key: key.into(),
                    expected: "steady|evolve|streamline|classify|stability|minimize|coarea-check",
                    value: value.into(),
                })?
            }
            "grid" => {
                c.grid = match value {
                    "annulus" => GridKind::Annulus,
                    "disk" => GridKind::Disk,
                    _ => return Err(ConfigError::TypeError { line, key: key.into(), expected: "annulus|disk", value: value.into() }),
                }
            }
            "r_inner" => c.r_inner = e.float()?,
            "r_outer" => c.r_outer = e.float()?,
            "n_r" => c.n_r = e.parse("an integer")?,
            "n_theta" => c.n_theta = e.parse("an integer")?,
            "flow" => {
                c.flow = Flow::NAMES.iter().find(|(n, _)| *n == value).map(|p| p.1).ok_or_else(|| {
                    ConfigError::TypeError {
                        line,
                        key: key.into(),
                        expected: "r4|r2|r2m1|log|saddle|monkey|z4|cusp|minimizer",
                        value: value.into(),
                    }
                })?
            }
            "center_x" => c.center_x = e.float()?,
            "center_y" => c.center_y = e.float()?,
            "h_file" => c.h_file = Some(PathBuf::from(value)),
            "bc_inner" => c.bc_inner = e.float()?,
            "bc_outer" => c.bc_outer = e.float()?,
            "epsilon" => c.epsilon = e.float()?,
            "m" => c.m = e.parse("an integer")?,
            "t_end" => c.t_end = e.float()?,
            "t_max" => c.t_max = e.float()?,
            "delta" => c.delta = e.float()?,
            "cfl" => c.cfl = e.float()?,
            "dt" => c.dt = e.float()?,
            "record_stride" => c.record_stride = e.parse("an integer")?,
            "snapshot_stride" => c.snapshot_stride = e.parse("an integer")?,
            "max_iters" => c.max_iters = e.parse("an integer")?,
            "tol" => c.tol = e.float()?,
            "direction" => {
                c.direction = match value {
                    "min" => Direction::Min,
                    "max" => Direction::Max,
                    _ => return Err(ConfigError::TypeError { line, key: key.into(), expected: "min|max", value: value.into() }),
                }
            }
            "levels" => c.levels = e.parse("an integer")?,
            "samples" => c.samples = e.parse("an integer")?,
            "x0" => c.x0 = e.float()?,
            "y0" => c.y0 = e.float()?,
            "seeds" => c.seeds = e.parse("an integer")?,
            "step" => c.step = e.float()?,
            "max_steps" => c.max_steps = e.parse("an integer")?,
            "seed" => c.seed = e.parse("an integer")?,
            "out_dir" => c.out_dir = PathBuf::from(value),
            _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
        }
    }
    check_ranges(&c, &|k| lines.get(k).copied().unwrap_or(0))?;
    if c.grid == GridKind::Disk {
        c.r_inner = 0.0;
    }
    Ok(c)
}

fn check_ranges(c: &RunConfig, line_of: &dyn Fn(&str) -> usize) -> Result<(), ConfigError> {
    let fail = |key: &str, msg: &str| ConfigError::RangeError { line: line_of(key), key: key.into(), msg: msg.into() };
    if c.n_r < 4 {
        return Err(fail("n_r", "must be >= 4"));
    }
    if c.n_theta < 8 || c.n_theta % 2 != 0 {
        return Err(fail("n_theta", "must be even and >= 8"));
    }
    match c.grid {
        GridKind::Annulus if !(c.r_inner > 0.0) => return Err(fail("r_inner", "must be > 0 on an annulus")),
        GridKind::Disk if line_of("r_inner") > 0 && c.r_inner != 0.0 => {
            return Err(fail("r_inner", "must be 0 on a disk"))
        }
        _ => {}
    }
    if c.grid == GridKind::Annulus && !(c.r_outer > c.r_inner) {
        return Err(fail("r_outer", "must exceed r_inner"));
    }
    if !(c.r_outer > 0.0) {
        return Err(fail("r_outer", "must be > 0"));
    }
    if c.epsilon < 0.0 {
        return Err(fail("epsilon", "must be >= 0"));
    }
    if c.m == 0 {
        return Err(fail("m", "must be >= 1"));
    }
    if !(c.t_end > 0.0) {
        return Err(fail("t_end", "must be > 0"));
    }
    if !(c.t_max > 0.0) {
        return Err(fail("t_max", "must be > 0"));
    }
    if c.delta < 0.0 {
        return Err(fail("delta", "must be >= 0"));
    }
    if !(c.cfl > 0.0 && c.cfl < 1.0) {
        return Err(fail("cfl", "must lie in (0, 1)"));
    }
    if c.dt < 0.0 {
        return Err(fail("dt", "must be >= 0"));
    }
    if c.record_stride == 0 {
        return Err(fail("record_stride", "must be >= 1"));
    }
    if c.max_iters == 0 {
        return Err(fail("max_iters", "must be >= 1"));
    }
    if c.tol < 0.0 {
        return Err(fail("tol", "must be >= 0"));
    }
    if c.levels == 0 {
        return Err(fail("levels", "must be >= 1"));
    }
    if c.samples == 0 {
        return Err(fail("samples", "must be >= 1"));
    }
    if !(c.step > 0.0) {
        return Err(fail("step", "must be > 0"));
    }
    if c.max_steps == 0 {
        return Err(fail("max_steps", "must be >= 1"));
    }
    Ok(())
}

impl fmt::Display for RunConfig {
    /// The effective config, itself a valid config file.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let r_inner = if self.grid == GridKind::Disk { 0.0 } else { self.r_inner };
        writeln!(s, "subcommand = {}", self.subcommand.name())?;
        writeln!(s, "grid = {}", self.grid)?;
        writeln!(s, "r_inner = {r_inner:e}")?;
        writeln!(s, "r_outer = {:e}", self.r_outer)?;
        writeln!(s, "n_r = {}", self.n_r)?;
        writeln!(s, "n_theta = {}", self.n_theta)?;
        writeln!(s, "flow = {}", self.flow.name())?;
        writeln!(s, "center_x = {:e}", self.center_x)?;
        writeln!(s, "center_y = {:e}", self.center_y)?;
        if let Some(p) = &self.h_file {
            writeln!(s, "h_file = {}", p.display())?;
        }
        writeln!(s, "bc_inner = {:e}", self.bc_inner)?;
        writeln!(s, "bc_outer = {:e}", self.bc_outer)?;
        writeln!(s, "epsilon = {:e}", self.epsilon)?;
        writeln!(s, "m = {}", self.m)?;
        writeln!(s, "t_end = {:e}", self.t_end)?;
        writeln!(s, "t_max = {:e}", self.t_max)?;
        writeln!(s, "delta = {:e}", self.delta)?;
        writeln!(s, "cfl = {:e}", self.cfl)?;
        writeln!(s, "dt = {:e}", self.dt)?;
        writeln!(s, "record_stride = {}", self.record_stride)?;
        writeln!(s, "snapshot_stride = {}", self.snapshot_stride)?;
        writeln!(s, "max_iters = {}", self.max_iters)?;
        writeln!(s, "tol = {:e}", self.tol)?;
        writeln!(s, "direction = {}", if self.direction == Direction::Min { "min" } else { "max" })?;
        writeln!(s, "levels = {}", self.levels)?;
        writeln!(s, "samples = {}", self.samples)?;
        writeln!(s, "x0 = {:e}", self.x0)?;
        writeln!(s, "y0 = {:e}", self.y0)?;
        writeln!(s, "seeds = {}", self.seeds)?;
        writeln!(s, "step = {:e}", self.step)?;
        writeln!(s, "max_steps = {}", self.max_steps)?;
        writeln!(s, "seed = {}", self.seed)?;
        write!(s, "out_dir = {}", self.out_dir.display())?;
        f.write_str(&s)
    }
}
