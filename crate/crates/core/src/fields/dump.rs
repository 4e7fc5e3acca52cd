use std::io::{BufRead, Write};
use std::sync::Arc;

use super::{FieldError, Grid, GridKind, ScalarField};

/// Writes `n_r n_theta r_inner r_outer kind` followed by one line per row.
/// Numbers use 17 significant digits so parsing restores them bit for bit.
pub fn write_dump<W: Write>(f: &ScalarField, mut out: W) -> std::io::Result<()> {
    let g = f.grid();
    writeln!(out, "{} {} {:.16e} {:.16e} {}", g.n_r(), g.n_theta(), g.r_inner(), g.r_outer(), g.kind())?;
    let mut line = String::new();
    for i in 0..g.n_r() {
        line.clear();
        for (j, v) in f.row(i).iter().enumerate() {
            if j > 0 {
                line.push(' ');
            }
            line.push_str(&format!("{v:.16e}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn parse_err(line: usize, msg: impl Into<String>) -> FieldError {
    FieldError::Parse { line, msg: msg.into() }
}

pub fn read_dump<R: BufRead>(input: R) -> Result<ScalarField, FieldError> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty input"))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5 {
        return Err(parse_err(1, "header needs `n_r n_theta r_inner r_outer kind`"));
    }
    let n_r: usize = parts[0].parse().map_err(|_| parse_err(1, "bad n_r"))?;
    let n_theta: usize = parts[1].parse().map_err(|_| parse_err(1, "bad n_theta"))?;
    let r_inner: f64 = parts[2].parse().map_err(|_| parse_err(1, "bad r_inner"))?;
    let r_outer: f64 = parts[3].parse().map_err(|_| parse_err(1, "bad r_outer"))?;
    let kind: GridKind = parts[4].parse().map_err(|e: FieldError| parse_err(1, e.to_string()))?;
    let grid: Arc<Grid> = Grid::new(kind, r_inner, r_outer, n_r, n_theta)?;

    let mut values = Vec::with_capacity(grid.len());
    for i in 0..n_r {
        let lineno = i + 2;
        let line = lines.next().ok_or_else(|| parse_err(lineno, "missing row"))??;
        let before = values.len();
        for tok in line.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|_| parse_err(lineno, format!("bad number `{tok}`")))?);
        }
        if values.len() - before != n_theta {
            return Err(parse_err(lineno, format!("expected {n_theta} values, got {}", values.len() - before)));
        }
    }
    ScalarField::new(grid, values)
}
