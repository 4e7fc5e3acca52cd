use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

/// Runs one experiment described by a `key = value` config file.
#[derive(Parser)]
#[command(name = "eulerlab", version)]
struct Args {
    /// Config file.
    config: PathBuf,
    /// Overrides `out_dir` from the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("{}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    if let Some(d) = args.out_dir {
        // Drop any out_dir line and append the override.
        text = text
            .lines()
            .filter(|l| l.split('#').next().unwrap().split('=').next().unwrap().trim() != "out_dir")
            .collect::<Vec<_>>()
            .join("\n");
        text.push_str(&format!("\nout_dir = {}\n", d.display()));
    }
    ExitCode::from(eulerlab::cli::run_text(&text) as u8)
}
