use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use latgauge_cli::config::parse_config_with;
use latgauge_cli::{rerun, run, Experiment};

/// Lattice Yang-Mills and slab sigma-model experiments.
///
/// `latgauge <experiment> --config FILE [--set k=v]... [--out DIR]`, or
/// `latgauge rerun --manifest FILE --out DIR`.
#[derive(Debug, Parser)]
#[command(name = "latgauge", version)]
struct Cli {
    /// One of the experiment names, or `rerun`.
    experiment: String,
    #[arg(long, required_unless_present = "manifest")]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set chain.sweeps=2000`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory; defaults to `output_dir` from the config, then `out/<experiment>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Manifest to re-execute (with `rerun`).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn init_threads() {
    if let Some(n) = std::env::var("LATGAUGE_THREADS").ok().and_then(|v| v.parse().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    if cli.experiment == "rerun" {
        let Some(manifest) = cli.manifest else {
            eprintln!("error: rerun needs --manifest");
            return ExitCode::from(1);
        };
        let out = cli.out.unwrap_or_else(|| PathBuf::from("out").join("rerun"));
        return do_rerun(&manifest, &out);
    }
    let experiment = match Experiment::from_str(&cli.experiment, true) {
        Ok(e) => e,
        Err(_) => {
            let names: Vec<_> = Experiment::ALL.iter().map(|e| e.to_string()).collect();
            eprintln!("error: unknown experiment `{}` (expected one of {}, rerun)", cli.experiment, names.join(", "));
            return ExitCode::from(1);
        }
    };
    let Some(config) = cli.config else {
        eprintln!("error: --config is required");
        return ExitCode::from(1);
    };
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return ExitCode::from(1);
        }
    };
    let parsed = match parse_config_with(&text, Some(experiment), &cli.sets) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            return ExitCode::from(1);
        }
    };
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    let out = cli
        .out
        .or_else(|| parsed.config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(experiment.to_string()));
    match run(&parsed.config, &parsed.warnings, &out) {
        Ok(o) => {
            for c in &o.checks {
                let tag = match (c.passed, c.gating) {
                    (true, _) => "PASS",
                    (false, true) => "FAIL",
                    (false, false) => "note",
                };
                println!("{tag} {}: {}", c.name, c.detail);
            }
            println!("wrote {}", o.out_dir.display());
            if o.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn do_rerun(manifest: &Path, out: &Path) -> ExitCode {
    match rerun(manifest, out) {
        Ok(r) => {
            if !r.version_matches {
                eprintln!("warning: manifest was written by a different version");
            }
            for (file, want, got) in &r.mismatches {
                println!("MISMATCH {file}: expected {want}, got {}", got.as_deref().unwrap_or("missing"));
            }
            if r.identical {
                println!("all outputs identical");
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
