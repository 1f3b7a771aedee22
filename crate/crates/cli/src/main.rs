use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mdiqkd::finitekey::{sample_counts, synthesize_counts};
use mdiqkd::protocol::Variant;
use mdiqkd::scan::{
    compute_from_counts, evaluate_point, metadata_lines, run_scan, write_counts, write_scan_csv, RunConfig, ScanAxis,
    SweepPlan,
};
use serde::Serialize;

/// Key rates for original and reference-frame-independent MDI-QKD.
#[derive(Parser)]
#[command(name = "mdiqkd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Write output here instead of the configured `output` or stdout.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, String> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path).map_err(|e| format!("{}: {e}", path.display()))?,
            None => RunConfig::default(),
        };
        cfg.apply_overrides(&self.overrides).map_err(|e| format!("--set: {e}"))?;
        if let Some(out) = &self.output {
            cfg.output = Some(out.display().to_string());
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Key rate at a single configured point.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Optimise intensities and probabilities first.
        #[arg(long)]
        optimize: bool,
        /// Also write the model's counts in counts-file format.
        #[arg(long, value_name = "PATH")]
        counts_out: Option<PathBuf>,
        /// Draw the written counts binomially (seeded) instead of using
        /// their expectations.
        #[arg(long, requires = "counts_out")]
        sampled: bool,
    },
    /// Sweep distance or misalignment and emit CSV.
    Scan {
        #[command(flatten)]
        common: Common,
        /// distance_per_arm, total_distance or beta.
        #[arg(long)]
        axis: String,
        #[arg(long)]
        start: f64,
        #[arg(long)]
        stop: f64,
        #[arg(long)]
        step: f64,
        /// Comma-separated: rfi, original.
        #[arg(long, default_value = "rfi")]
        variants: String,
        #[arg(long)]
        optimize: bool,
    },
    /// Optimise intensities and probabilities.
    Optimize {
        #[command(flatten)]
        common: Common,
    },
    /// Finite-size key rate from a counts file.
    Keyrate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        counts: PathBuf,
    },
}

fn open_output(cfg: &RunConfig) -> Result<Box<dyn Write>, String> {
    Ok(match cfg.output.as_deref() {
        Some(path) => {
            let f = File::create(path).map_err(|e| format!("{path}: {e}"))?;
            Box::new(BufWriter::new(f))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_json<T: Serialize>(cfg: &RunConfig, value: &T) -> Result<(), String> {
    let mut out = open_output(cfg)?;
    let write = |out: &mut dyn Write| -> io::Result<()> {
        for line in metadata_lines(cfg) {
            writeln!(out, "{line}")?;
        }
        serde_json::to_writer_pretty(&mut *out, value)?;
        writeln!(out)?;
        out.flush()
    };
    write(&mut *out).map_err(|e| e.to_string())
}

fn parse_variants(s: &str) -> Result<Vec<Variant>, String> {
    s.split(',').map(|v| Variant::parse(v.trim()).ok_or_else(|| format!("unknown variant `{}`", v.trim()))).collect()
}

fn write_counts_file(path: &Path, cfg: &RunConfig, sampled: bool) -> Result<(), String> {
    let protocol = cfg.protocol().map_err(|e| e.to_string())?;
    let n = cfg.finite.n_pairs;
    let counts = if sampled {
        sample_counts(&protocol, &cfg.channel, n, cfg.seed)
    } else {
        synthesize_counts(&protocol, &cfg.channel, n)
    }
    .map_err(|e| e.to_string())?;
    let file = File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut w = BufWriter::new(file);
    for line in metadata_lines(cfg) {
        writeln!(w, "{line}").map_err(|e| e.to_string())?;
    }
    write_counts(&mut w, &counts).map_err(|e| e.to_string())?;
    w.flush().map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Simulate { common, optimize, counts_out, sampled } => {
            let cfg = common.load()?;
            let point = evaluate_point(&cfg, optimize).map_err(|e| e.to_string())?;
            if let Some(path) = counts_out {
                let mut at_point = cfg.clone();
                let p = point.parameters;
                (at_point.mu_z, at_point.mu_x, at_point.nu_x) = (p.mu_z, p.mu_x, p.nu_x);
                (at_point.sampling.p_z, at_point.sampling.p_x, at_point.sampling.p_x_signal) =
                    (p.p_z, p.p_x, p.p_x_signal);
                if optimize && at_point.scheme == mdiqkd::scan::Scheme::Symmetric {
                    (at_point.mu, at_point.nu) = (p.mu_z, p.nu_x);
                }
                write_counts_file(&path, &at_point, sampled)?;
            }
            emit_json(&cfg, &point)
        }
        Command::Scan { common, axis, start, stop, step, variants, optimize } => {
            let cfg = common.load()?;
            let plan = SweepPlan {
                axis: ScanAxis::parse(&axis)
                    .ok_or_else(|| format!("unknown axis `{axis}` (distance_per_arm, total_distance, beta)"))?,
                start,
                stop,
                step,
                variants: parse_variants(&variants)?,
                optimize,
            };
            let rows = run_scan(&plan, &cfg).map_err(|e| e.to_string())?;
            let out = open_output(&cfg)?;
            write_scan_csv(out, &cfg, &rows).map_err(|e| e.to_string())
        }
        Command::Optimize { common } => {
            let cfg = common.load()?;
            let point = evaluate_point(&cfg, true).map_err(|e| e.to_string())?;
            emit_json(&cfg, &point)
        }
        Command::Keyrate { common, counts } => {
            let mut cfg = common.load()?;
            cfg.mode = mdiqkd::scan::ModeKind::Finite;
            let report = compute_from_counts(&counts, &cfg).map_err(|e| format!("{}: {e}", counts.display()))?;
            emit_json(&cfg, &report)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
