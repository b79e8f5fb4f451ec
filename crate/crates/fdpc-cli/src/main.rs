//! Command-line front end for the fading dirty-paper simulator.
//!
//! Subcommands map one-to-one onto the library's experiment operations:
//! `sweep` emits rate-curve CSV, `scaling` and `delta-r` run the
//! high-power checks, `compare` pairs the two iterative solvers, and
//! `quantizer` prints quantizer tables. CSV goes to `--out` or standard
//! output; diagnostics and pass/fail lines go to standard error. The exit
//! code is 0 exactly when every enabled check passed.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, Write as _};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fdpc::channel::build_quantizer;
use fdpc::experiments::{
    compare_algorithms, delta_r_check, parse_experiment_into, rate_sweep, scaling_check, write_csv,
    AlgorithmKind, ExperimentError, ExperimentSpec, SweepOutput,
};

#[derive(Parser)]
#[command(
    name = "fdpc",
    version,
    about = "Dirty-paper precoding over fading channels: rate sweeps and consistency checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rate-versus-power sweep over CSIT models and algorithms (CSV).
    Sweep(SpecArgs),
    /// Fit the high-power slope of the first configured curve against
    /// min(t, r).
    Scaling {
        #[command(flatten)]
        spec: SpecArgs,
        /// Grid points in the fitted tail (which must span 20 dB).
        #[arg(long, default_value_t = 4)]
        tail_points: usize,
    },
    /// Track the no-interference bound gap under W = I along the grid.
    DeltaR(SpecArgs),
    /// Run both iterative solvers on shared draws and report rate gaps.
    Compare(SpecArgs),
    /// Print the cell table of a feedback quantizer.
    Quantizer {
        /// Feedback bits per fading component (1..=8).
        #[arg(long, default_value_t = 3)]
        bits: u32,
    },
}

/// Experiment definition: preset, then config file, then flags — each
/// layer overriding the one below. Flag values use the same syntax as
/// config-file values.
#[derive(Args)]
struct SpecArgs {
    /// Flat key = value experiment file layered over the preset.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Base preset: the 3x2 sweep or its square 3x3 variant.
    #[arg(long, default_value = "3x2", value_parser = ["3x2", "3x3"])]
    preset: String,
    /// Transmit antennas.
    #[arg(long)]
    t: Option<usize>,
    /// Receive antennas.
    #[arg(long)]
    r: Option<usize>,
    /// Power grid in dB: comma list or start:step:end.
    #[arg(long, value_name = "GRID")]
    p_grid_db: Option<String>,
    /// Interference-to-signal ratio Q/P.
    #[arg(long)]
    q_over_p: Option<f64>,
    /// Comma list of CSIT models: nocsit, b<bits>, perfect.
    #[arg(long)]
    csit: Option<String>,
    /// Comma list of algorithms: alg1, alg2, w_identity, w_zero, siso,
    /// brute.
    #[arg(long)]
    algorithms: Option<String>,
    /// Fading law: real or complex.
    #[arg(long)]
    fading: Option<String>,
    /// Master seed (overrides the config file and FDPC_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Outer Monte-Carlo realizations.
    #[arg(long)]
    n_outer: Option<usize>,
    /// Conditional draws per outer realization.
    #[arg(long)]
    n_inner: Option<usize>,
    /// Write CSV here instead of standard output.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

impl SpecArgs {
    /// Build the effective spec. Precedence, lowest to highest: preset,
    /// FDPC_SEED, config file, flags.
    fn resolve(&self) -> Result<ExperimentSpec, ExperimentError> {
        let mut base = if self.preset == "3x3" {
            ExperimentSpec::preset_3x3()
        } else {
            ExperimentSpec::preset_3x2()
        };
        if let Ok(value) = std::env::var("FDPC_SEED") {
            base.seed = value.parse().map_err(|_| {
                ExperimentError::BadSpec(format!("FDPC_SEED must be an integer, got `{value}`"))
            })?;
        }
        let spec = match &self.config {
            Some(path) => parse_experiment_into(base, &std::fs::read_to_string(path)?)?,
            None => base,
        };
        let mut overrides = String::new();
        let mut push = |key: &str, value: String| {
            let _ = writeln!(overrides, "{key} = {value}");
        };
        if let Some(v) = self.t {
            push("t", v.to_string());
        }
        if let Some(v) = self.r {
            push("r", v.to_string());
        }
        if let Some(v) = &self.p_grid_db {
            push("p_grid_db", v.clone());
        }
        if let Some(v) = self.q_over_p {
            push("q_over_p", v.to_string());
        }
        if let Some(v) = &self.csit {
            push("csit", v.clone());
        }
        if let Some(v) = &self.algorithms {
            push("algorithms", v.clone());
        }
        if let Some(v) = &self.fading {
            push("fading", v.clone());
        }
        if let Some(v) = self.seed {
            push("seed", v.to_string());
        }
        if let Some(v) = self.n_outer {
            push("n_outer", v.to_string());
        }
        if let Some(v) = self.n_inner {
            push("n_inner", v.to_string());
        }
        parse_experiment_into(spec, &overrides)
    }

    /// CSV destination: the --out flag wins over the config file's `out`.
    fn out_path(&self, spec: &ExperimentSpec) -> Option<PathBuf> {
        self.out
            .clone()
            .or_else(|| spec.out.as_ref().map(PathBuf::from))
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(pass) => {
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<bool, ExperimentError> {
    match cli.command {
        Command::Sweep(args) => {
            let spec = args.resolve()?;
            let output = rate_sweep(&spec)?;
            emit_csv(&output, args.out_path(&spec))?;
            report_failures(&output);
            Ok(output.failures.is_empty())
        }
        Command::Scaling {
            spec: args,
            tail_points,
        } => {
            let spec = args.resolve()?;
            let report = scaling_check(&spec, tail_points)?;
            let mut text = String::new();
            let _ = writeln!(text, "p_db,rate_bits");
            for p in &report.points {
                let _ = writeln!(text, "{},{:.6}", p.p_db, p.rate_bits);
            }
            write_text(&text, args.out_path(&spec))?;
            eprintln!(
                "scaling: slope {:.4}, target {} ({:.1}% off): {}",
                report.slope,
                report.target,
                100.0 * (report.slope - report.target).abs() / report.target,
                verdict(report.within)
            );
            Ok(report.within)
        }
        Command::DeltaR(args) => {
            let spec = args.resolve()?;
            let check = delta_r_check(&spec)?;
            let mut text = String::new();
            let _ = writeln!(text, "p_db,delta_r,std_err");
            for p in &check.points {
                let _ = writeln!(text, "{},{:.6},{:.6}", p.p_db, p.delta, p.std_err);
            }
            write_text(&text, args.out_path(&spec))?;
            eprintln!(
                "delta-r: nonincreasing {}, final {:.4} bits: {}",
                check.monotone,
                check.final_delta,
                verdict(check.pass)
            );
            Ok(check.pass)
        }
        Command::Compare(args) => {
            let mut spec = args.resolve()?;
            // The whole point of this subcommand is pairing the two
            // iterative solvers, so supply them unless the user asked for
            // a specific list.
            if args.algorithms.is_none() {
                spec.algorithms = vec![AlgorithmKind::CoordinateDescent, AlgorithmKind::FixedPoint];
            }
            let report = compare_algorithms(&spec)?;
            let mut text = String::new();
            let _ = writeln!(
                text,
                "p_db,csit,rate_alg1,rate_alg2,gap_bits,combined_se,flagged"
            );
            for g in &report.gaps {
                let _ = writeln!(
                    text,
                    "{},{},{:.6},{:.6},{:.6},{:.6},{}",
                    g.p_db,
                    g.csit.label(),
                    g.rate_descent,
                    g.rate_fixed_point,
                    g.gap_bits,
                    g.combined_se,
                    g.flagged
                );
            }
            write_text(&text, args.out_path(&spec))?;
            report_failures(&report.sweep);
            eprintln!(
                "compare: {} of {} points flagged beyond 2 combined std errors",
                report.flagged,
                report.gaps.len()
            );
            Ok(report.sweep.failures.is_empty())
        }
        Command::Quantizer { bits } => {
            let spec = build_quantizer(bits)?;
            print!("{}", spec.table());
            Ok(true)
        }
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn emit_csv(output: &SweepOutput, out: Option<PathBuf>) -> io::Result<()> {
    match out {
        Some(path) => write_csv(&mut File::create(path)?, &output.points),
        None => write_csv(&mut io::stdout().lock(), &output.points),
    }
}

fn write_text(text: &str, out: Option<PathBuf>) -> io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    }
}

fn report_failures(output: &SweepOutput) {
    for f in &output.failures {
        eprintln!(
            "cell failed: p_db={} csit={} algorithm={}: {}",
            f.p_db,
            f.csit.label(),
            f.algorithm.label(),
            f.message
        );
    }
}
