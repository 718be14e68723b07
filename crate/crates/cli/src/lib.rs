//! Command-line driver for Monte Carlo campaigns over the `dqc1m-core`
//! estimators.

pub mod campaign;
pub mod config;
pub mod output;

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::campaign::run_campaign;
use crate::config::{ExperimentConfig, Mode};
use crate::output::{render, scaling_svg, summary_pairs, write_all, SVG_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dqc1m", version, about = "One-clean-qubit parameter estimation campaigns")]
pub struct Cli {
    #[command(subcommand)]
    pub mode: ModeArg,
}

#[derive(Debug, Subcommand)]
pub enum ModeArg {
    /// Readout traces against their closed forms, with sampled noise.
    Trace(CommonArgs),
    /// Adaptive zoom-in on a continuous-time probe.
    EstimateContinuous(CommonArgs),
    /// Compensated zoom-in on a black box with integer powers.
    EstimateDiscrete(CommonArgs),
    /// Every coefficient of a Pauli-sum Hamiltonian via Trotterized decoupling.
    Multiparam(CommonArgs),
    /// Reference-frame alignment through probe exchanges.
    FrameAlign(CommonArgs),
    /// Ancilla signal separation against the marked-state oracle bound.
    SearchBound(CommonArgs),
}

impl ModeArg {
    pub fn split(&self) -> (Mode, &CommonArgs) {
        match self {
            ModeArg::Trace(a) => (Mode::Trace, a),
            ModeArg::EstimateContinuous(a) => (Mode::EstimateContinuous, a),
            ModeArg::EstimateDiscrete(a) => (Mode::EstimateDiscrete, a),
            ModeArg::Multiparam(a) => (Mode::Multiparam, a),
            ModeArg::FrameAlign(a) => (Mode::FrameAlign, a),
            ModeArg::SearchBound(a) => (Mode::SearchBound, a),
        }
    }
}

#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// TOML experiment file; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Worker threads; defaults to the available cores. Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory, overriding `output` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a log-log scaling plot.
    #[arg(long)]
    pub svg: bool,
}

/// Outcome of one invocation: exit status plus what to print.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Loads the config file and applies command-line overrides.
pub fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, String> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            ExperimentConfig::from_toml(&text).map_err(|r| r.to_string())?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(o) = &args.out {
        cfg.output = o.to_string_lossy().into_owned();
    }
    Ok(cfg)
}

/// Full pipeline behind the binary.
pub fn execute(cli: &Cli) -> Outcome {
    let (mode, args) = cli.mode.split();
    let mut out = Outcome { code: EXIT_OK, stdout: String::new(), stderr: String::new() };
    let cfg = match load_config(args) {
        Ok(c) => c,
        Err(e) => {
            out.code = EXIT_INVALID_CONFIG;
            let _ = writeln!(out.stderr, "error[config]: {e}");
            return out;
        }
    };
    let resolved = match cfg.validate(mode) {
        Ok(r) => r,
        Err(report) => {
            out.code = EXIT_INVALID_CONFIG;
            let _ = write!(out.stderr, "error[config]: {report}");
            return out;
        }
    };
    if args.threads == Some(0) {
        out.code = EXIT_INVALID_CONFIG;
        let _ = writeln!(out.stderr, "error[config]: --threads must be at least 1");
        return out;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(args.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            out.code = EXIT_RUNTIME;
            let _ = writeln!(out.stderr, "error[runtime]: thread pool: {e}");
            return out;
        }
    };
    let result = pool.install(|| run_campaign(&cfg, &resolved));
    let rendered = render(&cfg, &result);
    let dir = PathBuf::from(&cfg.output);
    if let Err(e) = write_all(&dir, &rendered) {
        out.code = EXIT_RUNTIME;
        let _ = writeln!(out.stderr, "error[io]: cannot write {}: {e}", dir.display());
        return out;
    }
    if args.svg {
        match scaling_svg(&result) {
            Some(svg) => {
                if let Err(e) = std::fs::write(dir.join(SVG_FILE), svg) {
                    let _ = writeln!(out.stderr, "warning: plot not written: {e}");
                }
            }
            None => {
                let _ = writeln!(out.stderr, "warning: nothing to plot for {mode}");
            }
        }
    }
    let _ = writeln!(out.stdout, "config_sha256 {}", result.summary.config_hash);
    for (k, v) in summary_pairs(&result.summary) {
        let _ = writeln!(out.stdout, "{k:<28} {v}");
    }
    let _ = writeln!(out.stdout, "outputs in {}", dir.display());
    let s = &result.summary;
    if s.rows > 0 && s.nonconverged_fraction > cfg.campaign.max_nonconverged_fraction {
        out.code = EXIT_NONCONVERGED;
        let _ = writeln!(
            out.stderr,
            "error[nonconverged]: {:.4} of runs did not converge (threshold {})",
            s.nonconverged_fraction, cfg.campaign.max_nonconverged_fraction
        );
    }
    out
}
