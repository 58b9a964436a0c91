//! Command-line driver: loads an experiment configuration, runs one stage of
//! the pipeline (single trace, PSD, noise sweep, closed-form curves, fit, or
//! stability map), and writes versioned CSV artifacts to the output
//! directory.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage or
//! configuration error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};

use turnstile_core::circuit::{
    critical_noise, stability_map, thresholds, BiasPoint, SignalParams, TwoStateModel,
};
use turnstile_core::config::{load_config, ExperimentConfig};
use turnstile_core::io;
use turnstile_core::mc::simulate;
use turnstile_core::spectral::estimate_psd;
use turnstile_core::sweep::{member_sim_config, run_fit, run_sweep, theory_context, SweepResult, SweepRow};
use turnstile_core::theory::{Provenance, SnrCurve, TheoryBranch};

#[derive(Parser)]
#[command(
    name = "turnstile",
    version,
    about = "Single-electron turnstile simulator: stochastic-resonance sweeps and analysis"
)]
struct Cli {
    /// Experiment configuration file (flat `key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override the root seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for artifacts (created if absent).
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    out: PathBuf,

    /// Override the number of ensemble members per grid point.
    #[arg(long, global = true, value_name = "N")]
    ensembles: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

/// Physics overrides shared by the simulation-facing subcommands.
#[derive(Args)]
struct PhysOverrides {
    /// Override the drive charge amplitude [aC].
    #[arg(long, value_name = "AC")]
    aq_ac: Option<f64>,

    /// Override the terminal bias voltage [mV].
    #[arg(long, value_name = "MV")]
    vb_mv: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one ensemble member and write trace.csv.
    Simulate {
        #[command(flatten)]
        phys: PhysOverrides,
        /// Noise variance for this run [V^2] (default: noiseless).
        #[arg(long, value_name = "V2")]
        d_v: Option<f64>,
    },
    /// Estimate the power spectral density of a stored trace (psd.csv).
    Psd {
        /// Input trace CSV, as written by `simulate`.
        #[arg(long, value_name = "PATH")]
        trace: PathBuf,
    },
    /// Run the noise-variance sweep with ensemble averaging (sweep.csv).
    Sweep {
        #[command(flatten)]
        phys: PhysOverrides,
        /// Restrict the sweep to a single noise variance [V^2].
        #[arg(long, value_name = "V2")]
        d_v: Option<f64>,
        /// Worker threads; `1` reproduces the parallel output serially.
        #[arg(long, value_name = "N")]
        jobs: Option<usize>,
    },
    /// Evaluate both closed-form branches on the noise grid (theory.csv).
    Theory {
        #[command(flatten)]
        phys: PhysOverrides,
        /// Evaluate at a single noise variance [V^2] instead of the grid.
        #[arg(long, value_name = "V2")]
        d_v: Option<f64>,
    },
    /// Fit a closed-form branch to a stored sweep (fit.txt + overlay.csv).
    Fit {
        /// Input sweep CSV, as written by `sweep`.
        #[arg(long, value_name = "PATH")]
        sweep: PathBuf,
        /// Which closed-form branch to fit.
        #[arg(long, value_enum)]
        branch: BranchArg,
        #[command(flatten)]
        phys: PhysOverrides,
    },
    /// Map locally stable island occupancies over the bias plane
    /// (stability.csv).
    Stability {
        /// Grid steps along the normalized gate axis.
        #[arg(long, default_value_t = 241, value_name = "N")]
        vg_steps: usize,
        /// Grid steps along the normalized bias axis.
        #[arg(long, default_value_t = 97, value_name = "N")]
        vb_steps: usize,
    },
}

#[derive(Copy, Clone, ValueEnum)]
enum BranchArg {
    /// Threshold-crossing rate branch (free parameter beta).
    Tsironis,
    /// Boundary-diffusion rate branch (free parameter lambda).
    FokkerPlanck,
}

impl From<BranchArg> for TheoryBranch {
    fn from(b: BranchArg) -> Self {
        match b {
            BranchArg::Tsironis => TheoryBranch::Tsironis,
            BranchArg::FokkerPlanck => TheoryBranch::FokkerPlanck,
        }
    }
}

/// A failure plus the process exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

fn usage<E: Into<anyhow::Error>>(err: E) -> Failure {
    Failure { code: 2, err: err.into() }
}

fn runtime<E: Into<anyhow::Error>>(err: E) -> Failure {
    Failure { code: 1, err: err.into() }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

/// Apply command-line overrides on top of the loaded configuration.
///
/// A bias override moves the operating point, so the thresholds and the
/// barrier margin are recomputed to match.
fn apply_overrides(
    cfg: &mut ExperimentConfig,
    cli: &Cli,
    phys: Option<&PhysOverrides>,
    d_v: Option<f64>,
) -> Result<(), Failure> {
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = cli.ensembles {
        if n == 0 {
            return Err(usage(anyhow!("--ensembles must be >= 1")));
        }
        cfg.ensembles = n;
    }
    if let Some(p) = phys {
        if let Some(vb_mv) = p.vb_mv {
            let vb = vb_mv * 1e-3;
            cfg.bias = BiasPoint::new(cfg.bias.vg_dc, vb, &cfg.derived);
            cfg.thresholds = thresholds(&cfg.circuit, &cfg.derived, vb);
            let model =
                TwoStateModel::new(cfg.beta, cfg.tau_t, cfg.thresholds).map_err(usage)?;
            let (_, mu) = critical_noise(0.0, &model, cfg.bias.vg_dc).map_err(usage)?;
            cfg.mu = mu;
        }
        if let Some(aq_ac) = p.aq_ac {
            cfg.signal =
                SignalParams::new(aq_ac * 1e-18, cfg.signal.fs, &cfg.circuit).map_err(usage)?;
        }
    }
    if let Some(v) = d_v {
        if !(v.is_finite() && v >= 0.0) {
            return Err(usage(anyhow!("--d-v must be finite and >= 0, got {v}")));
        }
        cfg.d_v_grid = vec![v];
    }
    Ok(())
}

/// Convert a closed-form curve into sweep rows.
fn curve_rows(curve: &SnrCurve) -> Vec<SweepRow> {
    curve
        .points
        .iter()
        .map(|p| SweepRow {
            aq: curve.aq,
            d_v: p.d_v,
            snr_db_mean: p.snr_db,
            snr_db_stderr: 0.0,
            provenance: curve.provenance,
            valid_points: 1,
        })
        .collect()
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| usage(anyhow!("--config <PATH> is required")))?;
    let mut cfg = load_config(config_path).map_err(usage)?;

    std::fs::create_dir_all(&cli.out)
        .map_err(|e| runtime(anyhow!("create output directory {}: {e}", cli.out.display())))?;

    match &cli.command {
        Command::Simulate { phys, d_v } => {
            apply_overrides(&mut cfg, cli, Some(phys), None)?;
            let variance = d_v.unwrap_or(0.0);
            if !(variance.is_finite() && variance >= 0.0) {
                return Err(usage(anyhow!("--d-v must be finite and >= 0, got {variance}")));
            }
            let sim_cfg = member_sim_config(&cfg, variance, 0, 0).map_err(usage)?;
            let t0 = Instant::now();
            let trace = simulate(&sim_cfg).map_err(runtime)?;
            let path = cli.out.join("trace.csv");
            io::write_trace_csv(&path, &trace).map_err(runtime)?;
            log::info!(
                "{} tunnel events, {} electrons pumped in {:.2} s",
                trace.events,
                trace.final_transferred,
                t0.elapsed().as_secs_f64()
            );
            println!(
                "wrote {} ({} samples, {} events)",
                path.display(),
                trace.island_voltage.len(),
                trace.events
            );
        }
        Command::Psd { trace } => {
            let t = io::read_trace_csv(trace).map_err(runtime)?;
            let implied = 1.0 / t.dt;
            if (implied - cfg.spectral.f_sample).abs() > 1e-6 * cfg.spectral.f_sample {
                return Err(usage(anyhow!(
                    "trace sample rate {:.3e} Hz does not match the configured {:.3e} Hz",
                    implied,
                    cfg.spectral.f_sample
                )));
            }
            let est = estimate_psd(&t.island_voltage, &cfg.spectral).map_err(runtime)?;
            let path = cli.out.join("psd.csv");
            io::write_psd_csv(&path, &est).map_err(runtime)?;
            println!(
                "wrote {} ({} bins from {} segments)",
                path.display(),
                est.psd.len(),
                est.segments
            );
        }
        Command::Sweep { phys, d_v, jobs } => {
            apply_overrides(&mut cfg, cli, Some(phys), *d_v)?;
            if *jobs == Some(0) {
                return Err(usage(anyhow!("--jobs must be >= 1")));
            }
            let t0 = Instant::now();
            let sweep = run_sweep(&cfg, *jobs).map_err(runtime)?;
            for note in &sweep.failures {
                eprintln!("warning: {note}");
            }
            let path = cli.out.join("sweep.csv");
            io::write_sweep_csv(&path, &sweep).map_err(runtime)?;
            println!(
                "wrote {} ({} rows, {} failures, {:.1} s)",
                path.display(),
                sweep.rows.len(),
                sweep.failures.len(),
                t0.elapsed().as_secs_f64()
            );
        }
        Command::Theory { phys, d_v } => {
            apply_overrides(&mut cfg, cli, Some(phys), *d_v)?;
            let ctx = theory_context(&cfg);
            let mut rows = Vec::new();
            for (branch, param) in [
                (TheoryBranch::Tsironis, cfg.beta),
                (TheoryBranch::FokkerPlanck, cfg.lambda),
            ] {
                let curve = ctx
                    .curve(branch, param, &cfg.d_v_grid, cfg.signal.aq)
                    .map_err(runtime)?;
                rows.extend(curve_rows(&curve));
            }
            let mut result = SweepResult { rows, failures: Vec::new() };
            result.sort_rows();
            let path = cli.out.join("theory.csv");
            io::write_sweep_csv(&path, &result).map_err(runtime)?;
            println!("wrote {} ({} rows)", path.display(), result.rows.len());
        }
        Command::Fit { sweep, branch, phys } => {
            apply_overrides(&mut cfg, cli, Some(phys), None)?;
            let loaded = io::read_sweep_csv(sweep).map_err(runtime)?;
            let branch = TheoryBranch::from(*branch);
            let (fit, overlay) = run_fit(&cfg, &loaded, branch).map_err(runtime)?;
            let report = cli.out.join("fit.txt");
            io::write_fit_report(&report, branch, &fit).map_err(runtime)?;
            let mut rows: Vec<SweepRow> = loaded
                .rows
                .iter()
                .filter(|r| r.provenance == Provenance::Simulation)
                .copied()
                .collect();
            rows.extend(curve_rows(&overlay));
            let mut result = SweepResult { rows, failures: Vec::new() };
            result.sort_rows();
            let overlay_path = cli.out.join("overlay.csv");
            io::write_sweep_csv(&overlay_path, &result).map_err(runtime)?;
            if fit.at_boundary {
                eprintln!("warning: fitted parameter sits on the search boundary");
            }
            println!(
                "wrote {} and {} (parameter {:.6e}, residual {:.4e} dB^2, {} excluded)",
                report.display(),
                overlay_path.display(),
                fit.parameter,
                fit.residual,
                fit.excluded_points
            );
        }
        Command::Stability { vg_steps, vb_steps } => {
            let map = stability_map(&cfg.circuit, (-0.5, 2.5), (-0.6, 0.6), (*vg_steps, *vb_steps))
                .map_err(usage)?;
            let path = cli.out.join("stability.csv");
            io::write_stability_csv(&path, &map).map_err(runtime)?;
            println!(
                "wrote {} ({} x {} grid)",
                path.display(),
                map.vg_norm.len(),
                map.vb_norm.len()
            );
        }
    }
    Ok(())
}
