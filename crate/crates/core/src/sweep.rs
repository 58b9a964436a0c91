//! Noise-variance sweeps: ensembles of simulations per grid point, SNR
//! aggregation, companion closed-form curves, and parameter fitting.
//!
//! Every (grid point, ensemble member) pair gets its own event and noise
//! seeds derived deterministically from the root seed, so results are
//! bit-identical across reruns and across worker-pool sizes; failures are
//! collected per point instead of aborting the sweep.

use rayon::prelude::*;

use crate::config::{ExperimentConfig, SnrAverage};
use crate::error::{Error, Result};
use crate::mc::{simulate, SimConfig};
use crate::noise::NoiseParams;
use crate::seed::derive_seed;
use crate::spectral::{estimate_psd, snr_from_psd};
use crate::theory::{
    fit_parameter, FitOutcome, Provenance, SnrCurve, SnrPoint, TheoryBranch, TheoryContext,
};

/// Seed-stream tag for tunnel-event selection.
const STREAM_EVENTS: u64 = 1;
/// Seed-stream tag for the gate-noise process.
const STREAM_NOISE: u64 = 2;

/// One aggregated sweep row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    /// Drive amplitude as gate charge [C].
    pub aq: f64,
    /// Noise variance [V^2].
    pub d_v: f64,
    /// Ensemble-averaged SNR [dB].
    pub snr_db_mean: f64,
    /// Standard error of the ensemble mean [dB].
    pub snr_db_stderr: f64,
    /// Curve origin.
    pub provenance: Provenance,
    /// Ensembles (simulation) or evaluations (theory) behind the row.
    pub valid_points: usize,
}

/// Aggregated sweep output plus per-point failure notes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    /// Rows sorted by (amplitude, variance, provenance).
    pub rows: Vec<SweepRow>,
    /// Human-readable notes for grid points or ensembles that failed.
    pub failures: Vec<String>,
}

fn provenance_rank(p: Provenance) -> u8 {
    match p {
        Provenance::Simulation => 0,
        Provenance::Tsironis => 1,
        Provenance::FokkerPlanck => 2,
    }
}

impl SweepResult {
    /// Restore the canonical (amplitude, variance, provenance) ordering.
    pub fn sort_rows(&mut self) {
        self.rows.sort_by(|a, b| {
            a.aq.total_cmp(&b.aq)
                .then(a.d_v.total_cmp(&b.d_v))
                .then(provenance_rank(a.provenance).cmp(&provenance_rank(b.provenance)))
        });
    }

    /// The simulation rows as a validated SNR curve.
    pub fn simulation_curve(&self) -> Result<SnrCurve> {
        let mut points: Vec<SnrPoint> = self
            .rows
            .iter()
            .filter(|r| r.provenance == Provenance::Simulation)
            .map(|r| SnrPoint { d_v: r.d_v, snr_db: r.snr_db_mean })
            .collect();
        points.sort_by(|a, b| a.d_v.total_cmp(&b.d_v));
        let aq = self
            .rows
            .iter()
            .find(|r| r.provenance == Provenance::Simulation)
            .map(|r| r.aq)
            .ok_or_else(|| Error::Fit("sweep contains no simulation rows".into()))?;
        SnrCurve::new(points, aq, Provenance::Simulation)
    }
}

/// Closed-form evaluation context matching the sweep's operating point and
/// spectral scale.
pub fn theory_context(cfg: &ExperimentConfig) -> TheoryContext {
    TheoryContext {
        thresholds: cfg.thresholds,
        vg_dc: cfg.bias.vg_dc,
        av: cfg.signal.av,
        fs: cfg.signal.fs,
        tau_n: cfg.tau_n,
        gain: cfg.spectral.processing_gain(),
        delta_hz: cfg.spectral.delta_hz(),
    }
}

/// The simulation setup of one ensemble member at one grid point.
pub fn member_sim_config(
    cfg: &ExperimentConfig,
    d_v: f64,
    point: usize,
    ensemble: usize,
) -> Result<SimConfig> {
    Ok(SimConfig {
        circuit: cfg.circuit,
        bias: cfg.bias,
        signal: cfg.signal,
        noise: NoiseParams::new(
            d_v,
            cfg.tau_n,
            derive_seed(cfg.seed, &[STREAM_NOISE, point as u64, ensemble as u64]),
        )?,
        dt: 1.0 / cfg.f_sample,
        duration: cfg.duration(),
        oversample: cfg.oversample,
        seed: derive_seed(cfg.seed, &[STREAM_EVENTS, point as u64, ensemble as u64]),
        psd_source: cfg.psd_source,
    })
}

fn member_snr(cfg: &ExperimentConfig, d_v: f64, point: usize, ensemble: usize) -> Result<f64> {
    let sim = member_sim_config(cfg, d_v, point, ensemble)?;
    let trace = simulate(&sim)?;
    let est = estimate_psd(&trace.island_voltage, &cfg.spectral)?;
    Ok(snr_from_psd(&est, cfg.signal.fs, &cfg.spectral)?.snr_db)
}

fn aggregate(values: &[f64], mode: SnrAverage) -> (f64, f64) {
    let n = values.len() as f64;
    match mode {
        SnrAverage::DecibelMean => {
            let mean = values.iter().sum::<f64>() / n;
            if values.len() < 2 {
                return (mean, 0.0);
            }
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            (mean, (var / n).sqrt())
        }
        SnrAverage::LinearMean => {
            let ratios: Vec<f64> = values.iter().map(|v| 10f64.powf(v / 10.0)).collect();
            let mean_r = ratios.iter().sum::<f64>() / n;
            let mean_db = 10.0 * mean_r.log10();
            if values.len() < 2 {
                return (mean_db, 0.0);
            }
            let var_r =
                ratios.iter().map(|r| (r - mean_r) * (r - mean_r)).sum::<f64>() / (n - 1.0);
            let stderr_db = 10.0 / std::f64::consts::LN_10 * (var_r / n).sqrt() / mean_r;
            (mean_db, stderr_db)
        }
    }
}

/// Run the full ensemble sweep and attach both closed-form curves at the
/// configured beta and lambda.
///
/// `jobs` caps worker threads (None uses the global default); the output is
/// identical for every cap, including 1.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: Option<usize>) -> Result<SweepResult> {
    let items: Vec<(usize, usize)> = (0..cfg.d_v_grid.len())
        .flat_map(|p| (0..cfg.ensembles).map(move |e| (p, e)))
        .collect();

    let work = || -> Vec<Result<f64>> {
        items
            .par_iter()
            .map(|&(p, e)| member_snr(cfg, cfg.d_v_grid[p], p, e))
            .collect()
    };
    let outcomes = match jobs {
        None => work(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(work),
    };

    let mut result = SweepResult::default();
    for (p, &d_v) in cfg.d_v_grid.iter().enumerate() {
        let mut values = Vec::with_capacity(cfg.ensembles);
        for e in 0..cfg.ensembles {
            match &outcomes[p * cfg.ensembles + e] {
                Ok(v) => values.push(*v),
                Err(err) => result
                    .failures
                    .push(format!("simulation d_v={d_v:.3e} ensemble {e}: {err}")),
            }
        }
        if values.is_empty() {
            result
                .failures
                .push(format!("simulation d_v={d_v:.3e}: no valid ensembles"));
            continue;
        }
        let (mean, stderr) = aggregate(&values, cfg.snr_average);
        result.rows.push(SweepRow {
            aq: cfg.signal.aq,
            d_v,
            snr_db_mean: mean,
            snr_db_stderr: stderr,
            provenance: Provenance::Simulation,
            valid_points: values.len(),
        });
    }

    let ctx = theory_context(cfg);
    for (branch, param) in [
        (TheoryBranch::Tsironis, cfg.beta),
        (TheoryBranch::FokkerPlanck, cfg.lambda),
    ] {
        for &d_v in &cfg.d_v_grid {
            match ctx.snr_db(branch, param, d_v) {
                Ok(snr) => result.rows.push(SweepRow {
                    aq: cfg.signal.aq,
                    d_v,
                    snr_db_mean: snr,
                    snr_db_stderr: 0.0,
                    provenance: branch.provenance(),
                    valid_points: 1,
                }),
                Err(err) => result.failures.push(format!(
                    "{} d_v={d_v:.3e}: {err}",
                    branch.provenance().as_str()
                )),
            }
        }
    }

    result.sort_rows();
    Ok(result)
}

/// Fit one branch parameter to the sweep's simulation rows and evaluate the
/// fitted overlay on the same grid.
pub fn run_fit(
    cfg: &ExperimentConfig,
    sweep: &SweepResult,
    branch: TheoryBranch,
) -> Result<(FitOutcome, SnrCurve)> {
    let sim = sweep.simulation_curve()?;
    let ctx = theory_context(cfg);
    let range = match branch {
        TheoryBranch::Tsironis => cfg.beta_range,
        TheoryBranch::FokkerPlanck => cfg.lambda_range,
    };
    let fit = fit_parameter(&sim, branch, &ctx, range)?;
    let grid: Vec<f64> = sim.points.iter().map(|p| p.d_v).collect();
    let overlay = ctx.curve(branch, fit.parameter, &grid, sim.aq)?;
    Ok((fit, overlay))
}
