//! Simulation and analysis of noise-assisted single-electron pumping in a
//! four-junction turnstile.
//!
//! The crate covers the full pipeline:
//!
//! * [`circuit`] — capacitance network, operating point, switching
//!   thresholds, two-state reduction, and charge-stability scans.
//! * [`mc`] — stochastic tunneling dynamics of the full four-junction
//!   device under a sinusoidal gate drive and colored gate noise.
//! * [`noise`] — the Ornstein-Uhlenbeck gate-voltage noise process.
//! * [`spectral`] — Welch periodogram averaging and narrow-band SNR
//!   extraction at the drive frequency.
//! * [`theory`] — closed-form switching-rate models, their SNR curves, and
//!   a one-parameter least-squares fitter against simulated curves.
//! * [`sweep`] — seeded ensemble sweeps over noise variance with
//!   closed-form companion rows.
//! * [`config`] — flat key/value experiment files with full defaults.
//! * [`io`] — versioned CSV output and the fit report.

pub mod circuit;
pub mod config;
pub mod constants;
pub mod error;
pub mod io;
pub mod mc;
pub mod noise;
pub mod seed;
pub mod spectral;
pub mod sweep;
pub mod theory;

pub use circuit::{
    critical_noise, derive_params, stability_map, thresholds, BiasPoint, CircuitParams,
    DerivedParams, SignalParams, StabilityMap, Thresholds, TwoStateModel,
};
pub use config::{load_config, parse_config, ExperimentConfig, SnrAverage};
pub use error::{Error, Result};
pub use mc::{
    average_current, simulate, ChargeState, PsdSource, SimConfig, SimTrace, TurnstileSystem,
};
pub use noise::{NoiseParams, OuProcess};
pub use seed::derive_seed;
pub use spectral::{
    estimate_psd, snr_from_psd, PsdEstimate, SnrEstimate, SpectralConfig, WindowKind,
};
pub use sweep::{run_fit, run_sweep, theory_context, SweepResult, SweepRow};
pub use theory::{
    alpha_fokker_planck, alpha_tsironis, fit_parameter, FitOutcome, Provenance, SnrCurve,
    SnrPoint, TheoryBranch, TheoryContext,
};
