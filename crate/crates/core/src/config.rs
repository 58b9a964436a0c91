//! Flat `key = value` experiment configuration.
//!
//! The format is deliberately minimal: one assignment per line, `#` starts
//! a comment (full-line or trailing), keys carry their SI scale in the
//! name (`C_aF`, `Vb_mV`, `tau_N_ps`, ...). Every key has a default equal
//! to the reference experiment, so an empty file is a complete,
//! runnable configuration; unknown and duplicated keys are hard errors so
//! typos cannot silently fall back to defaults.
//!
//! The drive amplitude can be given either absolutely (`Aq_aC`) or as a
//! fraction of the critical charge `mu * Cg` at which switching becomes
//! deterministic (`Aq_frac_crit`); the two are mutually exclusive.

use std::collections::BTreeMap;
use std::path::Path;

use crate::circuit::{
    critical_noise, derive_params, thresholds, BiasPoint, CircuitParams, DerivedParams,
    SignalParams, Thresholds, TwoStateModel,
};
use crate::error::{Error, Result};
use crate::mc::PsdSource;
use crate::spectral::{SpectralConfig, WindowKind};

/// Seed used when the config does not set one.
pub const DEFAULT_SEED: u64 = 0x74726e73;

/// How per-ensemble SNR values are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SnrAverage {
    /// Mean of the per-ensemble decibel values (default).
    #[default]
    DecibelMean,
    /// Mean of the linear power ratios, converted back to dB.
    LinearMean,
}

impl SnrAverage {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "db" => Ok(SnrAverage::DecibelMean),
            "linear" => Ok(SnrAverage::LinearMean),
            other => Err(Error::Config(format!(
                "snr_average must be 'db' or 'linear', got '{other}'"
            ))),
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Device parameters.
    pub circuit: CircuitParams,
    /// Derived operating-point quantities.
    pub derived: DerivedParams,
    /// DC operating point.
    pub bias: BiasPoint,
    /// Switching thresholds at the operating bias.
    pub thresholds: Thresholds,
    /// Periodic drive.
    pub signal: SignalParams,
    /// Barrier parameter mu at the configured beta [V].
    pub mu: f64,
    /// Two-state relaxation time [s].
    pub tau_t: f64,
    /// Noise correlation time [s].
    pub tau_n: f64,
    /// Noise-variance grid, strictly increasing [V^2].
    pub d_v_grid: Vec<f64>,
    /// Output sampling rate of the simulation [Hz].
    pub f_sample: f64,
    /// Welch estimator settings.
    pub spectral: SpectralConfig,
    /// Segments recorded (and averaged) per ensemble member.
    pub segments: usize,
    /// Independent simulations per grid point.
    pub ensembles: usize,
    /// Threshold-sharpness parameter for the threshold-crossing branch
    /// [1/V].
    pub beta: f64,
    /// Boundary-scale parameter for the boundary-diffusion branch.
    pub lambda: f64,
    /// Search range for fitting beta.
    pub beta_range: (f64, f64),
    /// Search range for fitting lambda.
    pub lambda_range: (f64, f64),
    /// Baseline substeps per output sample.
    pub oversample: u32,
    /// Root seed for all derived streams.
    pub seed: u64,
    /// Which per-sample signal feeds the PSD.
    pub psd_source: PsdSource,
    /// Ensemble averaging mode.
    pub snr_average: SnrAverage,
}

impl ExperimentConfig {
    /// Samples per drive period.
    pub fn samples_per_cycle(&self) -> usize {
        (self.f_sample / self.signal.fs).round() as usize
    }

    /// Recorded span of one ensemble member [s].
    pub fn duration(&self) -> f64 {
        self.segments as f64 * self.spectral.segment_len as f64 / self.f_sample
    }
}

/// Parse a configuration file from disk.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read config '{}': {e}", path.display())))?;
    parse_config(&text)
}

/// Parse configuration text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut raw = RawConfig::parse(text)?;

    let c = raw.f64_key("C_aF", 1.0)? * 1e-18;
    let cg = raw.f64_key("Cg_aF", 0.5)? * 1e-18;
    let rt = raw.f64_key("Rt_kohm", 100.0)? * 1e3;
    let temperature = raw.f64_key("T_mK", 30.0)? * 1e-3;
    let circuit = CircuitParams::new(c, cg, rt, temperature)?;
    let derived = derive_params(&circuit);

    let vg_dc = match raw.opt_f64_key("Vg_dc_V")? {
        Some(v) => v,
        None => derived.vg0,
    };
    let vb = raw.f64_key("Vb_mV", 50.0)? * 1e-3;
    let bias = BiasPoint::new(vg_dc, vb, &derived);
    let t = thresholds(&circuit, &derived, vb);

    let fs = raw.f64_key("fs_MHz", 100.0)? * 1e6;
    let tau_t = raw.f64_key("tau_t_ps", 30.0)? * 1e-12;
    let tau_n = raw.f64_key("tau_N_ps", 125.0)? * 1e-12;
    let beta = raw.f64_key("beta", 4900.0)?;
    let lambda = raw.f64_key("lambda", 1.63)?;

    let model = TwoStateModel::new(beta, tau_t, t)?;
    let (_, mu) = critical_noise(0.0, &model, vg_dc)?;

    let aq_frac = raw.opt_f64_key("Aq_frac_crit")?;
    let aq_ac = raw.opt_f64_key("Aq_aC")?;
    let aq = match (aq_frac, aq_ac) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "Aq_frac_crit and Aq_aC are mutually exclusive".into(),
            ))
        }
        (None, Some(a)) => a * 1e-18,
        (Some(f), None) => f * mu * cg,
        (None, None) => 0.5 * mu * cg,
    };
    let signal = SignalParams::new(aq, fs, &circuit)?;

    let d_min = raw.f64_key("D_V_min_V2", 1e-6)?;
    let d_max = raw.f64_key("D_V_max_V2", 1e-3)?;
    let d_points = raw.usize_key("D_V_points", 10)?;
    let d_v_grid = log_grid(d_min, d_max, d_points)?;

    let f_sample = raw.f64_key("f_sample_GHz", 2.0)? * 1e9;
    let ratio = f_sample / fs;
    if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 4.0 {
        return Err(Error::Config(format!(
            "f_sample must be an integer multiple (>= 4) of fs, got ratio {ratio}"
        )));
    }
    let samples_per_cycle = ratio.round() as usize;
    let segment_cycles = raw.usize_key("segment_cycles", 100)?;
    let segment_len = segment_cycles
        .checked_mul(samples_per_cycle)
        .ok_or_else(|| Error::Config("segment length overflows".into()))?;

    let pad_policy = raw.string_key("pad_policy", "pow2")?;
    let explicit_n_fft = raw.opt_usize_key("n_fft")?;
    let n_fft = match (pad_policy.as_str(), explicit_n_fft) {
        (_, Some(n)) => n,
        ("pow2", None) => segment_len.next_power_of_two(),
        ("none", None) => segment_len,
        (other, None) => {
            return Err(Error::Config(format!(
                "pad_policy must be 'pow2' or 'none', got '{other}'"
            )))
        }
    };

    let noise_bins = raw.usize_key("noise_bins", 10)?;
    let peak_halfwidth = raw.usize_key("peak_halfwidth_bins", 2)?;
    let spectral = SpectralConfig::with_bands(
        f_sample,
        segment_len,
        n_fft,
        WindowKind::Hann,
        peak_halfwidth,
        noise_bins,
    )?;
    // The drive bin must sit far enough inside the band for the background
    // estimate on both sides.
    let k0 = (fs / spectral.delta_hz()).round() as usize;
    let margin = peak_halfwidth + noise_bins + 1;
    if k0 < margin || k0 + margin >= n_fft / 2 + 1 {
        return Err(Error::Config(format!(
            "drive bin {k0} leaves no room for the background bands in {} bins",
            n_fft / 2 + 1
        )));
    }

    let segments = raw.usize_key("segments", 100)?;
    let ensembles = raw.usize_key("ensembles", 100)?;
    if segments == 0 || ensembles == 0 {
        return Err(Error::Config("segments and ensembles must be >= 1".into()));
    }

    let beta_range = (raw.f64_key("beta_min", 1000.0)?, raw.f64_key("beta_max", 10000.0)?);
    let lambda_range = (raw.f64_key("lambda_min", 0.5)?, raw.f64_key("lambda_max", 5.0)?);

    let oversample = raw.usize_key("oversample", 2)? as u32;
    if oversample == 0 {
        return Err(Error::Config("oversample must be >= 1".into()));
    }
    let seed = raw.u64_key("seed", DEFAULT_SEED)?;

    let psd_source = match raw.string_key("psd_source", "charge")?.as_str() {
        "charge" => PsdSource::ChargeVoltage,
        "full" => PsdSource::FullVoltage,
        "occupancy" => PsdSource::Occupancy,
        other => {
            return Err(Error::Config(format!(
                "psd_source must be 'charge', 'full' or 'occupancy', got '{other}'"
            )))
        }
    };
    let snr_average = SnrAverage::parse(&raw.string_key("snr_average", "db")?)?;

    raw.finish()?;

    if tau_n < 5.0 * tau_t {
        log::warn!(
            "noise correlation time {tau_n:e} s is below 5x the relaxation time {tau_t:e} s; \
             the colored-noise rate theory assumes slower noise"
        );
    }
    if 1.0 / fs < 20.0 * tau_t {
        log::warn!(
            "drive period {:e} s is below 20x the relaxation time {tau_t:e} s; \
             the adiabatic approximation weakens",
            1.0 / fs
        );
    }

    Ok(ExperimentConfig {
        circuit,
        derived,
        bias,
        thresholds: t,
        signal,
        mu,
        tau_t,
        tau_n,
        d_v_grid,
        f_sample,
        spectral,
        segments,
        ensembles,
        beta,
        lambda,
        beta_range,
        lambda_range,
        oversample,
        seed,
        psd_source,
        snr_average,
    })
}

fn log_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min.is_finite() && min > 0.0 && max.is_finite() && max >= min) {
        return Err(Error::Config(format!(
            "noise grid needs 0 < D_V_min <= D_V_max, got [{min:e}, {max:e}]"
        )));
    }
    if points == 0 {
        return Err(Error::Config("D_V_points must be >= 1".into()));
    }
    if points == 1 {
        return Ok(vec![min]);
    }
    if max == min {
        return Err(Error::Config(
            "D_V_min = D_V_max needs D_V_points = 1".into(),
        ));
    }
    let ln_min = min.ln();
    let step = (max.ln() - ln_min) / (points - 1) as f64;
    Ok((0..points).map(|i| (ln_min + step * i as f64).exp()).collect())
}

/// Tokenized key/value pairs with consumption tracking, so leftovers can be
/// reported as unknown keys.
struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = match line.find('#') {
                Some(pos) => &line[..pos],
                None => line,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() || value.is_empty() {
                return Err(Error::Config(format!(
                    "line {}: empty key or value",
                    lineno + 1
                )));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!(
                    "line {}: duplicate key '{key}'",
                    lineno + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn f64_key(&mut self, key: &str, default: f64) -> Result<f64> {
        self.opt_f64_key(key).map(|v| v.unwrap_or(default))
    }

    fn opt_f64_key(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("{key}: '{v}' is not a number")))
            })
            .transpose()
    }

    fn usize_key(&mut self, key: &str, default: usize) -> Result<usize> {
        self.opt_usize_key(key).map(|v| v.unwrap_or(default))
    }

    fn opt_usize_key(&mut self, key: &str) -> Result<Option<usize>> {
        self.take(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::Config(format!("{key}: '{v}' is not a whole number")))
            })
            .transpose()
    }

    fn u64_key(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.take(key) {
            None => Ok(default),
            Some(v) => {
                let parsed = if let Some(hex) = v.strip_prefix("0x") {
                    u64::from_str_radix(hex, 16)
                } else {
                    v.parse::<u64>()
                };
                parsed.map_err(|_| Error::Config(format!("{key}: '{v}' is not a u64")))
            }
        }
    }

    fn string_key(&mut self, key: &str, default: &str) -> Result<String> {
        Ok(self.take(key).unwrap_or_else(|| default.to_string()))
    }

    fn finish(self) -> Result<()> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let unknown: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        Err(Error::Config(format!(
            "unknown key(s): {}",
            unknown.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_reference_experiment() {
        let cfg = parse_config("").unwrap();
        assert!((cfg.circuit.c - 1e-18).abs() < 1e-33);
        assert!((cfg.circuit.cg - 0.5e-18).abs() < 1e-33);
        assert!((cfg.circuit.rt - 1e5).abs() < 1e-6);
        assert!((cfg.circuit.temperature - 0.030).abs() < 1e-12);
        assert!((cfg.bias.vg_dc - 0.1602176634).abs() < 1e-9);
        assert!((cfg.bias.vb - 0.050).abs() < 1e-15);
        assert!((cfg.signal.fs - 1e8).abs() < 1e-3);
        assert_eq!(cfg.samples_per_cycle(), 20);
        assert_eq!(cfg.spectral.segment_len, 2000);
        assert_eq!(cfg.spectral.n_fft, 2048);
        assert_eq!(cfg.spectral.noise_bins, 10);
        assert_eq!(cfg.spectral.peak_halfwidth, 2);
        assert_eq!(cfg.segments, 100);
        assert_eq!(cfg.ensembles, 100);
        assert_eq!(cfg.d_v_grid.len(), 10);
        assert!((cfg.d_v_grid[0] - 1e-6).abs() < 1e-18);
        assert!((cfg.d_v_grid[9] - 1e-3).abs() < 1e-15);
        assert!((cfg.beta - 4900.0).abs() < 1e-9);
        assert!((cfg.lambda - 1.63).abs() < 1e-12);
        assert!((cfg.tau_n - 125e-12).abs() < 1e-24);
        assert!((cfg.duration() - 1e-4).abs() < 1e-12);
        // Default drive: half the critical charge.
        assert!((cfg.signal.aq - 0.5 * cfg.mu * cfg.circuit.cg).abs() < 1e-30);
        assert_eq!(cfg.snr_average, SnrAverage::DecibelMean);
        assert_eq!(cfg.seed, DEFAULT_SEED);
    }

    #[test]
    fn comments_whitespace_and_overrides() {
        let text = "
            # device
            C_aF = 2.0   # inline comment
            Vb_mV= 40
            seed = 0xdead_is_not_hex
        ";
        assert!(parse_config(text).is_err());
        // Overrides that keep the operating point bistable: the larger
        // junction capacitance shrinks the gate span, so the bias and the
        // DC gate point shrink with it.
        let text = "
            C_aF = 2.0
            Vb_mV = 10
            seed = 0xdeadbeef
            Vg_dc_V = 0.06
            snr_average = linear
            psd_source = full
        ";
        let cfg = parse_config(text).unwrap();
        assert!((cfg.circuit.c - 2e-18).abs() < 1e-33);
        assert!((cfg.bias.vb - 0.010).abs() < 1e-15);
        assert_eq!(cfg.seed, 0xdeadbeef);
        assert!((cfg.bias.vg_dc - 0.06).abs() < 1e-15);
        assert_eq!(cfg.snr_average, SnrAverage::LinearMean);
        assert_eq!(cfg.psd_source, crate::mc::PsdSource::FullVoltage);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_rejected() {
        let err = parse_config("C_afF = 1.0").unwrap_err();
        assert!(err.to_string().contains("C_afF"), "{err}");
        let err = parse_config("C_aF = 1.0\nC_aF = 2.0").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
        assert!(parse_config("C_aF").is_err());
        assert!(parse_config("C_aF =").is_err());
        assert!(parse_config("C_aF = two").is_err());
    }

    #[test]
    fn amplitude_forms_are_exclusive() {
        assert!(parse_config("Aq_frac_crit = 0.5\nAq_aC = 0.01").is_err());
        let cfg = parse_config("Aq_aC = 0.0075").unwrap();
        assert!((cfg.signal.aq - 7.5e-21).abs() < 1e-33);
        let cfg = parse_config("Aq_frac_crit = 1.0").unwrap();
        assert!((cfg.signal.aq - cfg.mu * cfg.circuit.cg).abs() < 1e-30);
    }

    #[test]
    fn sampling_grid_and_padding_rules() {
        // Non-integer samples per cycle.
        assert!(parse_config("f_sample_GHz = 0.25\nfs_MHz = 99").is_err());
        // Ratio below 4.
        assert!(parse_config("f_sample_GHz = 0.2\nfs_MHz = 100").is_err());
        // Explicit transform length wins over the policy.
        let cfg = parse_config("n_fft = 4096").unwrap();
        assert_eq!(cfg.spectral.n_fft, 4096);
        // No padding keeps the segment length.
        let cfg = parse_config("pad_policy = none").unwrap();
        assert_eq!(cfg.spectral.n_fft, 2000);
        assert!(parse_config("pad_policy = maybe").is_err());
        // Too-short explicit transform is rejected.
        assert!(parse_config("n_fft = 1024").is_err());
        // Degenerate noise grid needs a single point.
        assert!(parse_config("D_V_min_V2 = 1e-5\nD_V_max_V2 = 1e-5").is_err());
        let cfg = parse_config("D_V_min_V2 = 1e-5\nD_V_max_V2 = 1e-5\nD_V_points = 1").unwrap();
        assert_eq!(cfg.d_v_grid, vec![1e-5]);
        // Drive bin margin: a tiny transform leaves no background room.
        assert!(parse_config("segment_cycles = 2\npad_policy = none").is_err());
    }

    #[test]
    fn grid_is_log_spaced_and_increasing() {
        let cfg = parse_config("D_V_points = 7").unwrap();
        assert_eq!(cfg.d_v_grid.len(), 7);
        for w in cfg.d_v_grid.windows(2) {
            assert!(w[1] > w[0]);
        }
        let r1 = cfg.d_v_grid[1] / cfg.d_v_grid[0];
        let r2 = cfg.d_v_grid[6] / cfg.d_v_grid[5];
        assert!((r1 - r2).abs() < 1e-9 * r1, "log spacing must be uniform");
    }
}
