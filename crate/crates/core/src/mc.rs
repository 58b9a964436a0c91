//! Kinetic Monte Carlo simulation of sequential single-electron tunneling.
//!
//! The three islands of the four-junction chain carry integer occupancies
//! `n = (n1, n2, n3)`. For a tunnel event the free-energy change is
//!
//! dF = E_ch(n') - E_ch(n) - W_src,
//!
//! where E_ch = (q + q_src)^T C^-1 (q + q_src) / 2 is the electrostatic
//! energy of the island charges `q = -e n` together with the source-induced
//! offset charges `q_src = (C V_L, Cg Vg, C V_R)`, and `W_src` is the work
//! done by a bias terminal when an electron passes directly through it
//! (polarization work is already absorbed into the E_ch difference). The
//! chain is biased symmetrically: V_L = +Vb, V_R = -Vb.
//!
//! Rates follow the golden-rule expression for a junction of resistance Rt:
//!
//! Gamma(dF) = (-dF) / (e^2 Rt (1 - exp(dF/kB T))),
//!
//! with the T -> 0 and dF -> 0 limits handled explicitly. Time evolution
//! uses a bounded-probability Bernoulli stepper: each substep fires at most
//! one event, and any substep whose total event probability would exceed
//! [`MAX_SUBSTEP_PROBABILITY`] is recursively halved (the noise process is
//! advanced with its exact discretization at whatever substep results).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{BiasPoint, CircuitParams, SignalParams};
use crate::constants::{BOLTZMANN, E_CHARGE};
use crate::error::{Error, Result};
use crate::noise::{NoiseParams, OuProcess};

/// Cap on the total event probability of a single substep. Keeping
/// Gamma_total * h below this bound keeps the single-event Bernoulli scheme
/// within O(p^2) of the exact jump process.
pub const MAX_SUBSTEP_PROBABILITY: f64 = 0.1;

/// Maximum number of recursive substep halvings before the stepper gives up
/// with [`Error::StepSize`]. 48 doublings shrink a nanosecond-scale substep
/// to ~1e-24 s, far below any physical tunnel time here.
const MAX_REFINEMENT_DEPTH: u32 = 48;

/// Island occupancies plus the running transfer counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChargeState {
    /// Excess electrons on islands 1..3 (left to right).
    pub n: [i32; 3],
    /// Cumulative electrons passed through the chain, counted at the left
    /// junction with electrons leaving toward the left (+Vb) terminal as
    /// positive. Changes by +-1 only on boundary-junction events.
    pub transferred: i64,
}

impl ChargeState {
    /// The empty chain.
    pub fn new() -> Self {
        Self::default()
    }

    /// A state with given island occupancies and a fresh transfer counter.
    pub fn with_occupancies(n: [i32; 3]) -> Self {
        Self { n, transferred: 0 }
    }

    /// Apply the single-electron move on `junction` (1..=4) in `direction`
    /// (+1 = electron moves toward the right terminal, -1 = toward the
    /// left), updating occupancies and the transfer counter.
    pub fn apply_move(&mut self, junction: u8, direction: i8) -> Result<()> {
        let idx = event_index(junction, direction)?;
        self.apply_event(idx);
        Ok(())
    }

    fn apply_event(&mut self, idx: usize) {
        let ev = &EVENTS[idx];
        for (n, d) in self.n.iter_mut().zip(ev.dn) {
            *n += d;
        }
        self.transferred += ev.transfer;
    }
}

/// Static description of one of the eight single-electron moves.
struct EventDef {
    /// Occupancy change (electrons added per island).
    dn: [i32; 3],
    /// Sign of the direct source-work term: dF gains `work_sign * e * Vb`.
    work_sign: f64,
    /// Contribution to the transfer counter.
    transfer: i64,
}

/// Events ordered as (junction 1..4) x (direction +1, -1); the index is
/// `(junction - 1) * 2 + (direction < 0)`.
static EVENTS: [EventDef; 8] = [
    // Junction 1 (left terminal <-> island 1)
    EventDef { dn: [1, 0, 0], work_sign: 1.0, transfer: -1 },
    EventDef { dn: [-1, 0, 0], work_sign: -1.0, transfer: 1 },
    // Junction 2 (island 1 <-> island 2)
    EventDef { dn: [-1, 1, 0], work_sign: 0.0, transfer: 0 },
    EventDef { dn: [1, -1, 0], work_sign: 0.0, transfer: 0 },
    // Junction 3 (island 2 <-> island 3)
    EventDef { dn: [0, -1, 1], work_sign: 0.0, transfer: 0 },
    EventDef { dn: [0, 1, -1], work_sign: 0.0, transfer: 0 },
    // Junction 4 (island 3 <-> right terminal)
    EventDef { dn: [0, 0, -1], work_sign: 1.0, transfer: 0 },
    EventDef { dn: [0, 0, 1], work_sign: -1.0, transfer: 0 },
];

fn event_index(junction: u8, direction: i8) -> Result<usize> {
    if !(1..=4).contains(&junction) {
        return Err(Error::InvalidParameter {
            name: "junction",
            reason: format!("junction must be 1..=4, got {junction}"),
        });
    }
    if direction != 1 && direction != -1 {
        return Err(Error::InvalidParameter {
            name: "direction",
            reason: format!("direction must be +1 or -1, got {direction}"),
        });
    }
    Ok((junction as usize - 1) * 2 + usize::from(direction < 0))
}

/// Invert a 3x3 matrix by the adjugate; `None` when the determinant is
/// negligible against the matrix scale.
fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let scale = m.iter().flatten().fold(0.0f64, |a, &v| a.max(v.abs()));
    if !(det.is_finite() && det.abs() > 1e-9 * scale * scale * scale) {
        return None;
    }
    let inv_det = 1.0 / det;
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            // Cofactor of the (j, i) entry (transposed for the inverse).
            let r = [(j + 1) % 3, (j + 2) % 3];
            let c = [(i + 1) % 3, (i + 2) % 3];
            let cof = m[r[0]][c[0]] * m[r[1]][c[1]] - m[r[0]][c[1]] * m[r[1]][c[0]];
            inv[i][j] = cof * inv_det;
        }
    }
    Some(inv)
}

/// The chain's electrostatics with the capacitance-matrix inverse and the
/// per-event quadratic forms precomputed once per run.
pub struct TurnstileSystem {
    p: CircuitParams,
    /// Inverse capacitance matrix [1/F].
    u: [[f64; 3]; 3],
    /// Charge-change vector of each event: dq = -e * dn [C].
    dq: [[f64; 3]; 8],
    /// Per-event self energy dq^T u dq / 2 [J].
    self_energy: [f64; 8],
    /// Thermal energy kB T [J].
    kbt: f64,
    /// Rate denominator e^2 Rt [J s].
    e2rt: f64,
}

impl TurnstileSystem {
    /// Number of distinct single-electron moves.
    pub const EVENT_COUNT: usize = 8;

    /// Build the cached electrostatics for a device.
    pub fn new(p: &CircuitParams) -> Result<Self> {
        let c = p.c;
        let cmat = [
            [2.0 * c, -c, 0.0],
            [-c, 2.0 * c + p.cg, -c],
            [0.0, -c, 2.0 * c],
        ];
        let u = invert3(&cmat).ok_or(Error::SingularMatrix)?;
        let mut dq = [[0.0; 3]; 8];
        let mut self_energy = [0.0; 8];
        for (i, ev) in EVENTS.iter().enumerate() {
            for j in 0..3 {
                dq[i][j] = -E_CHARGE * ev.dn[j] as f64;
            }
            let mut acc = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    acc += dq[i][a] * u[a][b] * dq[i][b];
                }
            }
            self_energy[i] = 0.5 * acc;
        }
        Ok(Self {
            p: *p,
            u,
            dq,
            self_energy,
            kbt: BOLTZMANN * p.temperature,
            e2rt: E_CHARGE * E_CHARGE * p.rt,
        })
    }

    /// Island potentials phi = u (q + q_src) at occupancies `n`, gate
    /// voltage `vg`, and bias `vb` (terminals at +vb / -vb) [V].
    fn potentials(&self, n: &[i32; 3], vg: f64, vb: f64) -> [f64; 3] {
        let q = [
            -E_CHARGE * n[0] as f64 + self.p.c * vb,
            -E_CHARGE * n[1] as f64 + self.p.cg * vg,
            -E_CHARGE * n[2] as f64 - self.p.c * vb,
        ];
        let mut phi = [0.0; 3];
        for i in 0..3 {
            phi[i] = self.u[i][0] * q[0] + self.u[i][1] * q[1] + self.u[i][2] * q[2];
        }
        phi
    }

    /// Free-energy change of event `idx` from state `s` [J].
    pub fn delta_f_event(&self, s: &ChargeState, idx: usize, vg: f64, vb: f64) -> f64 {
        let phi = self.potentials(&s.n, vg, vb);
        self.delta_f_with_potentials(&phi, idx, vb)
    }

    fn delta_f_with_potentials(&self, phi: &[f64; 3], idx: usize, vb: f64) -> f64 {
        let dq = &self.dq[idx];
        self.self_energy[idx]
            + phi[0] * dq[0]
            + phi[1] * dq[1]
            + phi[2] * dq[2]
            + EVENTS[idx].work_sign * E_CHARGE * vb
    }

    /// Golden-rule rates of all eight events at the given instant [1/s].
    pub fn event_rates(&self, s: &ChargeState, vg: f64, vb: f64) -> [f64; 8] {
        let phi = self.potentials(&s.n, vg, vb);
        let mut rates = [0.0; 8];
        for (idx, r) in rates.iter_mut().enumerate() {
            *r = rate_from_delta_f(self.delta_f_with_potentials(&phi, idx, vb), self.kbt, self.e2rt);
        }
        rates
    }

    /// Full central-island potential phi_2 including source-induced offsets
    /// [V].
    pub fn island_potential(&self, s: &ChargeState, vg: f64, vb: f64) -> f64 {
        self.potentials(&s.n, vg, vb)[1]
    }

    /// Charge-induced part of the central-island potential, -e (u n)_2 [V]:
    /// the tunneling signal seen by a charge detector, with the direct
    /// capacitive feedthrough of the applied gate and bias removed.
    pub fn charge_island_voltage(&self, n: &[i32; 3]) -> f64 {
        -E_CHARGE
            * (self.u[1][0] * n[0] as f64
                + self.u[1][1] * n[1] as f64
                + self.u[1][2] * n[2] as f64)
    }
}

/// Stable evaluation of w / (exp(w) - 1).
fn bose_factor(w: f64) -> f64 {
    if w.abs() < 1e-8 {
        // Series: w/(e^w - 1) = 1 - w/2 + w^2/12 - ...; truncation < 1e-17.
        1.0 - 0.5 * w
    } else {
        let d = w.exp_m1();
        if d.is_infinite() {
            // Far-positive tail: w e^-w, underflowing cleanly to zero.
            w * (-w).exp()
        } else {
            w / d
        }
    }
}

fn rate_from_delta_f(delta_f: f64, kbt: f64, e2rt: f64) -> f64 {
    if kbt == 0.0 {
        return if delta_f < 0.0 { -delta_f / e2rt } else { 0.0 };
    }
    (kbt / e2rt) * bose_factor(delta_f / kbt)
}

/// Golden-rule tunnel rate for a free-energy change `delta_f` [J] across one
/// junction of the device:
///
/// Gamma = (-dF)/(e^2 Rt (1 - exp(dF/kB T))),
///
/// evaluated in the numerically stable form (kB T/e^2 Rt) w/(e^w - 1) with
/// w = dF/kB T. Satisfies detailed balance
/// Gamma(dF)/Gamma(-dF) = exp(-dF/kB T) identically, approaches
/// kB T/(e^2 Rt) as dF -> 0, and reduces at T = 0 to -dF/(e^2 Rt) for
/// downhill moves and 0 otherwise.
pub fn tunnel_rate(delta_f: f64, p: &CircuitParams) -> f64 {
    rate_from_delta_f(delta_f, BOLTZMANN * p.temperature, E_CHARGE * E_CHARGE * p.rt)
}

/// Free-energy change [J] for a single electron tunneling across `junction`
/// (1..=4, numbered from the left terminal) in `direction` (+1 = toward the
/// right terminal, -1 = toward the left) from state `s`, at gate voltage
/// `vg` and bias `vb`.
pub fn free_energy_delta(
    s: &ChargeState,
    junction: u8,
    direction: i8,
    vg: f64,
    vb: f64,
    p: &CircuitParams,
) -> Result<f64> {
    let idx = event_index(junction, direction)?;
    let sys = TurnstileSystem::new(p)?;
    Ok(sys.delta_f_event(s, idx, vg, vb))
}

/// Full central-island potential [V] from the capacitance-matrix solve,
/// including the source-induced offsets. Zero charges with grounded sources
/// give exactly 0 V; adding one electron to the central island shifts the
/// potential by -e/C_sigma with C_sigma the effective self-capacitance
/// 1/u_22.
pub fn island_voltage(s: &ChargeState, vg: f64, vb: f64, p: &CircuitParams) -> Result<f64> {
    let sys = TurnstileSystem::new(p)?;
    Ok(sys.island_potential(s, vg, vb))
}

/// Which per-sample signal the simulation records for spectral analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PsdSource {
    /// Charge-induced central-island voltage (default): the tunneling
    /// signal only, with the direct capacitive feedthrough of drive and
    /// noise removed.
    #[default]
    ChargeVoltage,
    /// Full central-island potential including source feedthrough.
    FullVoltage,
    /// Raw central-island occupancy cast to f64.
    Occupancy,
}

/// Complete description of one stochastic run.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    /// Device parameters.
    pub circuit: CircuitParams,
    /// Operating point (terminals at +-vb, DC gate at vg_dc).
    pub bias: BiasPoint,
    /// Periodic gate drive.
    pub signal: SignalParams,
    /// Colored gate noise.
    pub noise: NoiseParams,
    /// Output sample spacing [s].
    pub dt: f64,
    /// Recorded span [s]; must be an integer number of samples.
    pub duration: f64,
    /// Baseline substeps per output sample (adaptively refined further).
    pub oversample: u32,
    /// Seed of the event-selection stream.
    pub seed: u64,
    /// Signal recorded per sample.
    pub psd_source: PsdSource,
}

impl SimConfig {
    /// Number of output samples; errors unless `duration` is an integer
    /// multiple of `dt` (to 1e-9 relative).
    pub fn n_samples(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("sample spacing must be > 0, got {:e}", self.dt),
            });
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidParameter {
                name: "duration",
                reason: format!("duration must be > 0, got {:e}", self.duration),
            });
        }
        let samples = self.duration / self.dt;
        let rounded = samples.round();
        if (samples - rounded).abs() > 1e-9 * samples.max(1.0) {
            return Err(Error::InvalidParameter {
                name: "duration",
                reason: format!(
                    "duration must be an integer number of samples, got {samples} x dt"
                ),
            });
        }
        Ok(rounded as usize)
    }

    fn validate(&self) -> Result<usize> {
        if self.oversample == 0 {
            return Err(Error::InvalidParameter {
                name: "oversample",
                reason: "baseline substep count must be >= 1".into(),
            });
        }
        self.n_samples()
    }
}

/// Sampled output of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    /// Sample spacing [s].
    pub dt: f64,
    /// Recorded span [s].
    pub duration: f64,
    /// Per-sample signal selected by [`SimConfig::psd_source`] (default:
    /// charge-induced central-island voltage) [V].
    pub island_voltage: Vec<f64>,
    /// Central-island occupancy per sample.
    pub n_trace: Vec<i32>,
    /// Cumulative transfer counter per sample.
    pub transferred: Vec<i64>,
    /// Transfer counter after the full recorded span.
    pub final_transferred: i64,
    /// Total tunnel events during the recorded span.
    pub events: u64,
}

/// Mean charge current over the recorded span [A]:
/// e * (final transfer count - initial) / duration.
pub fn average_current(trace: &SimTrace) -> f64 {
    let start = trace.transferred.first().copied().unwrap_or(0);
    E_CHARGE * (trace.final_transferred - start) as f64 / trace.duration
}

struct Runner<'a> {
    sys: &'a TurnstileSystem,
    cfg: &'a SimConfig,
    state: ChargeState,
    ou: OuProcess,
    ev_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    /// Current simulation time [s]; negative during warm-up.
    t: f64,
    events: u64,
    omega: f64,
}

impl Runner<'_> {
    fn gate_voltage(&self) -> f64 {
        self.cfg.bias.vg_dc + self.cfg.signal.av * (self.omega * self.t).sin() + self.ou.value()
    }

    /// Advance by `h`, firing at most one event; recursively halves the
    /// substep while the total event probability exceeds the cap.
    fn advance(&mut self, h: f64, depth: u32) -> Result<()> {
        let vg = self.gate_voltage();
        let rates = self.sys.event_rates(&self.state, vg, self.cfg.bias.vb);
        let total: f64 = rates.iter().sum();
        let p = total * h;
        if p > MAX_SUBSTEP_PROBABILITY {
            if depth >= MAX_REFINEMENT_DEPTH {
                return Err(Error::StepSize { rate: total, substep: h });
            }
            let half = 0.5 * h;
            self.advance(half, depth + 1)?;
            self.advance(half, depth + 1)?;
            return Ok(());
        }
        if total > 0.0 {
            let u: f64 = self.ev_rng.random();
            if u < p {
                // Reuse the accept draw for event selection: u/h is uniform
                // on [0, total) given u < p.
                let mut target = u / h;
                let mut idx = 0usize;
                while idx < EVENTS.len() - 1 {
                    if target < rates[idx] {
                        break;
                    }
                    target -= rates[idx];
                    idx += 1;
                }
                self.state.apply_event(idx);
                self.events += 1;
            }
        }
        self.ou.step(h, &mut self.noise_rng);
        self.t += h;
        Ok(())
    }

    fn record(&self) -> f64 {
        match self.cfg.psd_source {
            PsdSource::ChargeVoltage => self.sys.charge_island_voltage(&self.state.n),
            PsdSource::FullVoltage => {
                self.sys.island_potential(&self.state, self.gate_voltage(), self.cfg.bias.vb)
            }
            PsdSource::Occupancy => self.state.n[1] as f64,
        }
    }
}

/// Run one stochastic realization.
///
/// The chain starts empty at `t = -T_warm` with the noise process in its
/// stationary law; one full drive period (rounded up to whole samples) is
/// simulated and discarded before recording starts at `t = 0`. Outputs are
/// sampled every `dt`, with `oversample` baseline substeps per sample and
/// local recursive halving wherever rates spike. Identical `(seed, config)`
/// produce identical traces.
pub fn simulate(cfg: &SimConfig) -> Result<SimTrace> {
    let n_samples = cfg.validate()?;
    let sys = TurnstileSystem::new(&cfg.circuit)?;

    let mut ev_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    ev_rng.set_stream(0);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.noise.seed);
    noise_rng.set_stream(1);
    let ou = OuProcess::stationary(cfg.noise, &mut noise_rng);

    let warm_samples = (1.0 / (cfg.signal.fs * cfg.dt)).ceil() as usize;
    let mut run = Runner {
        sys: &sys,
        cfg,
        state: ChargeState::new(),
        ou,
        ev_rng,
        noise_rng,
        t: -(warm_samples as f64) * cfg.dt,
        events: 0,
        omega: 2.0 * std::f64::consts::PI * cfg.signal.fs,
    };

    let sub_h = cfg.dt / cfg.oversample as f64;
    for k in 0..warm_samples {
        for _ in 0..cfg.oversample {
            run.advance(sub_h, 0)?;
        }
        // Pin the clock to the sample grid so phase never drifts.
        run.t = -((warm_samples - k - 1) as f64) * cfg.dt;
    }
    run.state.transferred = 0;
    run.events = 0;

    let mut island_voltage = Vec::with_capacity(n_samples);
    let mut n_trace = Vec::with_capacity(n_samples);
    let mut transferred = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        island_voltage.push(run.record());
        n_trace.push(run.state.n[1]);
        transferred.push(run.state.transferred);
        for _ in 0..cfg.oversample {
            run.advance(sub_h, 0)?;
        }
        run.t = (k + 1) as f64 * cfg.dt;
    }

    Ok(SimTrace {
        dt: cfg.dt,
        duration: cfg.duration,
        island_voltage,
        n_trace,
        transferred,
        final_transferred: run.state.transferred,
        events: run.events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{derive_params, thresholds, TwoStateModel};
    use rand::Rng;

    fn reference_params() -> CircuitParams {
        CircuitParams::new(1.0e-18, 0.5e-18, 1.0e5, 0.030).unwrap()
    }

    fn assert_close(actual: f64, expected: f64, rel: f64, what: &str) {
        let scale = expected.abs().max(f64::MIN_POSITIVE);
        assert!(
            (actual - expected).abs() <= rel * scale,
            "{what}: got {actual:e}, want {expected:e} (rel tol {rel:e})"
        );
    }

    /// Independent free-energy oracle: Cramer-rule potential solve, explicit
    /// five-capacitor energy sum, and full source work including the
    /// polarization contributions that the production formula absorbs
    /// algebraically.
    mod oracle {
        use super::*;

        fn solve_potentials(p: &CircuitParams, n: [i32; 3], vg: f64, vb: f64) -> [f64; 3] {
            let c = p.c;
            let m = [
                [2.0 * c, -c, 0.0],
                [-c, 2.0 * c + p.cg, -c],
                [0.0, -c, 2.0 * c],
            ];
            let rhs = [
                -E_CHARGE * n[0] as f64 + c * vb,
                -E_CHARGE * n[1] as f64 + p.cg * vg,
                -E_CHARGE * n[2] as f64 - c * vb,
            ];
            let det3 = |a: &[[f64; 3]; 3]| {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            };
            let d = det3(&m);
            let mut phi = [0.0; 3];
            for (col, out) in phi.iter_mut().enumerate() {
                let mut mm = m;
                for row in 0..3 {
                    mm[row][col] = rhs[row];
                }
                *out = det3(&mm) / d;
            }
            phi
        }

        fn capacitor_energy(p: &CircuitParams, phi: &[f64; 3], vg: f64, vb: f64) -> f64 {
            let (vl, vr) = (vb, -vb);
            0.5 * p.c * (vl - phi[0]).powi(2)
                + 0.5 * p.c * (phi[0] - phi[1]).powi(2)
                + 0.5 * p.c * (phi[1] - phi[2]).powi(2)
                + 0.5 * p.c * (phi[2] - vr).powi(2)
                + 0.5 * p.cg * (vg - phi[1]).powi(2)
        }

        /// Charge q_tun transported from each terminal's lead into the chain
        /// by the event (lead -> island counts the electron's -e).
        fn direct_charges(junction: u8, direction: i8) -> (f64, f64) {
            match (junction, direction) {
                (1, 1) => (-E_CHARGE, 0.0),
                (1, -1) => (E_CHARGE, 0.0),
                (4, 1) => (0.0, E_CHARGE),
                (4, -1) => (0.0, -E_CHARGE),
                _ => (0.0, 0.0),
            }
        }

        pub fn delta_f(
            p: &CircuitParams,
            n: [i32; 3],
            junction: u8,
            direction: i8,
            vg: f64,
            vb: f64,
        ) -> f64 {
            let mut after = ChargeState::with_occupancies(n);
            after.apply_move(junction, direction).unwrap();
            let (vl, vr) = (vb, -vb);
            let phi0 = solve_potentials(p, n, vg, vb);
            let phi1 = solve_potentials(p, after.n, vg, vb);
            let e0 = capacitor_energy(p, &phi0, vg, vb);
            let e1 = capacitor_energy(p, &phi1, vg, vb);
            let (q_l, q_r) = direct_charges(junction, direction);
            let w = vl * (-p.c * (phi1[0] - phi0[0]) + q_l)
                + vg * (-p.cg * (phi1[1] - phi0[1]))
                + vr * (-p.c * (phi1[2] - phi0[2]) + q_r);
            (e1 - e0) - w
        }
    }

    #[test]
    fn delta_f_matches_brute_force_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0010);
        for _ in 0..500 {
            let p = CircuitParams::new(
                10f64.powf(rng.random_range(-18.5..-17.5)),
                10f64.powf(rng.random_range(-19.0..-18.0)),
                1.0e5,
                0.030,
            )
            .unwrap();
            let n = [
                rng.random_range(-3..=3),
                rng.random_range(-3..=3),
                rng.random_range(-3..=3),
            ];
            let vg = rng.random_range(-0.3..0.3);
            let vb = rng.random_range(-0.2..0.2);
            let junction = rng.random_range(1u8..=4);
            let direction = if rng.random::<bool>() { 1i8 } else { -1 };
            let s = ChargeState::with_occupancies(n);
            let got = free_energy_delta(&s, junction, direction, vg, vb, &p).unwrap();
            let want = oracle::delta_f(&p, n, junction, direction, vg, vb);
            assert_close(got, want, 1e-10, "delta_f vs oracle");
        }
    }

    #[test]
    fn reverse_event_negates_delta_f() {
        let p = reference_params();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0011);
        for _ in 0..200 {
            let n = [
                rng.random_range(-2..=2),
                rng.random_range(-2..=2),
                rng.random_range(-2..=2),
            ];
            let vg = rng.random_range(0.0..0.3);
            let vb = rng.random_range(-0.1..0.1);
            let junction = rng.random_range(1u8..=4);
            let direction = if rng.random::<bool>() { 1i8 } else { -1 };
            let mut s = ChargeState::with_occupancies(n);
            let fwd = free_energy_delta(&s, junction, direction, vg, vb, &p).unwrap();
            s.apply_move(junction, direction).unwrap();
            let rev = free_energy_delta(&s, junction, -direction, vg, vb, &p).unwrap();
            assert_close(rev, -fwd, 1e-12, "reverse delta_f");
        }
    }

    #[test]
    fn both_occupancies_blockaded_at_reference_bias() {
        let p = reference_params();
        let d = derive_params(&p);
        let sys = TurnstileSystem::new(&p).unwrap();
        for n2 in [0, 1] {
            let s = ChargeState::with_occupancies([0, n2, 0]);
            for idx in 0..TurnstileSystem::EVENT_COUNT {
                let df = sys.delta_f_event(&s, idx, d.vg0, 0.050);
                assert!(
                    df > 0.0,
                    "event {idx} from n2={n2} not uphill: dF = {df:e} J"
                );
            }
        }
    }

    #[test]
    fn entry_and_exit_events_soften_exactly_at_thresholds() {
        // The first event of the electron-entry cascade (right terminal ->
        // island 3) crosses dF = 0 at Vg = Vt0, and the first event of the
        // exit cascade from occupancy 1 (island 2 -> island 1) crosses at
        // Vg = Vt1; this pins the electrostatics to the threshold relations.
        let p = reference_params();
        let d = derive_params(&p);
        let t = thresholds(&p, &d, 0.050);
        let sys = TurnstileSystem::new(&p).unwrap();

        let entry = |vg: f64| {
            sys.delta_f_event(&ChargeState::with_occupancies([0, 0, 0]), 7, vg, 0.050)
        };
        let exit = |vg: f64| {
            sys.delta_f_event(&ChargeState::with_occupancies([0, 1, 0]), 3, vg, 0.050)
        };
        // Bisection for the zero crossing of each.
        let bisect = |f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64| -> f64 {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (f(lo) > 0.0) == (f(mid) > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let vg_entry = bisect(&entry, 0.10, 0.25);
        let vg_exit = bisect(&exit, 0.25, 0.05);
        assert_close(vg_entry, t.vt0, 1e-9, "entry threshold");
        assert_close(vg_exit, t.vt1, 1e-9, "exit threshold");
    }

    #[test]
    fn tunnel_rate_limits_and_detailed_balance() {
        let p = reference_params();
        let kbt = BOLTZMANN * p.temperature;
        let e2rt = E_CHARGE * E_CHARGE * p.rt;

        // dF -> 0 from both sides approaches kB T / e^2 Rt; the residual
        // first-order term is w/2 with w = dF / kB T, so probe small enough
        // that it vanishes below the tolerance.
        let g0 = kbt / e2rt;
        assert_close(tunnel_rate(1e-38, &p), g0, 1e-12, "dF -> 0+");
        assert_close(tunnel_rate(-1e-38, &p), g0, 1e-12, "dF -> 0-");
        assert_close(tunnel_rate(0.0, &p), g0, 1e-15, "dF = 0");
        // And at moderate smallness the first-order slope itself.
        let df = 1e-32;
        let w = df / kbt;
        assert_close(tunnel_rate(df, &p), g0 * (1.0 - 0.5 * w), 1e-12, "slope at 0");

        // Deep downhill: Gamma -> -dF/e^2 Rt.
        let df = -50.0 * kbt;
        assert_close(tunnel_rate(df, &p), -df / e2rt, 1e-12, "downhill tail");

        // Detailed balance over random dF spanning both signs.
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0012);
        for _ in 0..1000 {
            let df = kbt * rng.random_range(-40.0..40.0);
            let fwd = tunnel_rate(df, &p);
            let bwd = tunnel_rate(-df, &p);
            assert_close(fwd / bwd, (-df / kbt).exp(), 1e-12, "detailed balance");
        }

        // Zero temperature: downhill Ohmic, uphill frozen.
        let p0 = CircuitParams::new(1.0e-18, 0.5e-18, 1.0e5, 0.0).unwrap();
        assert_close(tunnel_rate(-1e-21, &p0), 1e-21 / e2rt, 1e-14, "T=0 downhill");
        assert_eq!(tunnel_rate(1e-21, &p0), 0.0);
        assert_eq!(tunnel_rate(0.0, &p0), 0.0);
    }

    #[test]
    fn island_voltage_solve_properties() {
        let p = reference_params();
        // Grounded everything: exactly zero.
        let s0 = ChargeState::new();
        assert_eq!(island_voltage(&s0, 0.0, 0.0, &p).unwrap(), 0.0);

        // One added central electron shifts the potential by -e/C_sigma with
        // C_sigma = 1/u_22 = 1.5 aF for the reference device.
        let v0 = island_voltage(&s0, 0.123, 0.05, &p).unwrap();
        let s1 = ChargeState::with_occupancies([0, 1, 0]);
        let v1 = island_voltage(&s1, 0.123, 0.05, &p).unwrap();
        assert_close(v1 - v0, -E_CHARGE / 1.5e-18, 1e-12, "-e/C_sigma step");

        // Superposition: the charge response is linear in n.
        let s2 = ChargeState::with_occupancies([0, 2, 0]);
        let v2 = island_voltage(&s2, 0.123, 0.05, &p).unwrap();
        assert_close(v2 - v1, v1 - v0, 1e-12, "linearity in n2");

        // Symmetric bias cancels at the central island: no vb dependence.
        let va = island_voltage(&s0, 0.1, 0.0, &p).unwrap();
        let vb = island_voltage(&s0, 0.1, 0.08, &p).unwrap();
        assert_close(va, vb, 1e-12, "central island blind to symmetric bias");
    }

    #[test]
    fn charge_bookkeeping_is_stoichiometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0013);
        let mut s = ChargeState::new();
        let mut expect = [0i64; 3];
        let mut boundary_moves = 0i64;
        for _ in 0..10_000 {
            let junction = rng.random_range(1u8..=4);
            let direction = if rng.random::<bool>() { 1i8 } else { -1 };
            let before = s.transferred;
            s.apply_move(junction, direction).unwrap();
            let idx = (junction as usize - 1) * 2 + usize::from(direction < 0);
            for (e, d) in expect.iter_mut().zip(EVENTS[idx].dn) {
                *e += d as i64;
            }
            let delta = s.transferred - before;
            if junction == 1 {
                assert_eq!(delta, -(direction as i64), "left junction transfer sign");
                boundary_moves += delta;
            } else {
                assert_eq!(delta, 0, "interior/right events must not count transfers");
            }
        }
        for (have, want) in s.n.iter().zip(expect) {
            assert_eq!(*have as i64, want);
        }
        assert_eq!(s.transferred, boundary_moves);
    }

    fn quiet_config(p: CircuitParams, aq: f64, d_v: f64, cycles: usize) -> SimConfig {
        let d = derive_params(&p);
        let fs = 1.0e8;
        let dt = 5.0e-10;
        SimConfig {
            circuit: p,
            bias: BiasPoint::new(d.vg0, 0.050, &d),
            signal: SignalParams::new(aq, fs, &p).unwrap(),
            noise: NoiseParams::new(d_v, 125e-12, 0x0150).unwrap(),
            dt,
            duration: cycles as f64 / fs,
            oversample: 2,
            seed: 0xabcd,
            psd_source: PsdSource::ChargeVoltage,
        }
    }

    #[test]
    fn blockaded_run_has_zero_events() {
        let cfg = quiet_config(reference_params(), 0.0, 0.0, 100);
        let trace = simulate(&cfg).unwrap();
        assert_eq!(trace.events, 0);
        assert!(trace.n_trace.iter().all(|&n| n == 0));
        assert!(trace.island_voltage.iter().all(|&v| v == 0.0));
        assert_eq!(average_current(&trace), 0.0);
    }

    #[test]
    fn suprathreshold_drive_pumps_one_electron_per_cycle() {
        let p = reference_params();
        let cycles = 20;
        let cfg = quiet_config(p, 15.0e-3 * p.cg, 0.0, cycles);
        let trace = simulate(&cfg).unwrap();
        assert_eq!(trace.final_transferred, cycles as i64, "one electron per cycle");
        assert!(trace.n_trace.iter().all(|&n| n == 0 || n == 1));
        let expect = E_CHARGE * 1.0e8;
        assert_close(average_current(&trace), expect, 1e-9, "e*fs current");
    }

    #[test]
    fn monte_carlo_agrees_with_deterministic_switch() {
        let p = reference_params();
        let d = derive_params(&p);
        let cfg = quiet_config(p, 15.0e-3 * p.cg, 0.0, 20);
        let trace = simulate(&cfg).unwrap();
        let t = thresholds(&p, &d, cfg.bias.vb);
        let mut m = TwoStateModel::new(4900.0, 30e-12, t).unwrap();
        let n = trace.n_trace.len();
        let mut agree = 0usize;
        for (k, &n_mc) in trace.n_trace.iter().enumerate() {
            let vg = cfg.bias.vg_dc
                + cfg.signal.av
                    * (2.0 * std::f64::consts::PI * cfg.signal.fs * cfg.dt * k as f64).sin();
            let n_det = crate::circuit::deterministic_switch(&mut m, vg);
            if (n_mc as f64 - n_det).abs() < 0.5 {
                agree += 1;
            }
        }
        assert!(
            agree as f64 > 0.99 * n as f64,
            "hard-switch agreement too low: {agree}/{n}"
        );
    }

    #[test]
    fn reversing_bias_reverses_the_pump() {
        let p = reference_params();
        let mut cfg = quiet_config(p, 15.0e-3 * p.cg, 0.0, 20);
        cfg.bias.vb = -cfg.bias.vb;
        let trace = simulate(&cfg).unwrap();
        assert_eq!(trace.final_transferred, -20);
        assert!(average_current(&trace) < 0.0);
    }

    #[test]
    fn equal_seeds_reproduce_bitwise() {
        let p = reference_params();
        let cfg = quiet_config(p, 4.8e-3 * p.cg, 8.0e-5, 50);
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
        // A different event seed must decorrelate the trace.
        let mut cfg2 = cfg;
        cfg2.seed ^= 1;
        let c = simulate(&cfg2).unwrap();
        assert_ne!(a.n_trace, c.n_trace);
    }

    #[test]
    fn noisy_run_fires_events_and_stays_finite() {
        let p = reference_params();
        let cfg = quiet_config(p, 4.8e-3 * p.cg, 1.0e-4, 100);
        let trace = simulate(&cfg).unwrap();
        assert!(trace.events > 0, "noise at this level must activate switching");
        assert!(trace.island_voltage.iter().all(|v| v.is_finite()));
        // The trace length matches the configured span.
        assert_eq!(trace.n_trace.len(), 2000);
    }

    #[test]
    fn unresolvable_rates_error_out() {
        // An absurdly small junction resistance pushes rates beyond what 48
        // halvings can bound: the stepper must fail loudly, not stall.
        let p = CircuitParams::new(1.0e-18, 0.5e-18, 1.0e-30, 0.030).unwrap();
        let cfg = quiet_config(p, 15.0e-3 * p.cg, 0.0, 2);
        match simulate(&cfg) {
            Err(Error::StepSize { .. }) => {}
            other => panic!("expected step-size error, got {other:?}"),
        }
    }

    #[test]
    fn junction_and_direction_arguments_are_validated() {
        let p = reference_params();
        let s = ChargeState::new();
        assert!(free_energy_delta(&s, 0, 1, 0.1, 0.05, &p).is_err());
        assert!(free_energy_delta(&s, 5, 1, 0.1, 0.05, &p).is_err());
        assert!(free_energy_delta(&s, 2, 0, 0.1, 0.05, &p).is_err());
    }
}
