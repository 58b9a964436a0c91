//! Circuit-level model of the four-junction single-electron turnstile.
//!
//! The device is a chain of four identical tunnel junctions (capacitance `C`,
//! resistance `Rt`) enclosing three metallic islands, with a gate capacitor
//! `Cg` on the central island. Symmetric bias `+Vb` / `-Vb` is applied at the
//! chain ends. This module carries:
//!
//! * the closed-form derived parameters (effective external capacitance
//!   `Cext`, gate period `Vg0`, bias apex `Vb0`) and the switching thresholds
//!   `Vt0`/`Vt1` of the central-island occupancy,
//! * a reduced two-state model of the central island (hard switch, smooth
//!   relaxation ODE, and its double-well potential),
//! * the critical gate-noise amplitude at which the potential barrier
//!   vanishes, and
//! * a charge-stability map over the normalized gate/bias plane computed from
//!   the full island electrostatics.

use crate::constants::E_CHARGE;
use crate::error::{Error, Result};
use crate::mc::{ChargeState, TurnstileSystem};

/// Fabrication-level device parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitParams {
    /// Tunnel-junction capacitance [F].
    pub c: f64,
    /// Gate capacitance on the central island [F].
    pub cg: f64,
    /// Tunnel-junction resistance [ohm].
    pub rt: f64,
    /// Bath temperature [K].
    pub temperature: f64,
}

impl CircuitParams {
    /// Validated constructor. Capacitances and resistance must be strictly
    /// positive; temperature must be non-negative (0 K selects the
    /// zero-temperature rate expression).
    pub fn new(c: f64, cg: f64, rt: f64, temperature: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter {
                name: "c",
                reason: format!("junction capacitance must be > 0, got {c:e}"),
            });
        }
        if !(cg.is_finite() && cg > 0.0) {
            return Err(Error::InvalidParameter {
                name: "cg",
                reason: format!("gate capacitance must be > 0, got {cg:e}"),
            });
        }
        if !(rt.is_finite() && rt > 0.0) {
            return Err(Error::InvalidParameter {
                name: "rt",
                reason: format!("tunnel resistance must be > 0, got {rt:e}"),
            });
        }
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "temperature",
                reason: format!("temperature must be >= 0, got {temperature:e}"),
            });
        }
        Ok(Self { c, cg, rt, temperature })
    }
}

/// Closed-form quantities derived from [`CircuitParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedParams {
    /// Effective capacitance of the outer junction pairs as seen from the
    /// central island: Cext = C(C/2 + Cg)/(3C/2 + Cg) [F].
    pub cext: f64,
    /// Gate-voltage period of the stability diagram: Vg0 = e/(Cg + Cext) [V].
    pub vg0: f64,
    /// Bias at which neighbouring stability diamonds touch:
    /// Vb0 = e/(2(C + Cext)) [V].
    pub vb0: f64,
}

/// Compute [`DerivedParams`] from the device parameters.
pub fn derive_params(p: &CircuitParams) -> DerivedParams {
    let cext = p.c * (p.c / 2.0 + p.cg) / (1.5 * p.c + p.cg);
    DerivedParams {
        cext,
        vg0: E_CHARGE / (p.cg + cext),
        vb0: E_CHARGE / (2.0 * (p.c + cext)),
    }
}

/// A gate/bias operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasPoint {
    /// DC gate voltage [V].
    pub vg_dc: f64,
    /// Bias amplitude [V]; the chain ends sit at +Vb and -Vb.
    pub vb: f64,
    /// Distance from the diamond apex: epsilon = Vb0 - Vb [V]. Positive
    /// epsilon is required for a bistable operating window.
    pub epsilon: f64,
}

impl BiasPoint {
    /// Build a bias point, deriving `epsilon` from the device parameters.
    pub fn new(vg_dc: f64, vb: f64, d: &DerivedParams) -> Self {
        Self { vg_dc, vb, epsilon: d.vb0 - vb }
    }

    /// True when the operating point admits two stable central-island
    /// occupancies (Vb below the diamond apex).
    pub fn is_bistable(&self) -> bool {
        self.epsilon > 0.0
    }
}

/// Periodic gate drive expressed as an induced charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalParams {
    /// Drive amplitude as gate-induced charge [C].
    pub aq: f64,
    /// Equivalent gate-voltage amplitude Av = Aq/Cg [V].
    pub av: f64,
    /// Drive frequency [Hz].
    pub fs: f64,
}

impl SignalParams {
    /// Validated constructor; `av` is derived from `aq` and the gate
    /// capacitance. Zero amplitude is allowed (noise-only runs).
    pub fn new(aq: f64, fs: f64, p: &CircuitParams) -> Result<Self> {
        if !(aq.is_finite() && aq >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "aq",
                reason: format!("drive charge amplitude must be >= 0, got {aq:e}"),
            });
        }
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::InvalidParameter {
                name: "fs",
                reason: format!("drive frequency must be > 0, got {fs:e}"),
            });
        }
        Ok(Self { aq, av: aq / p.cg, fs })
    }
}

/// Gate-voltage switching thresholds of the central-island occupancy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Upward switch threshold (occupancy 0 -> 1) [V].
    pub vt0: f64,
    /// Downward switch threshold (occupancy 1 -> 0) [V].
    pub vt1: f64,
}

impl Thresholds {
    /// Hysteresis width Vt0 - Vt1 [V]; positive in the bistable window.
    pub fn width(&self) -> f64 {
        self.vt0 - self.vt1
    }
}

/// Switching thresholds at bias `vb`:
///
/// Vt0 = 2 Vg0 - 2 Vb (C + Cext)/(Cg + Cext),  Vt1 = 2 Vb (C + Cext)/(Cg + Cext).
///
/// They satisfy Vt0 + Vt1 = 2 Vg0 identically and cross at Vb = Vb0, so the
/// device is bistable (Vt0 > Vt1) exactly for Vb < Vb0.
pub fn thresholds(p: &CircuitParams, d: &DerivedParams, vb: f64) -> Thresholds {
    let lever = (p.c + d.cext) / (p.cg + d.cext);
    let vt1 = 2.0 * vb * lever;
    Thresholds { vt0: 2.0 * d.vg0 - vt1, vt1 }
}

/// Reduced model of the central island: a single occupancy degree of freedom
/// `n` in a gate-controlled double-well potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStateModel {
    /// Sharpness of the switching nonlinearity [1/V]; larger beta means a
    /// harder threshold.
    pub beta: f64,
    /// Relaxation time of the occupancy toward its stationary value [s].
    pub tau_t: f64,
    /// Switching thresholds at the operating bias.
    pub thresholds: Thresholds,
    /// Current occupancy, continuous in [0, 1].
    pub n: f64,
}

impl TwoStateModel {
    /// Validated constructor; starts from occupancy `n = 0`.
    pub fn new(beta: f64, tau_t: f64, thresholds: Thresholds) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("switching sharpness must be > 0, got {beta:e}"),
            });
        }
        if !(tau_t.is_finite() && tau_t > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tau_t",
                reason: format!("relaxation time must be > 0, got {tau_t:e}"),
            });
        }
        Ok(Self { beta, tau_t, thresholds, n: 0.0 })
    }

    /// The switching argument z = (Vt0 - Vt1) n - Vt0 + Vg for occupancy `n`
    /// at total gate voltage `vg`.
    pub fn switching_argument(&self, n: f64, vg: f64) -> f64 {
        self.thresholds.width() * n - self.thresholds.vt0 + vg
    }
}

/// Hard-threshold update of the occupancy: n <- (sgn(z) + 1)/2 with
/// z evaluated at the previous occupancy. The state is left unchanged on an
/// exact tie (z = 0), so the map is well defined on threshold crossings.
/// Returns the new occupancy (exactly 0.0 or 1.0, or the prior value on a
/// tie).
pub fn deterministic_switch(m: &mut TwoStateModel, vg: f64) -> f64 {
    let z = m.switching_argument(m.n, vg);
    if z > 0.0 {
        m.n = 1.0;
    } else if z < 0.0 {
        m.n = 0.0;
    }
    m.n
}

/// Relaxation rate of the occupancy:
///
/// dn/dt = -[n - (tanh(beta z) + 1)/2] / tau_t.
///
/// The stationary value (tanh(beta z) + 1)/2 lies in (0, 1), so trajectories
/// started inside the unit interval remain there.
pub fn two_state_rhs(m: &TwoStateModel, vg: f64) -> f64 {
    let z = m.switching_argument(m.n, vg);
    -(m.n - 0.5 * ((m.beta * z).tanh() + 1.0)) / m.tau_t
}

/// Integrate the relaxation ODE with the explicit Euler scheme through the
/// supplied gate-voltage samples (one step per sample, starting from `m.n`).
/// Requires dt <= tau_t/10 for the scheme to stay in its stable, contractive
/// regime; each Euler update is then a convex combination of the current
/// occupancy and a stationary value in (0, 1), so the output never leaves
/// [0, 1]. Returns the occupancy after each step and leaves `m.n` at the
/// final value.
pub fn integrate_two_state(m: &mut TwoStateModel, vg_series: &[f64], dt: f64) -> Result<Vec<f64>> {
    if !(dt.is_finite() && dt > 0.0 && dt <= m.tau_t / 10.0) {
        return Err(Error::InvalidParameter {
            name: "dt",
            reason: format!(
                "Euler step must satisfy 0 < dt <= tau_t/10 = {:e}, got {dt:e}",
                m.tau_t / 10.0
            ),
        });
    }
    let mut out = Vec::with_capacity(vg_series.len());
    for &vg in vg_series {
        m.n += dt * two_state_rhs(m, vg);
        out.push(m.n);
    }
    Ok(out)
}

/// Overflow-safe ln(cosh(y)) = |y| - ln 2 + ln(1 + exp(-2|y|)).
fn ln_cosh(y: f64) -> f64 {
    let a = y.abs();
    a - std::f64::consts::LN_2 + (-2.0 * a).exp().ln_1p()
}

/// Double-well potential of the reduced model [1/s]:
///
/// U(n, Vg) = [ n(n-1)/2 - ln cosh(beta z) / (2 beta (Vt0 - Vt1)) ] / tau_t,
///
/// with z = (Vt0 - Vt1) n - Vt0 + Vg. The relaxation ODE is gradient descent
/// on this potential: dn/dt = -dU/dn.
pub fn potential(m: &TwoStateModel, n: f64, vg: f64) -> f64 {
    let width = m.thresholds.width();
    let z = m.switching_argument(n, vg);
    (0.5 * n * (n - 1.0) - ln_cosh(m.beta * z) / (2.0 * m.beta * width)) / m.tau_t
}

/// Inverse hyperbolic secant for x in (0, 1]:
/// asech(x) = ln((1 + sqrt(1 - x^2))/x).
fn asech(x: f64) -> f64 {
    ((1.0 + (1.0 - x * x).sqrt()) / x).ln()
}

/// Gate-noise level at which the barrier of the double-well potential
/// vanishes.
///
/// With x = sqrt(2/(beta (Vt0 - Vt1))), the barrier out of the lower well
/// disappears when the total gate excursion beyond `vg_dc` reaches
///
/// mu = (Vt0 - Vt1)(sqrt(1 - x^2) - 1)/2 + Vt0 - vg_dc - asech(x)/beta,
///
/// i.e. at that gate voltage the potential's local minimum and maximum merge
/// into an inflection point (dU/dn = d^2U/dn^2 = 0). With an instantaneous
/// drive contribution `vs` already applied, the remaining noise margin is
/// V_NC = mu - vs. Returns `(v_nc, mu)`.
///
/// Errors with [`Error::NoBarrier`] when x >= 1 (beta too small for the
/// potential to be bistable at all) and with an invalid-parameter error when
/// the thresholds are not in the bistable order Vt0 > Vt1.
pub fn critical_noise(vs: f64, m: &TwoStateModel, vg_dc: f64) -> Result<(f64, f64)> {
    let width = m.thresholds.width();
    if width <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "thresholds",
            reason: format!("bistable window requires Vt0 > Vt1, got width {width:e} V"),
        });
    }
    let x = (2.0 / (m.beta * width)).sqrt();
    if x >= 1.0 {
        return Err(Error::NoBarrier { x });
    }
    let mu = 0.5 * width * ((1.0 - x * x).sqrt() - 1.0) + m.thresholds.vt0 - vg_dc
        - asech(x) / m.beta;
    Ok((mu - vs, mu))
}

/// Charge-stability map over the normalized gate/bias plane.
///
/// Axes are in reduced units: `vg_norm` = Vg (Cg + Cext)/e and
/// `vb_norm` = Vb (C + Cext)/e, which make the diamond geometry
/// device-independent (period 2 in `vg_norm`, apex at `vb_norm` = 1/2).
#[derive(Debug, Clone)]
pub struct StabilityMap {
    /// Normalized gate-axis sample points.
    pub vg_norm: Vec<f64>,
    /// Normalized bias-axis sample points.
    pub vb_norm: Vec<f64>,
    /// `cells[i_vb][i_vg]`: central-island occupancies that are stable at
    /// that grid point (every single tunnel event raises free energy).
    pub cells: Vec<Vec<Vec<i32>>>,
}

/// Occupancy candidates examined by [`stability_map`]; wide enough to cover
/// the first few diamonds on either side of zero.
const STABILITY_CANDIDATES: std::ops::RangeInclusive<i32> = -2..=3;

/// Scan the normalized gate/bias plane and report, for each grid point, the
/// set of central-island occupancies `n` for which every one of the eight
/// single-electron moves strictly raises the total free energy (outer
/// islands empty). Grid axes are inclusive linear spans with `steps` >= 2
/// points each.
pub fn stability_map(
    p: &CircuitParams,
    vg_norm_range: (f64, f64),
    vb_norm_range: (f64, f64),
    steps: (usize, usize),
) -> Result<StabilityMap> {
    let (vg_steps, vb_steps) = steps;
    if vg_steps < 2 || vb_steps < 2 {
        return Err(Error::InvalidParameter {
            name: "steps",
            reason: format!("stability grid needs >= 2 points per axis, got {steps:?}"),
        });
    }
    let d = derive_params(p);
    let sys = TurnstileSystem::new(p)?;
    let vg_scale = E_CHARGE / (p.cg + d.cext);
    let vb_scale = E_CHARGE / (p.c + d.cext);

    let linspace = |(lo, hi): (f64, f64), n: usize| -> Vec<f64> {
        let step = (hi - lo) / (n - 1) as f64;
        (0..n).map(|i| lo + step * i as f64).collect()
    };
    let vg_norm = linspace(vg_norm_range, vg_steps);
    let vb_norm = linspace(vb_norm_range, vb_steps);

    let mut cells = Vec::with_capacity(vb_steps);
    for &bn in &vb_norm {
        let vb = bn * vb_scale;
        let mut row = Vec::with_capacity(vg_steps);
        for &gn in &vg_norm {
            let vg = gn * vg_scale;
            let mut stable = Vec::new();
            for n2 in STABILITY_CANDIDATES {
                let state = ChargeState::with_occupancies([0, n2, 0]);
                let all_uphill = (0..TurnstileSystem::EVENT_COUNT)
                    .all(|ev| sys.delta_f_event(&state, ev, vg, vb) > 0.0);
                if all_uphill {
                    stable.push(n2);
                }
            }
            row.push(stable);
        }
        cells.push(row);
    }
    Ok(StabilityMap { vg_norm, vb_norm, cells })
}
