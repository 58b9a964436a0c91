//! Closed-form adiabatic two-state predictions of the output SNR, and
//! least-squares fitting of their free parameters to simulated curves.
//!
//! Both prediction branches follow the adiabatic linear-response template:
//! the noise-driven switching rate out of a well is linearized as
//! W(t) = alpha0 - alpha1 * eta(t) in the slow drive eta, and the
//! tone-to-background ratio of the resulting telegraph output is
//!
//! S/N = (alpha1^2 eta0^2 / (8 alpha0)) *
//!       [1 - alpha1^2 eta0^2 / (2 (alpha0^2 + omega^2))]^-1   [Hz],
//!
//! valid while the bracketed correction stays positive. The two branches
//! differ in how (alpha0, alpha1) follow from the noise variance:
//!
//! * **Threshold-crossing branch** ([`alpha_tsironis`]): the colored-noise
//!   escape rate W = V_NC/(tau_N sqrt(2 pi D_V)) exp(-V_NC^2/(2 D_V))
//!   linearized about the barrier-vanishing level mu, giving
//!   alpha0 = 2 mu c exp(-mu^2/(2 D_V)) and alpha1 = alpha0/mu exactly,
//!   with the drive entering as the raw voltage amplitude eta0 = A_v.
//! * **Boundary-diffusion branch** ([`alpha_fokker_planck`]): mean
//!   first-passage of the noise coordinate between absorbing levels
//!   +-gamma, giving alpha0 = (tau_N sqrt(pi) I)^-1 with
//!   I = integral_{-theta}^{theta} e^{u^2} Phi(u) du, theta =
//!   gamma/sqrt(2 D_V), Phi(u) = (1 + erf u)/2, and
//!   alpha1 = (tau_N sqrt(pi))^-1 I^-2 e^{theta^2} erf(theta), with a
//!   noise-normalized drive eta0 = A_v/sqrt(2 D_V).
//!
//! Predicted ratios land on the decibel scale of the Welch estimator
//! through snr_db = 10 log10(1 + (S/N) G / delta_f), where G is the
//! window's processing gain and delta_f the analysis bin width.

use crate::circuit::{critical_noise, Thresholds, TwoStateModel};
use crate::error::{Error, Result};

/// Largest theta handled by direct quadrature; e^(25^2) ~ 2.7e271 still
/// fits in f64, beyond which the alphas switch to log-domain asymptotics.
const THETA_DIRECT_MAX: f64 = 25.0;

/// Mean escape rate over a barrier that vanishes at noise level `v_nc` [V],
/// for stationary colored noise of variance `d_v` [V^2] and correlation
/// time `tau_n` [s]:
///
/// W = v_nc / (tau_n sqrt(2 pi d_v)) * exp(-v_nc^2 / (2 d_v)),
///
/// with the zero-variance limit W = 0 taken explicitly.
pub fn transition_rate(v_nc: f64, d_v: f64, tau_n: f64) -> Result<f64> {
    validate_noise(d_v, tau_n)?;
    if !v_nc.is_finite() {
        return Err(Error::InvalidParameter {
            name: "v_nc",
            reason: format!("critical level must be finite, got {v_nc:e}"),
        });
    }
    if d_v == 0.0 {
        return Ok(0.0);
    }
    let c = 1.0 / (tau_n * (2.0 * std::f64::consts::PI * d_v).sqrt());
    Ok(v_nc * c * (-v_nc * v_nc / (2.0 * d_v)).exp())
}

/// Linearized switching rates of the threshold-crossing branch.
///
/// Returns `(alpha0, alpha1)` with alpha0 = 2 mu/(tau_n sqrt(2 pi d_v)) *
/// exp(-mu^2/(2 d_v)) and alpha1 = alpha0/mu identically (alpha1 carries
/// units 1/(V s); pair it with the voltage amplitude eta0 = A_v).
pub fn alpha_tsironis(mu: f64, d_v: f64, tau_n: f64) -> Result<(f64, f64)> {
    validate_noise(d_v, tau_n)?;
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::TheoryOutOfRange(format!(
            "barrier level mu must be > 0 V, got {mu:e}"
        )));
    }
    if d_v == 0.0 {
        return Ok((0.0, 0.0));
    }
    let alpha1 = 2.0 / (tau_n * (2.0 * std::f64::consts::PI * d_v).sqrt())
        * (-mu * mu / (2.0 * d_v)).exp();
    Ok((alpha1 * mu, alpha1))
}

/// Linearized switching rates of the boundary-diffusion branch.
///
/// Returns `(alpha0, alpha1)` (both 1/s; pair them with the normalized
/// amplitude eta0 = A_v/sqrt(2 d_v)). For theta = gamma/sqrt(2 d_v) > 25
/// the integral is evaluated in the log domain through the asymptotic
/// Dawson expansion, letting both alphas underflow cleanly to zero instead
/// of overflowing.
pub fn alpha_fokker_planck(gamma: f64, d_v: f64, tau_n: f64) -> Result<(f64, f64)> {
    validate_noise(d_v, tau_n)?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::TheoryOutOfRange(format!(
            "boundary level gamma must be > 0 V, got {gamma:e}"
        )));
    }
    if d_v == 0.0 {
        return Ok((0.0, 0.0));
    }
    let theta = gamma / (2.0 * d_v).sqrt();
    let prefactor = 1.0 / (tau_n * std::f64::consts::PI.sqrt());
    if theta <= THETA_DIRECT_MAX {
        let i = escape_integral(theta)?;
        let alpha0 = prefactor / i;
        // Grouped to keep every intermediate in range: e^(theta^2)/I stays
        // O(theta) even when I alone is ~1e269.
        let alpha1 = prefactor * ((theta * theta).exp() / i) * (libm::erf(theta) / i);
        Ok((alpha0, alpha1))
    } else {
        let ln_i = theta * theta + dawson_asymptotic(theta).ln();
        let ln_pre = prefactor.ln();
        let alpha0 = (ln_pre - ln_i).exp();
        // ln alpha1 = ln_pre + theta^2 - 2 ln I  (erf(theta) = 1 here).
        let alpha1 = (ln_pre + theta * theta - 2.0 * ln_i).exp();
        Ok((alpha0, alpha1))
    }
}

/// The boundary-diffusion normalization integral
/// I(theta) = integral_{-theta}^{theta} e^{u^2} Phi(u) du with
/// Phi(u) = (1 + erf u)/2, by adaptive Gauss-Kronrod quadrature to
/// relative accuracy ~1e-12. Valid for 0 < theta <= 25 (the direct-range
/// guard); the integrand spans ~e^{theta^2}, which still fits in f64 there.
pub fn escape_integral(theta: f64) -> Result<f64> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(Error::TheoryOutOfRange(format!(
            "integral bound theta must be > 0, got {theta:e}"
        )));
    }
    if theta > THETA_DIRECT_MAX {
        return Err(Error::TheoryOutOfRange(format!(
            "theta = {theta} exceeds the direct-quadrature range ({THETA_DIRECT_MAX})"
        )));
    }
    let f = |u: f64| (u * u).exp() * 0.5 * (1.0 + libm::erf(u));
    let (rough, _) = gauss_kronrod(&f, -theta, theta);
    let tol = 1e-12 * rough.abs().max(1.0);
    adaptive_quadrature(&f, -theta, theta, tol, 0)
}

/// One Gauss7/Kronrod15 panel: returns (K15 estimate, |K15 - G7|).
fn gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    // Standard 15-point Kronrod abscissae/weights with the embedded
    // 7-point Gauss rule (nodes at indices 1, 3, 5, 7).
    const XGK: [f64; 8] = [
        0.991455371120813,
        0.949107912342759,
        0.864864423359769,
        0.741531185599394,
        0.586087235467691,
        0.405845151377397,
        0.207784955007898,
        0.0,
    ];
    const WGK: [f64; 8] = [
        0.022935322010529,
        0.063092092629979,
        0.104790010322250,
        0.140653259715525,
        0.169004726639267,
        0.190350578064785,
        0.204432940075298,
        0.209482141084728,
    ];
    const WG: [f64; 4] = [
        0.129484966168870,
        0.279705391489277,
        0.381830050505119,
        0.417959183673469,
    ];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut k15 = WGK[7] * f(mid);
    let mut g7 = WG[3] * f(mid);
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(mid - dx) + f(mid + dx);
        k15 += WGK[j] * pair;
        if j % 2 == 1 {
            g7 += WG[j / 2] * pair;
        }
    }
    (k15 * half, (k15 - g7).abs() * half)
}

/// Bisect panels until the summed Kronrod error model meets `tol`.
///
/// A panel is also accepted once its error estimate falls to the rounding
/// floor of its own value: for steep integrands like e^{u^2} the difference
/// between the embedded rules stops shrinking relative to the panel once
/// function rounding dominates, and refining further cannot help.
fn adaptive_quadrature(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let (estimate, err) = gauss_kronrod(f, a, b);
    let rounding_floor = 100.0 * f64::EPSILON * estimate.abs();
    if err <= tol.max(rounding_floor) || (b - a).abs() < 1e-300 {
        return Ok(estimate);
    }
    if depth >= 60 {
        return Err(Error::TheoryOutOfRange(format!(
            "quadrature failed to converge on [{a:e}, {b:e}] (residual {err:e})"
        )));
    }
    let mid = 0.5 * (a + b);
    Ok(adaptive_quadrature(f, a, mid, 0.5 * tol, depth + 1)?
        + adaptive_quadrature(f, mid, b, 0.5 * tol, depth + 1)?)
}

/// Dawson function D(x) = e^{-x^2} integral_0^x e^{t^2} dt via the
/// asymptotic series D(x) ~ (1/2x) sum_k (2k-1)!!/(2x^2)^k, summed until
/// terms stop shrinking. Accurate to machine precision for x >= 15.
fn dawson_asymptotic(x: f64) -> f64 {
    let inv = 1.0 / (2.0 * x * x);
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 1..40 {
        term *= (2 * k - 1) as f64 * inv;
        sum += term;
        if term < f64::EPSILON * sum {
            break;
        }
    }
    sum / (2.0 * x)
}

fn validate_noise(d_v: f64, tau_n: f64) -> Result<()> {
    if !(d_v.is_finite() && d_v >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "d_v",
            reason: format!("noise variance must be >= 0, got {d_v:e}"),
        });
    }
    if !(tau_n.is_finite() && tau_n > 0.0) {
        return Err(Error::InvalidParameter {
            name: "tau_n",
            reason: format!("correlation time must be > 0, got {tau_n:e}"),
        });
    }
    Ok(())
}

/// Linear-response tone-to-background ratio [Hz]:
///
/// S/N = (alpha1^2 eta0^2 / (8 alpha0)) *
///       [1 - alpha1^2 eta0^2 / (2 (alpha0^2 + (2 pi fs)^2))]^-1.
///
/// Zero drive response gives exactly 0; a nonpositive bracketed correction
/// means the expansion left its validity region and errors out.
pub fn snr_ratio(alpha0: f64, alpha1: f64, eta0: f64, fs: f64) -> Result<f64> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::InvalidParameter {
            name: "fs",
            reason: format!("drive frequency must be > 0, got {fs:e}"),
        });
    }
    if !(alpha0.is_finite() && alpha0 >= 0.0 && alpha1.is_finite() && eta0.is_finite()) {
        return Err(Error::TheoryOutOfRange(format!(
            "rates out of range: alpha0 = {alpha0:e}, alpha1 = {alpha1:e}, eta0 = {eta0:e}"
        )));
    }
    let drive = alpha1 * eta0;
    if drive == 0.0 {
        return Ok(0.0);
    }
    if alpha0 == 0.0 {
        return Err(Error::TheoryOutOfRange(
            "nonzero drive response with a vanishing static rate".into(),
        ));
    }
    let omega = 2.0 * std::f64::consts::PI * fs;
    let bracket = 1.0 - drive * drive / (2.0 * (alpha0 * alpha0 + omega * omega));
    if bracket <= 0.0 {
        return Err(Error::TheoryOutOfRange(format!(
            "linear-response correction bracket is nonpositive ({bracket:e})"
        )));
    }
    Ok(drive * drive / (8.0 * alpha0) / bracket)
}

/// Predicted SNR on the Welch decibel scale:
/// snr_db = 10 log10(1 + (S/N) * gain / delta_hz), with `gain` the window
/// processing gain and `delta_hz` the analysis bin width. Evaluated with
/// ln(1+x) so sub-epsilon ratios keep their ordering instead of collapsing
/// to exactly 0 dB.
pub fn snr_theory(
    alpha0: f64,
    alpha1: f64,
    eta0: f64,
    fs: f64,
    gain: f64,
    delta_hz: f64,
) -> Result<f64> {
    if !(gain.is_finite() && gain > 0.0 && gain <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "gain",
            reason: format!("processing gain must be in (0, 1], got {gain:e}"),
        });
    }
    if !(delta_hz.is_finite() && delta_hz > 0.0) {
        return Err(Error::InvalidParameter {
            name: "delta_hz",
            reason: format!("bin width must be > 0, got {delta_hz:e}"),
        });
    }
    let ratio = snr_ratio(alpha0, alpha1, eta0, fs)?;
    Ok(10.0 * (ratio * gain / delta_hz).ln_1p() / std::f64::consts::LN_10)
}

/// Origin of an SNR-vs-noise curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Monte Carlo simulation plus Welch estimation.
    Simulation,
    /// Threshold-crossing rate branch.
    Tsironis,
    /// Boundary-diffusion rate branch.
    FokkerPlanck,
}

impl Provenance {
    /// Stable identifier used in CSV output.
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Simulation => "simulation",
            Provenance::Tsironis => "tsironis",
            Provenance::FokkerPlanck => "fokker-planck",
        }
    }

    /// Parse the CSV identifier.
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "simulation" => Ok(Provenance::Simulation),
            "tsironis" => Ok(Provenance::Tsironis),
            "fokker-planck" => Ok(Provenance::FokkerPlanck),
            other => Err(Error::Config(format!("unknown provenance '{other}'"))),
        }
    }
}

/// Which closed-form branch to evaluate or fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoryBranch {
    /// Threshold-crossing rates; free parameter beta [1/V].
    Tsironis,
    /// Boundary-diffusion rates; free parameter lambda [dimensionless].
    FokkerPlanck,
}

impl TheoryBranch {
    /// Provenance tag of curves generated by this branch.
    pub fn provenance(self) -> Provenance {
        match self {
            TheoryBranch::Tsironis => Provenance::Tsironis,
            TheoryBranch::FokkerPlanck => Provenance::FokkerPlanck,
        }
    }
}

/// One point of an SNR-vs-noise curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrPoint {
    /// Noise variance [V^2].
    pub d_v: f64,
    /// Output SNR [dB].
    pub snr_db: f64,
}

/// An SNR-versus-noise-variance curve at fixed drive amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrCurve {
    /// Points with strictly increasing noise variance and finite SNR.
    pub points: Vec<SnrPoint>,
    /// Drive amplitude as gate charge [C].
    pub aq: f64,
    /// How the curve was produced.
    pub provenance: Provenance,
}

impl SnrCurve {
    /// Validate ordering and finiteness.
    pub fn new(points: Vec<SnrPoint>, aq: f64, provenance: Provenance) -> Result<Self> {
        for pair in points.windows(2) {
            if !(pair[1].d_v > pair[0].d_v) {
                return Err(Error::InvalidParameter {
                    name: "points",
                    reason: format!(
                        "noise variances must increase strictly: {:e} then {:e}",
                        pair[0].d_v, pair[1].d_v
                    ),
                });
            }
        }
        if let Some(bad) = points.iter().find(|p| !(p.d_v > 0.0) || !p.snr_db.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "points",
                reason: format!("invalid point (d_v = {:e}, snr = {:e})", bad.d_v, bad.snr_db),
            });
        }
        Ok(Self { points, aq, provenance })
    }

    /// The point with the largest SNR, if any.
    pub fn argmax(&self) -> Option<&SnrPoint> {
        self.points
            .iter()
            .max_by(|a, b| a.snr_db.total_cmp(&b.snr_db))
    }
}

/// Everything fixed while a branch parameter varies: operating point,
/// drive, noise color, and the spectral scale of the measurement the
/// prediction must land on.
#[derive(Debug, Clone, Copy)]
pub struct TheoryContext {
    /// Switching thresholds at the operating bias.
    pub thresholds: Thresholds,
    /// DC gate voltage [V].
    pub vg_dc: f64,
    /// Drive amplitude as gate voltage [V].
    pub av: f64,
    /// Drive frequency [Hz].
    pub fs: f64,
    /// Noise correlation time [s].
    pub tau_n: f64,
    /// Window processing gain of the reference estimator.
    pub gain: f64,
    /// Bin width of the reference estimator [Hz].
    pub delta_hz: f64,
}

impl TheoryContext {
    /// Predicted SNR [dB] of `branch` with free parameter `param`
    /// (beta [1/V] for the threshold-crossing branch, lambda for the
    /// boundary-diffusion branch) at noise variance `d_v`.
    pub fn snr_db(&self, branch: TheoryBranch, param: f64, d_v: f64) -> Result<f64> {
        match branch {
            TheoryBranch::Tsironis => {
                // The relaxation time never enters the barrier location, so
                // any positive placeholder serves the model constructor.
                let m = TwoStateModel::new(param, 1.0, self.thresholds)?;
                let (_, mu) = critical_noise(0.0, &m, self.vg_dc)?;
                if mu <= 0.0 {
                    return Err(Error::TheoryOutOfRange(format!(
                        "operating point is not subthreshold (mu = {mu:e} V)"
                    )));
                }
                let (a0, a1) = alpha_tsironis(mu, d_v, self.tau_n)?;
                snr_theory(a0, a1, self.av, self.fs, self.gain, self.delta_hz)
            }
            TheoryBranch::FokkerPlanck => {
                let gamma = 0.5 * param * self.thresholds.width();
                let (a0, a1) = alpha_fokker_planck(gamma, d_v, self.tau_n)?;
                let eta0 = self.av / (2.0 * d_v).sqrt();
                snr_theory(a0, a1, eta0, self.fs, self.gain, self.delta_hz)
            }
        }
    }

    /// Evaluate a full curve on `grid`, silently skipping variances where
    /// the branch is out of range.
    pub fn curve(
        &self,
        branch: TheoryBranch,
        param: f64,
        grid: &[f64],
        aq: f64,
    ) -> Result<SnrCurve> {
        let mut points = Vec::with_capacity(grid.len());
        for &d_v in grid {
            if let Ok(snr_db) = self.snr_db(branch, param, d_v) {
                points.push(SnrPoint { d_v, snr_db });
            }
        }
        SnrCurve::new(points, aq, branch.provenance())
    }
}

/// Result of a bracketed golden-section minimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenResult {
    /// Abscissa of the minimum.
    pub x: f64,
    /// Objective value there.
    pub value: f64,
    /// Shrink iterations performed.
    pub iterations: u32,
}

/// Golden-section search for the minimum of `f` on [a, b].
///
/// Assumes a unimodal objective on the bracket; stops when the bracket
/// shrinks below `tol_rel` relative to its midpoint or after `max_iter`
/// shrinks.
pub fn golden_minimize(
    f: &mut impl FnMut(f64) -> f64,
    mut a: f64,
    mut b: f64,
    tol_rel: f64,
    max_iter: u32,
) -> GoldenResult {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iterations = 0;
    while iterations < max_iter {
        let mid = 0.5 * (a + b).abs().max(1e-300);
        if (b - a).abs() <= tol_rel * mid {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        iterations += 1;
    }
    let (x, value) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    GoldenResult { x, value, iterations }
}

/// Outcome of fitting one branch parameter to a simulated curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOutcome {
    /// Fitted beta [1/V] or lambda.
    pub parameter: f64,
    /// Sum of squared dB residuals over the valid points at the optimum.
    pub residual: f64,
    /// Grid points excluded at the optimum because the branch was out of
    /// range there.
    pub excluded_points: usize,
    /// True when the optimum landed essentially on a search boundary.
    pub at_boundary: bool,
}

/// Least-squares fit of the branch's free parameter to a simulated curve.
///
/// Minimizes the sum of squared dB residuals over `range` (log-spaced
/// 64-point coarse scan, then golden-section refinement of the best
/// bracket). Points where the prediction is out of range are excluded from
/// the sum and counted; a fit where no point is ever valid fails.
pub fn fit_parameter(
    sim: &SnrCurve,
    branch: TheoryBranch,
    ctx: &TheoryContext,
    range: (f64, f64),
) -> Result<FitOutcome> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
        return Err(Error::Fit(format!(
            "search range must satisfy 0 < lo < hi, got [{lo:e}, {hi:e}]"
        )));
    }
    if sim.points.len() < 5 {
        return Err(Error::Fit(format!(
            "need at least 5 points to fit, got {}",
            sim.points.len()
        )));
    }

    let evaluate = |param: f64| -> (f64, usize) {
        let mut sum = 0.0;
        let mut excluded = 0;
        let mut valid = 0;
        for pt in &sim.points {
            match ctx.snr_db(branch, param, pt.d_v) {
                Ok(t) => {
                    let r = t - pt.snr_db;
                    sum += r * r;
                    valid += 1;
                }
                Err(_) => excluded += 1,
            }
        }
        if valid == 0 {
            (f64::INFINITY, excluded)
        } else {
            (sum, excluded)
        }
    };

    const COARSE: usize = 64;
    let ln_lo = lo.ln();
    let step = (hi.ln() - ln_lo) / (COARSE - 1) as f64;
    let grid: Vec<f64> = (0..COARSE).map(|i| (ln_lo + step * i as f64).exp()).collect();
    let mut best = 0;
    let mut best_val = f64::INFINITY;
    for (i, &p) in grid.iter().enumerate() {
        let (v, _) = evaluate(p);
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    if best_val.is_infinite() {
        return Err(Error::Fit(
            "no parameter in the search range yields any valid prediction".into(),
        ));
    }

    let bracket_lo = grid[best.saturating_sub(1)];
    let bracket_hi = grid[(best + 1).min(COARSE - 1)];
    let mut obj = |p: f64| evaluate(p).0;
    let refined = golden_minimize(&mut obj, bracket_lo, bracket_hi, 1e-9, 200);
    let (residual, excluded_points) = evaluate(refined.x);
    let at_boundary = refined.x <= lo * 1.005 || refined.x >= hi * 0.995;
    if at_boundary {
        log::warn!(
            "fitted parameter {:e} sits at the edge of the search range [{lo:e}, {hi:e}]",
            refined.x
        );
    }
    Ok(FitOutcome {
        parameter: refined.x,
        residual,
        excluded_points,
        at_boundary,
    })
}
