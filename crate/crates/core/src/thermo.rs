//! Work, free energy and heat of the detection process.
//!
//! Work is counted only when the signal photon is absorbed, so each trial
//! yields `w = μ` (in units of `k_BT`) with the signal-attributable absorption
//! probability and `w = 0` otherwise. Jarzynski's equality then gives the
//! free-energy change of this two-outcome distribution in closed form.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detector::{DetectionModel, DetectorParams};
use crate::error::{Error, Result};
use crate::modes::Overlap;
use crate::source::BathParams;

/// Dimensionless work of one trial, `Wβ ∈ {0, μ}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkSample(pub f64);

/// Thermodynamics of one detection, in units of `k_BT`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoSummary {
    pub p_abs: f64,
    pub w_avg: f64,
    pub df: f64,
    pub q: f64,
}

/// The same quantities divided by `μ`, well defined at zero temperature.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScaledThermo {
    pub p_abs: f64,
    pub w_avg_scaled: f64,
    pub df_scaled: f64,
    pub q_scaled: f64,
}

/// Probability that the signal (not a bath photon) is absorbed: the
/// overlap-dependent term of the ground-state probability.
pub fn absorption_probability(model: DetectionModel, gamma_overlap: Overlap, det: &DetectorParams) -> f64 {
    let x = det.chi * gamma_overlap.value();
    let t = det.bath.polarization();
    match model {
        DetectionModel::Quantum => x * t,
        DetectionModel::Classical => x * (-x).exp() * t,
    }
}

fn check_inputs(p_abs: f64, mu: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p_abs) {
        return Err(Error::domain(format!("p_abs must lie in [0, 1], got {p_abs}")));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::domain(format!(
            "mu must be finite and positive, got {mu}; use the scaled summary at zero temperature"
        )));
    }
    Ok(())
}

/// `⟨W⟩β = μ · p_abs`.
pub fn average_work(p_abs: f64, mu: f64) -> Result<f64> {
    check_inputs(p_abs, mu)?;
    Ok(mu * p_abs)
}

/// `ΔFβ = −ln⟨e^{−Wβ}⟩ = −ln(1 − p_abs(1 − e^{−μ}))`.
pub fn free_energy_change(p_abs: f64, mu: f64) -> Result<f64> {
    check_inputs(p_abs, mu)?;
    if p_abs == 1.0 {
        return Ok(mu);
    }
    Ok(-(-p_abs * -(-mu).exp_m1()).ln_1p())
}

/// `Qβ = ⟨W⟩β − ΔFβ`.
pub fn dissipated_heat(w_avg: f64, df: f64) -> f64 {
    w_avg - df
}

pub fn summarize(p_abs: f64, mu: f64) -> Result<ThermoSummary> {
    let w_avg = average_work(p_abs, mu)?;
    let df = free_energy_change(p_abs, mu)?;
    Ok(ThermoSummary { p_abs, w_avg, df, q: dissipated_heat(w_avg, df) })
}

/// Distance from one below which `p_abs` counts as certain absorption in the
/// `μ = ∞` free-energy limit; a converged overlap jitters by a few ulps.
pub const CERTAIN_ABSORPTION_TOL: f64 = 8.0 * f64::EPSILON;

/// `(⟨W⟩/μ, ΔF/μ, Q/μ)`. At `μ = ∞` the free-energy term is its limit:
/// zero for `p_abs < 1`, one at `p_abs = 1` (within [`CERTAIN_ABSORPTION_TOL`]).
pub fn scaled(p_abs: f64, bath: BathParams) -> Result<ScaledThermo> {
    if !(0.0..=1.0).contains(&p_abs) {
        return Err(Error::domain(format!("p_abs must lie in [0, 1], got {p_abs}")));
    }
    let mu = bath.mu();
    let (w, df) = if bath.is_zero_temperature() {
        (p_abs, if 1.0 - p_abs <= CERTAIN_ABSORPTION_TOL { p_abs } else { 0.0 })
    } else if mu == 0.0 {
        // infinite temperature: no work is exchanged
        (0.0, 0.0)
    } else {
        let s = summarize(p_abs, mu)?;
        (s.w_avg / mu, s.df / mu)
    };
    Ok(ScaledThermo { p_abs, w_avg_scaled: w, df_scaled: df, q_scaled: w - df })
}

/// Scaled thermodynamics of one detection at the detector's own temperature.
pub fn detection_thermo(model: DetectionModel, gamma_overlap: Overlap, det: &DetectorParams) -> Result<ScaledThermo> {
    scaled(absorption_probability(model, gamma_overlap, det).min(1.0), det.bath)
}

/// Monte Carlo estimate of `−ln⟨e^{−Wβ}⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JarzynskiEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

pub const MIN_TRIALS: usize = 1000;

/// Sample `trials` work values and return the log-mean-exp estimator of
/// `ΔFβ` with its delta-method standard error.
pub fn jarzynski_monte_carlo<R: Rng>(p_abs: f64, mu: f64, trials: usize, rng: &mut R) -> Result<JarzynskiEstimate> {
    check_inputs(p_abs, mu)?;
    if trials < MIN_TRIALS {
        return Err(Error::domain(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    let absorbed = (0..trials).filter(|_| rng.gen::<f64>() < p_abs).count();
    if absorbed == 0 {
        return Ok(JarzynskiEstimate { estimate: 0.0, std_error: 0.0 });
    }
    if absorbed == trials {
        return Ok(JarzynskiEstimate { estimate: mu, std_error: 0.0 });
    }
    let n = trials as f64;
    let frac = absorbed as f64 / n;
    let loss = -(-mu).exp_m1(); // 1 − e^{−μ}
    let mean = 1.0 - frac * loss;
    // e^{−w} takes the values 1 and e^{−μ}; its sample variance is frac(1−frac)·loss²
    let var = frac * (1.0 - frac) * loss * loss * n / (n - 1.0);
    Ok(JarzynskiEstimate {
        estimate: -(-frac * loss).ln_1p(),
        std_error: (var / n).sqrt() / mean,
    })
}
