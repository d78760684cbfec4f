//! Normalized temporal pulse modes and the overlap between a control mode and
//! a signal mode.
//!
//! Rates are in units of the true linewidth and times in units of its inverse.
//! Both arguments of an overlap are unit-norm, so the overlap is the
//! dimensionless `|∫ v*(t) ξ(t) dt|²` in `[0, 1]`; any physical amplitude of
//! the control field is carried by the detector efficiency instead.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{bracket, composite_gauss_legendre, cumulative_trapezoid};

/// Linewidth and detuning of an exponentially decaying cavity mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub gamma: f64,
    pub delta: f64,
}

impl ModeParams {
    pub fn new(gamma: f64, delta: f64) -> Result<Self> {
        let p = ModeParams { gamma, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || !self.delta.is_finite() {
            return Err(Error::domain(format!(
                "mode parameters must be finite, got gamma={}, delta={}",
                self.gamma, self.delta
            )));
        }
        if self.gamma <= 0.0 {
            return Err(Error::domain(format!(
                "linewidth must be positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.gamma, self.delta]
    }
}

/// A unit-norm complex temporal amplitude, zero before `t = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum TemporalMode {
    /// `√γ · exp(−γt/2 + iΔt)` for `t ≥ 0`.
    Exponential(ModeParams),
    /// Linearly interpolated samples; zero outside the sampled window.
    Tabulated {
        times: Vec<f64>,
        samples: Vec<Complex64>,
    },
}

/// Tolerance on the L² norm of a tabulated mode.
pub const NORM_TOLERANCE: f64 = 1e-9;

pub fn make_exponential_mode(p: ModeParams) -> Result<TemporalMode> {
    p.validate()?;
    Ok(TemporalMode::Exponential(p))
}

impl TemporalMode {
    /// Build a tabulated mode. The samples must already be unit-norm under
    /// trapezoid quadrature; see [`TemporalMode::tabulated_normalized`].
    pub fn tabulated(times: Vec<f64>, samples: Vec<Complex64>) -> Result<Self> {
        check_grid(&times, &samples)?;
        let norm = trapezoid_norm(&times, &samples);
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::domain(format!(
                "tabulated mode has L2 norm {norm}, expected 1"
            )));
        }
        Ok(TemporalMode::Tabulated { times, samples })
    }

    /// Build a tabulated mode and rescale it to unit norm.
    pub fn tabulated_normalized(times: Vec<f64>, samples: Vec<Complex64>) -> Result<Self> {
        check_grid(&times, &samples)?;
        let norm = trapezoid_norm(&times, &samples);
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::domain("tabulated mode has zero or non-finite norm"));
        }
        let scale = norm.sqrt().recip();
        let samples = samples.into_iter().map(|s| s * scale).collect();
        Ok(TemporalMode::Tabulated { times, samples })
    }

    pub fn amplitude(&self, t: f64) -> Complex64 {
        match self {
            TemporalMode::Exponential(p) => {
                if t < 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let mag = p.gamma.sqrt() * (-0.5 * p.gamma * t).exp();
                Complex64::from_polar(mag, p.delta * t)
            }
            TemporalMode::Tabulated { times, samples } => {
                if t < 0.0 || t < times[0] || t > times[times.len() - 1] {
                    return Complex64::new(0.0, 0.0);
                }
                let (i, frac) = bracket(times, t);
                samples[i] * (1.0 - frac) + samples[i + 1] * frac
            }
        }
    }

    /// L² norm (squared): analytic for exponential modes, trapezoid for tabulated ones.
    pub fn norm_squared(&self) -> f64 {
        match self {
            TemporalMode::Exponential(_) => 1.0,
            TemporalMode::Tabulated { times, samples } => trapezoid_norm(times, samples),
        }
    }

    /// Time after which the mode is negligible: one amplitude e-folding for
    /// exponential modes (`2/γ`), the end of the window for tabulated ones.
    fn decay_time(&self) -> f64 {
        match self {
            TemporalMode::Exponential(p) => 1.0 / p.gamma,
            TemporalMode::Tabulated { times, .. } => times[times.len() - 1],
        }
    }

    /// Sample the mode on a uniform grid of `n + 1` points over `[0, t_max]`.
    pub fn sample(&self, t_max: f64, n: usize) -> (Vec<f64>, Vec<Complex64>) {
        let h = t_max / n as f64;
        (0..=n)
            .map(|i| {
                let t = i as f64 * h;
                (t, self.amplitude(t))
            })
            .unzip()
    }
}

fn check_grid(times: &[f64], samples: &[Complex64]) -> Result<()> {
    if times.len() < 2 || times.len() != samples.len() {
        return Err(Error::domain(
            "tabulated mode needs at least two samples and one time per sample",
        ));
    }
    if times[0] < 0.0 {
        return Err(Error::domain("tabulated mode must start at t >= 0"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("time grid must be strictly increasing"));
    }
    if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
        return Err(Error::domain("tabulated samples must be finite"));
    }
    Ok(())
}

fn trapezoid_norm(times: &[f64], samples: &[Complex64]) -> f64 {
    let intensity: Vec<f64> = samples.iter().map(|s| s.norm_sqr()).collect();
    *cumulative_trapezoid(times, &intensity).last().unwrap()
}

/// Squared overlap `Γ = |∫ control* · signal dt|²`, a number in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Overlap(f64);

impl Overlap {
    /// Wrap a value, rejecting anything outside `[0, 1 + 1e-12]`. Values
    /// slightly above one are clamped.
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0 + 1e-12).contains(&value) {
            return Err(Error::domain(format!("overlap {value} outside [0, 1]")));
        }
        Ok(Overlap(value.min(1.0)))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Minimum number of quadrature points accepted by [`overlap_quadrature`].
pub const MIN_QUADRATURE_POINTS: usize = 1000;

/// Overlap by composite Gauss–Legendre quadrature of `∫ control* · signal`
/// over `[0, t_max]`.
///
/// `t_max` must cover at least ten decay times of the slower mode.
pub fn overlap_quadrature(
    control: &TemporalMode,
    signal: &TemporalMode,
    t_max: f64,
    n_steps: usize,
) -> Result<Overlap> {
    if n_steps < MIN_QUADRATURE_POINTS {
        return Err(Error::domain(format!(
            "n_steps must be >= {MIN_QUADRATURE_POINTS}, got {n_steps}"
        )));
    }
    let horizon = match (control, signal) {
        (TemporalMode::Tabulated { .. }, _) | (_, TemporalMode::Tabulated { .. }) => {
            control.decay_time().max(signal.decay_time())
        }
        _ => 10.0 * control.decay_time().max(signal.decay_time()),
    };
    if !t_max.is_finite() || t_max < horizon {
        return Err(Error::domain(format!(
            "t_max = {t_max} does not cover the modes (need >= {horizon})"
        )));
    }
    let inner = composite_gauss_legendre(
        |t| control.amplitude(t).conj() * signal.amplitude(t),
        0.0,
        t_max,
        n_steps,
    );
    Ok(Overlap(inner.norm_sqr().clamp(0.0, 1.0)))
}

/// Default quadrature horizon: 40 decay times of the slower exponential mode.
pub fn default_horizon(control: ModeParams, signal: ModeParams) -> f64 {
    40.0 / control.gamma.min(signal.gamma)
}

fn denominator(control: ModeParams, signal: ModeParams) -> f64 {
    let half_sum = 0.5 * (control.gamma + signal.gamma);
    let detuning = control.delta - signal.delta;
    half_sum * half_sum + detuning * detuning
}

/// Closed form of the overlap for two exponential modes:
/// `γγ_T / (((γ+γ_T)/2)² + (Δ−Δ_T)²)`.
pub fn overlap_exponential_closed_form(control: ModeParams, signal: ModeParams) -> Result<Overlap> {
    control.validate()?;
    signal.validate()?;
    let g = control.gamma * signal.gamma / denominator(control, signal);
    Ok(Overlap(g.min(1.0)))
}

/// Exact partial derivatives `(∂Γ/∂γ, ∂Γ/∂Δ)` of the closed form with
/// respect to the control parameters.
pub fn overlap_gradient_exponential(control: ModeParams, signal: ModeParams) -> Result<[f64; 2]> {
    control.validate()?;
    signal.validate()?;
    let d = denominator(control, signal);
    let g = control.gamma * signal.gamma / d;
    let d_gamma = g * (1.0 / control.gamma - (control.gamma + signal.gamma) / (2.0 * d));
    let d_delta = -g * 2.0 * (control.delta - signal.delta) / d;
    Ok([d_gamma, d_delta])
}
