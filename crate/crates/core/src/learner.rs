//! The agent's software: click sampling, gradient estimation and bounded
//! gradient descent on the detector error probability.
//!
//! Optimization runs in normalized coordinates `u ∈ [0,1]²`, one axis per
//! mode parameter, so a single learning rate serves both the linewidth and the
//! detuning.

use rand::distributions::{Bernoulli, Distribution};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detector::{error_prob, error_prob_slope, DetectionModel, DetectorParams};
use crate::error::{Error, Result};
use crate::modes::{overlap_exponential_closed_form, overlap_gradient_exponential, ModeParams};
use crate::rng::{context_tag, RngStreamKey};
use crate::source::BathParams;
use crate::thermo::{detection_thermo, ScaledThermo};

/// Closed interval per mode parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub gamma: (f64, f64),
    pub delta: (f64, f64),
}

impl Bounds {
    pub fn new(gamma: (f64, f64), delta: (f64, f64)) -> Result<Self> {
        let b = Bounds { gamma, delta };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("gamma", self.gamma), ("delta", self.delta)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::domain(format!("{name} bounds need lo < hi, got ({lo}, {hi})")));
            }
        }
        if self.gamma.0 <= 0.0 {
            return Err(Error::domain(format!("gamma bounds must be positive, got lower bound {}", self.gamma.0)));
        }
        Ok(())
    }

    fn axes(&self) -> [(f64, f64); 2] {
        [self.gamma, self.delta]
    }

    pub fn widths(&self) -> [f64; 2] {
        [self.gamma.1 - self.gamma.0, self.delta.1 - self.delta.0]
    }

    pub fn contains(&self, f: ModeParams) -> bool {
        let x = f.as_array();
        self.axes().iter().zip(x).all(|(&(lo, hi), v)| lo <= v && v <= hi)
    }
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { gamma: (0.1, 5.0), delta: (-5.0, 5.0) }
    }
}

/// How the agent obtains `∇P_e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientBackend {
    /// Central differences of sampled error rates.
    Empirical,
    /// Chain rule through the closed forms.
    Analytic,
}

impl std::str::FromStr for GradientBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empirical" => Ok(GradientBackend::Empirical),
            "analytic" => Ok(GradientBackend::Analytic),
            other => Err(Error::domain(format!("unknown gradient backend `{other}` (expected empirical or analytic)"))),
        }
    }
}

/// Direction of the parameter update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateSign {
    /// `u ← u − L∇P_e`.
    #[default]
    Descent,
    /// `u ← u + L∇P_e`, the update exactly as printed.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub kind: DetectionModel,
    pub f0: ModeParams,
    pub bounds: Bounds,
    pub learning_rate: f64,
    pub shots: usize,
    pub fd_step: f64,
    pub max_iterations: usize,
    pub gradient_backend: GradientBackend,
    pub update_sign: UpdateSign,
    /// Acquisition time per shot; when set, `L < 1/(N·s)` is enforced.
    pub seconds_per_shot: Option<f64>,
}

impl AgentConfig {
    pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
    pub const DEFAULT_SHOTS: usize = 1000;
    pub const DEFAULT_FD_STEP: f64 = 0.01;
    pub const DEFAULT_ITERATIONS: usize = 600;

    /// The default experiment: start at `(γ, Δ) = (3, −1)` inside
    /// `γ ∈ [0.1, 5]`, `Δ ∈ [−5, 5]`.
    pub fn default_experiment(kind: DetectionModel) -> Self {
        AgentConfig {
            kind,
            f0: ModeParams { gamma: 3.0, delta: -1.0 },
            bounds: Bounds::default(),
            learning_rate: Self::DEFAULT_LEARNING_RATE,
            shots: Self::DEFAULT_SHOTS,
            fd_step: Self::DEFAULT_FD_STEP,
            max_iterations: Self::DEFAULT_ITERATIONS,
            gradient_backend: GradientBackend::Analytic,
            update_sign: UpdateSign::Descent,
            seconds_per_shot: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        self.f0.validate()?;
        if !self.bounds.contains(self.f0) {
            return Err(Error::domain(format!(
                "initial parameters ({}, {}) lie outside the bounds",
                self.f0.gamma, self.f0.delta
            )));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::domain(format!("learning rate must be finite and nonnegative, got {}", self.learning_rate)));
        }
        if self.shots == 0 {
            return Err(Error::domain("shots must be at least 1"));
        }
        if !(self.fd_step > 0.0 && self.fd_step < 0.5) {
            return Err(Error::domain(format!("fd_step must lie in (0, 0.5), got {}", self.fd_step)));
        }
        if let Some(s) = self.seconds_per_shot {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::domain(format!("seconds_per_shot must be positive, got {s}")));
            }
            let limit = 1.0 / (self.shots as f64 * s);
            if self.learning_rate >= limit {
                return Err(Error::domain(format!(
                    "learning rate {} must stay below 1/(N·s) = {limit}",
                    self.learning_rate
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub f_true: ModeParams,
    pub detector: DetectorParams,
}

impl WorldConfig {
    /// Truth `(γ_T, Δ_T) = (1, 2)` with an ideal detector (`χ = η = 1`).
    pub fn default_experiment(bath: BathParams) -> Self {
        WorldConfig {
            f_true: ModeParams { gamma: 1.0, delta: 2.0 },
            detector: DetectorParams { eta: 1.0, kappa: 1000.0, chi: 1.0, bath },
        }
    }

    pub fn validate_against(&self, bounds: &Bounds) -> Result<()> {
        self.f_true.validate()?;
        self.detector.validate()?;
        if !bounds.contains(self.f_true) {
            return Err(Error::domain(format!(
                "true parameters ({}, {}) lie outside the agent's bounds",
                self.f_true.gamma, self.f_true.delta
            )));
        }
        Ok(())
    }
}

/// One row of a learning trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearningRecord {
    pub iteration: usize,
    pub f: ModeParams,
    pub f_normalized: [f64; 2],
    pub x_bar: f64,
    pub p_e_model: f64,
    pub gamma_overlap: f64,
    pub dist_norm: f64,
    pub thermo: ScaledThermo,
}

/// Mean of `n` Bernoulli(`p_e`) error bits.
pub fn sample_error_rate<R: Rng>(p_e: f64, n: usize, rng: &mut R) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("need at least one shot"));
    }
    let dist = Bernoulli::new(p_e).map_err(|_| Error::domain(format!("error probability must lie in [0, 1], got {p_e}")))?;
    let errors = dist.sample_iter(rng).take(n).filter(|&x| x).count();
    Ok(errors as f64 / n as f64)
}

pub fn normalize(f: ModeParams, bounds: &Bounds) -> Result<[f64; 2]> {
    if !bounds.contains(f) {
        return Err(Error::domain(format!("({}, {}) lies outside the bounds", f.gamma, f.delta)));
    }
    let x = f.as_array();
    let ax = bounds.axes();
    Ok([0, 1].map(|k| (x[k] - ax[k].0) / (ax[k].1 - ax[k].0)))
}

pub fn denormalize(u: [f64; 2], bounds: &Bounds) -> Result<ModeParams> {
    if u.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::domain(format!("normalized point {u:?} lies outside the unit square")));
    }
    let ax = bounds.axes();
    let x = [0, 1].map(|k| ax[k].0 + u[k] * (ax[k].1 - ax[k].0));
    ModeParams::new(x[0], x[1])
}

/// `‖u − u_T‖₂/√2`, in `[0, 1]`.
pub fn normalized_distance(f: ModeParams, f_true: ModeParams, bounds: &Bounds) -> Result<f64> {
    let a = normalize(f, bounds)?;
    let b = normalize(f_true, bounds)?;
    Ok(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() / std::f64::consts::SQRT_2)
}

/// Model error probability and overlap at `f`.
pub fn model_error(f: ModeParams, kind: DetectionModel, world: &WorldConfig) -> Result<(f64, f64)> {
    let overlap = overlap_exponential_closed_form(f, world.f_true)?;
    Ok((error_prob(kind, overlap, &world.detector)?, overlap.value()))
}

/// Probe index of the sampled error rate at the current point; the four
/// gradient probes use indices 0..4.
pub const CENTER_PROBE: u64 = 4;

/// `∇_u P_e` at `f`. `key` selects the iteration's substreams; the
/// empirical backend gives probe `2k` to `u + δe_k` and `2k+1` to `u − δe_k`.
pub fn estimate_gradient(f: ModeParams, agent: &AgentConfig, world: &WorldConfig, key: RngStreamKey) -> Result<[f64; 2]> {
    match agent.gradient_backend {
        GradientBackend::Analytic => {
            let overlap = overlap_exponential_closed_form(f, world.f_true)?;
            let slope = error_prob_slope(agent.kind, overlap, &world.detector);
            let d = overlap_gradient_exponential(f, world.f_true)?;
            let w = agent.bounds.widths();
            Ok([slope * w[0] * d[0], slope * w[1] * d[1]])
        }
        GradientBackend::Empirical => {
            let u = normalize(f, &agent.bounds)?;
            let mut grad = [0.0; 2];
            for k in 0..2 {
                let mut rates = [0.0; 2];
                let mut coords = [0.0; 2];
                for (side, sign) in [1.0, -1.0].into_iter().enumerate() {
                    let mut p = u;
                    p[k] = (u[k] + sign * agent.fd_step).clamp(0.0, 1.0);
                    coords[side] = p[k];
                    let (p_e, _) = model_error(denormalize(p, &agent.bounds)?, agent.kind, world)?;
                    let mut rng = key.with_probe((2 * k + side) as u64).stream();
                    rates[side] = sample_error_rate(p_e, agent.shots, &mut rng)?;
                }
                grad[k] = (rates[0] - rates[1]) / (coords[0] - coords[1]);
            }
            Ok(grad)
        }
    }
}

/// `clamp(u − L·g, [0,1]²)`.
pub fn gd_step(u: [f64; 2], gradient: [f64; 2], learning_rate: f64) -> [f64; 2] {
    [0, 1].map(|k| (u[k] - learning_rate * gradient[k]).clamp(0.0, 1.0))
}

fn stream_context(agent: &AgentConfig, world: &WorldConfig) -> u64 {
    context_tag(&format!("learn/{}/{}", agent.kind.name(), world.detector.bath.mu()))
}

/// Run the learning loop. Row `i` describes the parameters after `i`
/// updates, so `max_iterations + 1` rows are returned.
pub fn run_learning(agent: &AgentConfig, world: &WorldConfig, seed: u64) -> Result<Vec<LearningRecord>> {
    agent.validate()?;
    world.validate_against(&agent.bounds)?;
    let base = RngStreamKey::new(seed, stream_context(agent, world));
    let u_true = normalize(world.f_true, &agent.bounds)?;
    let mut u = normalize(agent.f0, &agent.bounds)?;
    let mut records = Vec::with_capacity(agent.max_iterations + 1);
    for i in 0..=agent.max_iterations {
        let f = denormalize(u, &agent.bounds)?;
        let overlap = overlap_exponential_closed_form(f, world.f_true)?;
        let p_e = error_prob(agent.kind, overlap, &world.detector)?;
        let key = base.at(i as u64, 0);
        let x_bar = sample_error_rate(p_e, agent.shots, &mut key.with_probe(CENTER_PROBE).stream())?;
        let dist = ((u[0] - u_true[0]).powi(2) + (u[1] - u_true[1]).powi(2)).sqrt() / std::f64::consts::SQRT_2;
        records.push(LearningRecord {
            iteration: i,
            f,
            f_normalized: u,
            x_bar,
            p_e_model: p_e,
            gamma_overlap: overlap.value(),
            dist_norm: dist,
            thermo: detection_thermo(agent.kind, overlap, &world.detector)?,
        });
        if i == agent.max_iterations {
            break;
        }
        let g = estimate_gradient(f, agent, world, key)?;
        let lr = match agent.update_sign {
            UpdateSign::Descent => agent.learning_rate,
            UpdateSign::Printed => -agent.learning_rate,
        };
        u = gd_step(u, g, lr);
    }
    Ok(records)
}

/// First iteration whose `dist_norm` is below `threshold`.
pub fn iterations_to_reach(records: &[LearningRecord], threshold: f64) -> Option<usize> {
    records.iter().find(|r| r.dist_norm < threshold).map(|r| r.iteration)
}
