//! Single-photon detector: probability that the inverted Raman atom ends in
//! the ground state (a click) when probed by a single-photon Fock pulse or a
//! weak coherent pulse with mean photon number one.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::Overlap;
use crate::quadrature::simpson;
use crate::source::BathParams;

/// Detector hardware. `chi` is the dimensionless absorption efficiency
/// `4ηA²/κ` used by the closed forms; `eta` and `kappa` only enter the
/// time-dependent solutions.
///
/// The sensor is population inverted; `bath.mu()` is its Boltzmann factor
/// `μ_σ`, so the vacuum ground-state probability is `1/(1+e^{μ_σ})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub eta: f64,
    pub kappa: f64,
    pub chi: f64,
    pub bath: BathParams,
}

impl DetectorParams {
    pub fn new(eta: f64, kappa: f64, chi: f64, bath: BathParams) -> Result<Self> {
        let d = DetectorParams { eta, kappa, chi, bath };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::domain(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.chi > 0.0 && self.chi <= 1.0) {
            return Err(Error::domain(format!("chi must lie in (0, 1], got {}", self.chi)));
        }
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::domain(format!("kappa must be positive, got {}", self.kappa)));
        }
        Ok(())
    }

    /// Control amplitude `A` with `4ηA²/κ = χ`, for building `V = A·v`.
    pub fn control_amplitude(&self) -> f64 {
        (self.chi * self.kappa / (4.0 * self.eta)).sqrt()
    }

    pub fn with_bath(self, bath: BathParams) -> Self {
        DetectorParams { bath, ..self }
    }
}

/// Probe statistics: single-photon Fock pulse or weak coherent pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionModel {
    Quantum,
    Classical,
}

impl DetectionModel {
    pub const ALL: [DetectionModel; 2] = [DetectionModel::Quantum, DetectionModel::Classical];

    pub fn name(self) -> &'static str {
        match self {
            DetectionModel::Quantum => "quantum",
            DetectionModel::Classical => "classical",
        }
    }
}

impl std::str::FromStr for DetectionModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quantum" => Ok(DetectionModel::Quantum),
            "classical" => Ok(DetectionModel::Classical),
            other => Err(Error::domain(format!(
                "unknown agent kind `{other}` (expected quantum or classical)"
            ))),
        }
    }
}

/// Ground-state probability under vacuum input, `n̄/(1+2n̄) = 1/(1+e^{μ_σ})`.
pub fn thermal_floor(bath: BathParams) -> f64 {
    bath.floor()
}

/// `floor + χΓ tanh(μ_σ/2)`.
pub fn pg_quantum(gamma_overlap: Overlap, det: &DetectorParams) -> Result<f64> {
    let p = thermal_floor(det.bath) + det.chi * gamma_overlap.value() * det.bath.polarization();
    if p > 1.0 + 1e-12 {
        return Err(Error::domain(format!(
            "ground-state probability {p} exceeds 1; chi = {} is not admissible",
            det.chi
        )));
    }
    Ok(p.min(1.0))
}

/// `floor + χΓ e^{−χΓ} tanh(μ_σ/2)`.
pub fn pg_classical(gamma_overlap: Overlap, det: &DetectorParams) -> Result<f64> {
    let x = det.chi * gamma_overlap.value();
    Ok(thermal_floor(det.bath) + x * (-x).exp() * det.bath.polarization())
}

pub fn pg(model: DetectionModel, gamma_overlap: Overlap, det: &DetectorParams) -> Result<f64> {
    match model {
        DetectionModel::Quantum => pg_quantum(gamma_overlap, det),
        DetectionModel::Classical => pg_classical(gamma_overlap, det),
    }
}

/// Probability of the error (excited-state, no-click) outcome, `1 − P_g`.
pub fn error_prob(model: DetectionModel, gamma_overlap: Overlap, det: &DetectorParams) -> Result<f64> {
    Ok(1.0 - pg(model, gamma_overlap, det)?)
}

/// `∂P_e/∂Γ` of the closed forms.
pub fn error_prob_slope(model: DetectionModel, gamma_overlap: Overlap, det: &DetectorParams) -> f64 {
    let t = det.bath.polarization();
    match model {
        DetectionModel::Quantum => -det.chi * t,
        DetectionModel::Classical => {
            let x = det.chi * gamma_overlap.value();
            -det.chi * (1.0 - x) * (-x).exp() * t
        }
    }
}

/// Ground-state probability of the single-photon detector at time `t` from
/// the general (non-instantaneous) solution
///
/// `P_g = 1/(2n̄+1) · (n̄ + 4η/κ · |∫_0^t e^{τ(t')−τ(t)} V(t') ξ*(t') dt'|²)`,
/// with `τ(t) = 2(2n̄+1)/κ ∫_0^t |V|²`. `control` is the full control
/// amplitude `V = A·v`; `n_steps` intervals of composite Simpson are used
/// (rounded up to an even count).
pub fn pg_time_dependent_quadrature<C, S>(
    control: C,
    signal: S,
    det: &DetectorParams,
    t: f64,
    n_steps: usize,
) -> Result<f64>
where
    C: Fn(f64) -> Complex64,
    S: Fn(f64) -> Complex64,
{
    det.validate()?;
    if t < 0.0 || !t.is_finite() {
        return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
    }
    if n_steps < 2 {
        return Err(Error::domain("need at least two quadrature intervals"));
    }
    let nbar = det.bath.nbar();
    if !nbar.is_finite() {
        return Err(Error::domain("infinite temperature (mu = 0) is not supported here"));
    }
    if t == 0.0 {
        return Ok(thermal_floor(det.bath));
    }
    let n = n_steps + n_steps % 2;
    let h = t / n as f64;
    let rate = 2.0 * (2.0 * nbar + 1.0) / det.kappa;

    let v: Vec<Complex64> = (0..=n).map(|i| control(i as f64 * h)).collect();
    let xi: Vec<Complex64> = (0..=n).map(|i| signal(i as f64 * h)).collect();
    // running τ by trapezoid on the same grid
    let mut tau = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    tau.push(0.0);
    for i in 1..=n {
        acc += 0.5 * h * rate * (v[i].norm_sqr() + v[i - 1].norm_sqr());
        tau.push(acc);
    }
    let tau_end = acc;
    let integrand: Vec<Complex64> = (0..=n)
        .map(|i| (tau[i] - tau_end).exp() * v[i] * xi[i].conj())
        .collect();
    let g = simpson(&integrand, h);
    let p = det.bath.polarization() * (nbar + 4.0 * det.eta / det.kappa * g.norm_sqr());
    Ok(p.clamp(0.0, 1.0))
}
