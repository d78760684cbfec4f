//! Raman single-photon source (the actuator) after adiabatic elimination of
//! the cavity: ground-state population, polarization and output flux as
//! functions of the control envelope and the bath temperature.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{bracket, cumulative_trapezoid, simpson};

/// Bath temperature expressed through the Boltzmann factor `μ = ħω/k_BT`.
///
/// `μ = ∞` (zero temperature) is stored as `f64::INFINITY` and every formula
/// below evaluates it through `e^{-μ}` or `tanh(μ/2)` so the limit is exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathParams {
    mu: f64,
}

impl BathParams {
    pub fn new(mu: f64) -> Result<Self> {
        if mu.is_nan() || mu < 0.0 {
            return Err(Error::domain(format!(
                "Boltzmann factor must be >= 0 (or inf), got {mu}"
            )));
        }
        Ok(BathParams { mu })
    }

    pub fn zero_temperature() -> Self {
        BathParams { mu: f64::INFINITY }
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.mu.is_infinite()
    }

    /// Mean thermal photon number `1/(e^μ − 1)`; zero at `μ = ∞`, infinite at `μ = 0`.
    pub fn nbar(&self) -> f64 {
        if self.is_zero_temperature() {
            0.0
        } else {
            1.0 / self.mu.exp_m1()
        }
    }

    /// `tanh(μ/2) = 1/(2n̄+1)`.
    pub fn polarization(&self) -> f64 {
        if self.is_zero_temperature() {
            1.0
        } else {
            (0.5 * self.mu).tanh()
        }
    }

    /// `n̄/(2n̄+1) = 1/(1+e^μ)`.
    pub fn floor(&self) -> f64 {
        if self.is_zero_temperature() {
            0.0
        } else {
            1.0 / (1.0 + self.mu.exp())
        }
    }

    fn finite_nbar(&self) -> Result<f64> {
        let n = self.nbar();
        if n.is_finite() {
            Ok(n)
        } else {
            Err(Error::domain("infinite temperature (mu = 0) is not supported here"))
        }
    }
}

/// Complex control amplitude `E(t)` sampled on a time grid starting at zero,
/// with its intensity `I = |E|²` and the running integral of `I`.
#[derive(Debug, Clone)]
pub struct ControlEnvelope {
    times: Vec<f64>,
    amplitude: Vec<Complex64>,
    intensity: Vec<f64>,
    integrated: Vec<f64>,
}

impl ControlEnvelope {
    pub fn sampled(times: Vec<f64>, amplitude: Vec<Complex64>) -> Result<Self> {
        if times.len() < 2 || times.len() != amplitude.len() {
            return Err(Error::domain("envelope needs >= 2 samples with matching times"));
        }
        if times[0] != 0.0 {
            return Err(Error::domain("envelope grid must start at t = 0"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("envelope grid must be strictly increasing"));
        }
        let intensity: Vec<f64> = amplitude.iter().map(|e| e.norm_sqr()).collect();
        let integrated = cumulative_trapezoid(&times, &intensity);
        Ok(ControlEnvelope {
            times,
            amplitude,
            intensity,
            integrated,
        })
    }

    /// Sample `f` on `n + 1` uniform points over `[0, t_max]`.
    pub fn from_fn<F: Fn(f64) -> Complex64>(f: F, t_max: f64, n: usize) -> Result<Self> {
        if !(t_max > 0.0) || n == 0 {
            return Err(Error::domain("envelope needs t_max > 0 and n > 0"));
        }
        let h = t_max / n as f64;
        let (t, e) = (0..=n)
            .map(|i| {
                let t = i as f64 * h;
                (t, f(t))
            })
            .unzip();
        Self::sampled(t, e)
    }

    pub fn t_max(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::domain(format!("time must be >= 0, got {t}")));
        }
        if t > self.t_max() {
            return Err(Error::domain(format!(
                "time {t} beyond the envelope grid (t_max = {})",
                self.t_max()
            )));
        }
        Ok(())
    }

    pub fn amplitude(&self, t: f64) -> Complex64 {
        if t < 0.0 || t > self.t_max() {
            return Complex64::new(0.0, 0.0);
        }
        let (i, f) = bracket(&self.times, t);
        self.amplitude[i] * (1.0 - f) + self.amplitude[i + 1] * f
    }

    pub fn intensity(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.t_max() {
            return 0.0;
        }
        let (i, f) = bracket(&self.times, t);
        self.intensity[i] * (1.0 - f) + self.intensity[i + 1] * f
    }

    /// `∫_0^t I(t') dt'` (trapezoid on the grid, linear inside an interval).
    pub fn integrated_intensity(&self, t: f64) -> f64 {
        let (i, f) = bracket(&self.times, t);
        let dt = self.times[i + 1] - self.times[i];
        let part = f * dt * (self.intensity[i] + 0.5 * f * (self.intensity[i + 1] - self.intensity[i]));
        self.integrated[i] + part
    }
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return Err(Error::domain(format!("kappa must be positive, got {kappa}")));
    }
    Ok(())
}

/// Dimensionless emission "time" `τ(t) = 4(2n̄+1)/κ · ∫_0^t I dt'`.
pub fn tau_source(envelope: &ControlEnvelope, bath: BathParams, kappa: f64, t: f64) -> Result<f64> {
    check_kappa(kappa)?;
    envelope.check_time(t)?;
    let nbar = bath.finite_nbar()?;
    Ok(4.0 * (2.0 * nbar + 1.0) / kappa * envelope.integrated_intensity(t))
}

/// Ground-state population of the source atom, starting from thermal
/// equilibrium `P_g(0) = 1/(1+e^{−μ})` and relaxing to `n̄/(2n̄+1)`.
pub fn ground_population_source(
    envelope: &ControlEnvelope,
    bath: BathParams,
    kappa: f64,
    t: f64,
) -> Result<f64> {
    let tau = tau_source(envelope, bath, kappa, t)?;
    Ok(ground_population_from_tau(bath, tau))
}

/// `(e^{−τ}(1+n̄) + n̄)/(2n̄+1) − e^{−τ}/(1+e^μ)`, written as
/// `floor + e^{−τ} tanh(μ/2)`.
pub fn ground_population_from_tau(bath: BathParams, tau: f64) -> f64 {
    (bath.floor() + (-tau).exp() * bath.polarization()).clamp(0.0, 1.0)
}

/// `⟨σ_z⟩ = 1 − 2 P_g`.
pub fn polarization(envelope: &ControlEnvelope, bath: BathParams, kappa: f64, t: f64) -> Result<f64> {
    Ok(1.0 - 2.0 * ground_population_source(envelope, bath, kappa, t)?)
}

/// Mean photon flux in the output mode, `n̄ + 4I(t)/κ · ⟨σ_z(t)⟩`.
pub fn output_flux(envelope: &ControlEnvelope, bath: BathParams, kappa: f64, t: f64) -> Result<f64> {
    let sz = polarization(envelope, bath, kappa, t)?;
    Ok(bath.finite_nbar()? + 4.0 * envelope.intensity(t) / kappa * sz)
}

/// Mean output field: the cavity response convolved with `E(t')⟨σ₊(t')⟩`,
/// `−i√κ ∫_0^t e^{κ(t'−t)/2} E(t') ⟨σ₊(t')⟩ dt'`.
pub fn mean_output_field<S>(envelope: &ControlEnvelope, sigma_plus: S, kappa: f64, t: f64) -> Result<Complex64>
where
    S: Fn(f64) -> Complex64,
{
    check_kappa(kappa)?;
    envelope.check_time(t)?;
    if t == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    // resolve the kernel width 2/κ and the envelope grid
    let by_kernel = (20.0 * kappa * t).ceil() as usize;
    let by_grid = 4 * envelope.times.len();
    let mut n = by_kernel.max(by_grid).clamp(2000, 4_000_000);
    if n % 2 == 1 {
        n += 1;
    }
    let h = t / n as f64;
    let samples: Vec<Complex64> = (0..=n)
        .map(|i| {
            let s = i as f64 * h;
            (0.5 * kappa * (s - t)).exp() * envelope.amplitude(s) * sigma_plus(s)
        })
        .collect();
    Ok(Complex64::new(0.0, -kappa.sqrt()) * simpson(&samples, h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn constant(value: f64, t_max: f64) -> ControlEnvelope {
        ControlEnvelope::from_fn(|_| Complex64::new(value.sqrt(), 0.0), t_max, 1000).unwrap()
    }

    #[test]
    fn bath_limits() {
        let b = BathParams::new(2.0).unwrap();
        assert_relative_eq!(b.nbar(), 1.0 / (2f64.exp() - 1.0), epsilon = 1e-15);
        assert_relative_eq!(b.nbar(), 0.156_518, epsilon = 1e-6);
        assert_eq!(BathParams::zero_temperature().nbar(), 0.0);
        assert_eq!(BathParams::new(f64::INFINITY).unwrap().floor(), 0.0);
        assert!(BathParams::new(-1.0).is_err());
        assert!(BathParams::new(f64::NAN).is_err());
        // tanh(μ/2) = 1/(2n̄+1)
        assert_relative_eq!(b.polarization(), 1.0 / (2.0 * b.nbar() + 1.0), epsilon = 1e-14);
    }

    #[test]
    fn tau_examples() {
        let kappa = 100.0;
        let zero = constant(0.0, 5.0);
        let b0 = BathParams::zero_temperature();
        assert_eq!(tau_source(&zero, b0, kappa, 3.0).unwrap(), 0.0);
        let c = constant(kappa / 4.0, 2.0);
        assert_relative_eq!(tau_source(&c, b0, kappa, 1.0).unwrap(), 1.0, epsilon = 1e-12);

        let gamma = 1.0;
        let mode = ControlEnvelope::from_fn(
            |t| Complex64::new((gamma * (-gamma * t).exp()).sqrt(), 0.0),
            60.0,
            600_000,
        )
        .unwrap();
        assert_relative_eq!(tau_source(&mode, b0, kappa, 60.0).unwrap(), 4.0 / kappa, max_relative = 1e-8);
    }

    #[test]
    fn tau_domain_errors() {
        let c = constant(1.0, 2.0);
        let b = BathParams::zero_temperature();
        assert!(tau_source(&c, b, 1.0, -0.5).is_err());
        assert!(tau_source(&c, b, 0.0, 1.0).is_err());
        assert!(tau_source(&c, b, -1.0, 1.0).is_err());
    }

    #[test]
    fn ground_population_examples() {
        let b = BathParams::new(2.0).unwrap();
        let c = constant(1.0, 2.0);
        let p0 = ground_population_source(&c, b, 1.0, 0.0).unwrap();
        assert_relative_eq!(p0, 1.0 / (1.0 + (-2f64).exp()), epsilon = 1e-15);
        assert_relative_eq!(p0, 0.880_797, epsilon = 1e-6);

        assert_eq!(ground_population_from_tau(BathParams::zero_temperature(), 800.0), 0.0);
        let b1 = BathParams::new(2f64.ln()).unwrap(); // n̄ = 1
        assert_relative_eq!(b1.nbar(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(ground_population_from_tau(b1, 800.0), 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn polarization_examples() {
        let c = constant(1.0, 50.0);
        let kappa = 1.0;
        // τ = 4∫I/κ · (2n̄+1) ≥ 4·50 at T = 0
        let p = polarization(&c, BathParams::zero_temperature(), kappa, 50.0).unwrap();
        assert_eq!(p, 1.0);
        let b = BathParams::new(2.0).unwrap();
        assert_relative_eq!(polarization(&c, b, kappa, 50.0).unwrap(), 1f64.tanh(), epsilon = 1e-10);
        assert_relative_eq!(polarization(&c, b, kappa, 50.0).unwrap(), 0.761_594, epsilon = 1e-6);
        assert_relative_eq!(polarization(&c, b, kappa, 0.0).unwrap(), -0.761_594, epsilon = 1e-6);
    }

    #[test]
    fn long_time_polarization_once_tau_exceeds_forty() {
        for mu in [0.5, 1.0, 2.0, 5.0] {
            let b = BathParams::new(mu).unwrap();
            let kappa = 4.0;
            // I = κ/4: τ(t) = (2n̄+1) t ≥ 40 by t = 40
            let c = constant(kappa / 4.0, 40.0);
            let tau = tau_source(&c, b, kappa, 40.0).unwrap();
            assert!(tau >= 40.0);
            let sz = polarization(&c, b, kappa, 40.0).unwrap();
            assert!((sz - (0.5 * mu).tanh()).abs() < 1e-10);
        }
    }

    #[test]
    fn output_flux_examples() {
        let kappa = 8.0;
        let zero = constant(0.0, 5.0);
        let b = BathParams::new(2.0).unwrap();
        assert_relative_eq!(output_flux(&zero, b, kappa, 2.0).unwrap(), b.nbar(), epsilon = 1e-15);

        let c = constant(kappa / 4.0, 60.0);
        let flux = output_flux(&c, BathParams::zero_temperature(), kappa, 60.0).unwrap();
        assert_relative_eq!(flux, 1.0, epsilon = 1e-12);
        let flux = output_flux(&c, b, kappa, 60.0).unwrap();
        assert_relative_eq!(flux, 0.918_112, epsilon = 1e-6);
    }

    #[test]
    fn mean_output_field_examples() {
        let kappa = 10.0;
        let c = ControlEnvelope::from_fn(|_| Complex64::new(0.3, 0.2), 3.0, 100).unwrap();
        let zero = |_| Complex64::new(0.0, 0.0);
        assert_eq!(mean_output_field(&c, zero, kappa, 2.0).unwrap(), Complex64::new(0.0, 0.0));
        let off = constant(0.0, 3.0);
        let s0 = Complex64::new(0.1, -0.4);
        assert_eq!(mean_output_field(&off, |_| s0, kappa, 2.0).unwrap(), Complex64::new(0.0, 0.0));

        let e0 = Complex64::new(0.3, 0.2);
        let t = 2.0;
        let expected = Complex64::new(0.0, -kappa.sqrt()) * e0 * s0 * (2.0 / kappa) * (1.0 - (-kappa * t / 2.0).exp());
        let got = mean_output_field(&c, |_| s0, kappa, t).unwrap();
        assert!((got - expected).norm() < 1e-10, "{got} vs {expected}");
        assert!(mean_output_field(&c, |_| s0, kappa, -1.0).is_err());
    }

    #[test]
    fn ground_population_solves_rate_equation() {
        let kappa = 4.0;
        let env = ControlEnvelope::from_fn(
            |t| Complex64::new((kappa / 4.0 * (-0.3 * t).exp()).sqrt(), 0.0),
            10.0,
            100_000,
        )
        .unwrap();
        for mu in [0.7, 2.0, f64::INFINITY] {
            let b = BathParams::new(mu).unwrap();
            let nbar = b.nbar();
            let h = 1e-4;
            for k in 1..99 {
                let t = k as f64 * 0.1;
                let dp = (ground_population_source(&env, b, kappa, t + h).unwrap()
                    - ground_population_source(&env, b, kappa, t - h).unwrap())
                    / (2.0 * h);
                let p = ground_population_source(&env, b, kappa, t).unwrap();
                let i = env.intensity(t);
                let rhs = -(4.0 * i / kappa) * (2.0 * nbar + 1.0) * p + 4.0 * i * nbar / kappa;
                assert!((dp - rhs).abs() < 1e-7, "mu={mu} t={t} dp={dp} rhs={rhs}");
            }
        }
    }

    proptest! {
        #[test]
        fn ground_population_bounded_and_decreasing(
            mu in 0.05f64..20.0, scale in 0.0f64..5.0, rate in 0.01f64..3.0,
        ) {
            let b = BathParams::new(mu).unwrap();
            let env = ControlEnvelope::from_fn(
                |t| Complex64::new((scale * (-rate * t).exp()).sqrt(), 0.0), 10.0, 500).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..=50 {
                let p = ground_population_source(&env, b, 1.0, 0.2 * k as f64).unwrap();
                prop_assert!((0.0..=1.0).contains(&p));
                prop_assert!(p <= prev + 1e-15);
                prev = p;
            }
        }
    }
}
