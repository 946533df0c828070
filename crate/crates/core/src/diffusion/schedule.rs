//! Noise schedules: cosine β/ᾱ for the DDPM processes on k and A′, and an
//! exponential σ for the wrapped-normal process on F′.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Schedule hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub steps: usize,
    pub cosine_s: f64,
    pub sigma_begin: f64,
    pub sigma_end: f64,
    pub corrector_gamma: f64,
    pub n_images: usize,
    pub lambda_samples: usize,
    pub lambda_seed: u64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            cosine_s: 0.008,
            sigma_begin: 0.005,
            sigma_end: 0.5,
            corrector_gamma: 5e-6,
            n_images: 3,
            lambda_samples: 10_000,
            lambda_seed: 0x5eed,
        }
    }
}

impl ScheduleConfig {
    pub fn with_steps(steps: usize) -> Self {
        Self { steps, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return domain("schedule needs at least one step");
        }
        if !(self.cosine_s > 0.0) {
            return domain("cosine offset s must be positive");
        }
        if !(self.sigma_begin > 0.0 && self.sigma_begin < self.sigma_end) {
            return domain("need 0 < sigma_begin < sigma_end");
        }
        if !(self.corrector_gamma >= 0.0) {
            return domain("corrector gamma must be nonnegative");
        }
        if self.lambda_samples == 0 {
            return domain("lambda_samples must be positive");
        }
        Ok(())
    }

    pub fn build(&self) -> Result<NoiseSchedule> {
        self.validate()?;
        let (beta, alpha_bar) = cosine_schedule(self.steps, self.cosine_s);
        Ok(NoiseSchedule {
            steps: self.steps,
            beta,
            alpha_bar,
            sigma: exp_sigma_schedule(self.steps, self.sigma_begin, self.sigma_end),
            corrector_gamma: self.corrector_gamma,
            n_images: self.n_images,
        })
    }
}

/// Per-step tables indexed by `t = 0..=T`; index 0 is the clean state
/// (`β₀ = 0`, `ᾱ₀ = 1`, `σ₀ = 0`).
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    pub steps: usize,
    pub beta: Vec<f64>,
    pub alpha_bar: Vec<f64>,
    pub sigma: Vec<f64>,
    pub corrector_gamma: f64,
    pub n_images: usize,
}

impl NoiseSchedule {
    pub fn alpha(&self, t: usize) -> f64 {
        1.0 - self.beta[t]
    }

    /// Variance of the DDPM posterior `q(x_{t−1} | x_t, x₀)`.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        self.beta[t] * (1.0 - self.alpha_bar[t - 1]) / (1.0 - self.alpha_bar[t])
    }
}

/// Nichol–Dhariwal cosine schedule. Returns `(β, ᾱ)` of length `T + 1`.
pub fn cosine_schedule(steps: usize, s: f64) -> (Vec<f64>, Vec<f64>) {
    let f = |t: usize| {
        let x = (t as f64 / steps as f64 + s) / (1.0 + s) * FRAC_PI_2;
        x.cos().powi(2)
    };
    let f0 = f(0);
    let mut beta = vec![0.0; steps + 1];
    let mut alpha_bar = vec![1.0; steps + 1];
    for t in 1..=steps {
        let b = 1.0 - (f(t) / f0) / (f(t - 1) / f0);
        beta[t] = b.clamp(1e-12, 0.999);
        alpha_bar[t] = alpha_bar[t - 1] * (1.0 - beta[t]);
    }
    (beta, alpha_bar)
}

/// `σ_t = σ₁ (σ_T/σ₁)^{(t−1)/(T−1)}` for `t = 1..=T`, with `σ₀ = 0`.
pub fn exp_sigma_schedule(steps: usize, sigma_1: f64, sigma_t: f64) -> Vec<f64> {
    let mut out = vec![0.0; steps + 1];
    for (t, s) in out.iter_mut().enumerate().skip(1) {
        *s = if steps == 1 {
            sigma_1
        } else if t == steps {
            sigma_t
        } else {
            sigma_1 * (sigma_t / sigma_1).powf((t - 1) as f64 / (steps - 1) as f64)
        };
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_endpoints_and_monotonicity() {
        let (beta, ab) = cosine_schedule(1000, 0.008);
        assert_eq!(ab[0], 1.0);
        assert!(ab[1000] < 0.01);
        assert!(ab.windows(2).all(|w| w[1] < w[0]));
        assert!(beta[1..].iter().all(|&b| b > 0.0 && b <= 0.999));
        assert_eq!(beta[1000], 0.999);
    }

    #[test]
    fn sigma_endpoints() {
        let s = exp_sigma_schedule(1000, 0.005, 0.5);
        assert_eq!(s[1], 0.005);
        assert_eq!(s[1000], 0.5);
        let r = s[2] / s[1];
        for w in s[1..].windows(2) {
            assert!((w[1] / w[0] - r).abs() < 1e-12);
        }
        assert_eq!(exp_sigma_schedule(2, 0.005, 0.5), vec![0.0, 0.005, 0.5]);
    }

    #[test]
    fn config_validation() {
        assert!(ScheduleConfig { steps: 0, ..Default::default() }.build().is_err());
        assert!(ScheduleConfig { sigma_begin: 0.6, ..Default::default() }.build().is_err());
        let s = ScheduleConfig::with_steps(10).build().unwrap();
        assert_eq!(s.beta.len(), 11);
        assert!(s.posterior_variance(1).abs() < 1e-15);
    }
}
