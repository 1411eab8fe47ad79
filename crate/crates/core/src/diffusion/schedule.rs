use crate::error::{Error, Result};
use crate::nn::RandomSource;

/// Noise-level ladder for sampling plus the log-normal training-noise law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSchedule {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rho: f64,
    /// Number of noise levels before the terminal zero.
    pub steps: usize,
    pub sigma_data: f64,
    pub p_mean: f64,
    pub p_std: f64,
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self {
            sigma_min: 0.02,
            sigma_max: 80.0,
            rho: 7.0,
            steps: 32,
            sigma_data: 0.5,
            p_mean: -1.2,
            p_std: 1.2,
        }
    }
}

impl NoiseSchedule {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.sigma_min > 0.0 && self.sigma_min.is_finite()) {
            return bad(format!("sigma_min must be positive, got {}", self.sigma_min));
        }
        if !(self.sigma_max > self.sigma_min && self.sigma_max.is_finite()) {
            return bad(format!(
                "sigma_max ({}) must exceed sigma_min ({})",
                self.sigma_max, self.sigma_min
            ));
        }
        if !(self.rho >= 1.0 && self.rho.is_finite()) {
            return bad(format!("rho must be >= 1, got {}", self.rho));
        }
        if self.steps < 2 {
            return bad(format!("need at least 2 steps, got {}", self.steps));
        }
        if !(self.sigma_data > 0.0 && self.sigma_data.is_finite()) {
            return bad(format!("sigma_data must be positive, got {}", self.sigma_data));
        }
        if !self.p_mean.is_finite() || !(self.p_std > 0.0 && self.p_std.is_finite()) {
            return bad(format!(
                "need finite p_mean and positive p_std, got {} and {}",
                self.p_mean, self.p_std
            ));
        }
        Ok(())
    }

    /// Sampling time steps `t_0 > t_1 > ... > t_{N-1} = sigma_min > t_N = 0`.
    ///
    /// Interior points interpolate linearly in `sigma^(1/rho)`; the endpoints are
    /// set exactly rather than through the power round trip.
    pub fn discretize(&self) -> Vec<f64> {
        let n = self.steps;
        let inv_rho = 1.0 / self.rho;
        let hi = self.sigma_max.powf(inv_rho);
        let lo = self.sigma_min.powf(inv_rho);
        let mut t: Vec<f64> = (0..n)
            .map(|i| (hi + i as f64 / (n - 1) as f64 * (lo - hi)).powf(self.rho))
            .collect();
        t[0] = self.sigma_max;
        t[n - 1] = self.sigma_min;
        t.push(0.0);
        t
    }

    /// Training noise levels with `ln(sigma) ~ N(p_mean, p_std^2)`.
    pub fn sample_training_sigma(&self, rng: &mut RandomSource, count: usize) -> Vec<f64> {
        (0..count)
            .map(|_| (self.p_mean + self.p_std * rng.normal()).exp())
            .collect()
    }
}
