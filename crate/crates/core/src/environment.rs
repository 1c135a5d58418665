//! Simulated reward feedback `r_t = mu^T a + sigma * z_t`.

use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::linalg::dot;
use crate::rng::{GaussianSource, Stream};

/// Seeded reward generator owned by one trial.
///
/// `sigma` is the noise standard deviation.
#[derive(Debug, Clone)]
pub struct RewardStream {
    mu: Vec<f64>,
    sigma: f64,
    noise: GaussianSource,
    t: u64,
}

impl RewardStream {
    pub fn new(instance: &Instance, seed: u64) -> Self {
        Self {
            mu: instance.mu.clone(),
            sigma: instance.sigma,
            noise: GaussianSource::new(seed, Stream::Noise),
            t: 0,
        }
    }

    /// Number of rewards drawn so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn sample_reward(&mut self, arm: &[f64]) -> Result<f64> {
        if arm.len() != self.mu.len() {
            return Err(Error::input(format!(
                "arm has dimension {}, instance has dimension {}",
                arm.len(),
                self.mu.len()
            )));
        }
        let z = self.noise.standard_normal();
        self.t += 1;
        Ok(dot(&self.mu, arm) + self.sigma * z)
    }
}
