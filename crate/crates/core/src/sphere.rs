//! Best-arm identification on the unit sphere `S^{d-1}`.
//!
//! Sampling is round-robin over an orthonormal basis, so after `m d` rounds
//! the design is exactly `m I`. The answer is the direction `mu_hat / |mu_hat|`.
//!
//! Stopping uses a closed-form lower bound of the continuous GLLR infimum.
//! For the answer `a_hat` and any unit `b`, `mu_hat^T (a_hat - b) = |mu_hat| x / 2`
//! with `x = |a_hat - b|^2`, and `(a_hat - b)^T G^{-1} (a_hat - b) <= x / lambda_min(G)`,
//! hence
//!
//! ```text
//! Z_{a_hat,b,eps_t} >= lambda_min (|mu_hat| x / 2 + eps_t)^2 / (2 x) >= eps_t |mu_hat| lambda_min,
//! ```
//!
//! the last step minimizing over `x > 0` (attained at `x = 2 eps_t / |mu_hat|`).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::allocation::kl_bernoulli;
use crate::environment::RewardStream;
use crate::error::{Error, Result};
use crate::estimator::DesignState;
use crate::instance::{ArmKind, Instance};
use crate::linalg::{dot, norm, quad_form};
use crate::lts::DEFAULT_MAX_T;
use crate::record::{Answer, RunRecord};
use crate::rng::{GaussianSource, Stream};

/// Constant of the continuous lower bound as stated.
pub const LOWER_BOUND_CONSTANT: f64 = 20.0;
/// The looser constant reached at the end of its derivation.
pub const LOWER_BOUND_PROOF_CONSTANT: f64 = 40.0;

/// How the slack `eps_t < eps` grows toward `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonRule {
    /// `eps / (1 + eps (4 sigma^2 log(4 ceil(t/d) / delta_t))^{-1/2})`.
    ///
    /// `eps - eps_t` is of order `eps^2 / sqrt(log t)`, so the design floor
    /// `rho / |mu_hat|^2` runs into the millions of rounds for `eps = 0.1`.
    LogConfidence,
    /// `eps g / (1 + g)` with `g = sqrt(log(1 + ceil(t/d)))`.
    #[default]
    SqrtLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Design floor; defaults to 1 (`max |a|^2` on the sphere).
    pub c: f64,
    pub rule: EpsilonRule,
    pub max_t: u64,
}

impl Default for SphereConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            delta: 0.05,
            c: 1.0,
            rule: EpsilonRule::default(),
            max_t: DEFAULT_MAX_T,
        }
    }
}

impl SphereConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if !(self.c > 0.0) {
            return Err(Error::config(format!("c must be positive, got {}", self.c)));
        }
        Ok(())
    }

    /// Requires a sphere instance. The stopping rule is valid for any
    /// `eps > 0`; a margin `eps >= |mu| / 5` only voids the lower bound, so it
    /// is logged rather than rejected.
    pub fn validate_for(&self, instance: &Instance) -> Result<()> {
        self.validate()?;
        if instance.arm_set.kind() != ArmKind::Sphere {
            return Err(Error::config("sphere runs need a sphere instance"));
        }
        if self.check_margin(instance).is_err() {
            log::warn!(
                "epsilon {} is not below |mu| / 5; the lower bound does not apply",
                self.epsilon
            );
        }
        Ok(())
    }

    /// `eps < |mu| / 5`, the regime of [`sphere_lower_bound`].
    pub fn check_margin(&self, instance: &Instance) -> Result<()> {
        let margin = norm(&instance.mu);
        if !(self.epsilon < margin / 5.0) {
            return Err(Error::config(format!(
                "epsilon {} must be below |mu| / 5 = {}",
                self.epsilon,
                margin / 5.0
            )));
        }
        Ok(())
    }

    /// `delta_t = delta / (2 t^2)`; sums to `delta pi^2 / 12 < delta`.
    pub fn delta_t(&self, t: u64) -> f64 {
        let t = t.max(1) as f64;
        self.delta / (2.0 * t * t)
    }
}

/// Basis vector `e_{(t - 1) mod d}` pulled at round `t >= 1`.
pub fn round_robin_arm(t: u64, d: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[(t.max(1) - 1) as usize % d] = 1.0;
    e
}

pub fn epsilon_t(t: u64, d: usize, sigma: f64, cfg: &SphereConfig) -> f64 {
    let eps = cfg.epsilon;
    let blocks = (t.max(1) as f64 / d as f64).ceil();
    match cfg.rule {
        EpsilonRule::LogConfidence => {
            let l = 4.0 * sigma * sigma * (4.0 * blocks / cfg.delta_t(t)).ln();
            eps / (1.0 + eps / l.sqrt())
        }
        EpsilonRule::SqrtLog => {
            let g = blocks.ln_1p().sqrt();
            eps * g / (1.0 + g)
        }
    }
}

/// `eps_t |mu_hat| lambda_min(G)`; zero before the design is invertible.
pub fn sphere_stopping_statistic(design: &DesignState, eps_t: f64) -> f64 {
    if design.t() == 0 {
        return 0.0;
    }
    eps_t * norm(design.estimate()) * design.min_eig()
}

/// The unrelaxed `Z_{a_hat,b,eps_t}` for one direction `b`.
pub fn sphere_pair_statistic(design: &DesignState, b: &[f64], eps_t: f64) -> Result<f64> {
    if !design.is_invertible() {
        return Err(Error::SingularDesign);
    }
    let mu_hat = design.estimate();
    let n = norm(mu_hat);
    if n == 0.0 {
        return Ok(0.0);
    }
    let diff: Vec<f64> = mu_hat.iter().zip(b).map(|(m, b)| m / n - b).collect();
    let x = dot(mu_hat, &diff) + eps_t;
    let q = quad_form(&design.spectrum().inverse(), &diff);
    Ok(x.signum() * x * x / (2.0 * q))
}

/// Minimum of [`sphere_pair_statistic`] over `samples` random unit `b` with
/// `mu_hat^T (a_hat - b) >= eps_t`. Diagnostic only: an upper estimate of the
/// exact infimum, never used for stopping.
pub fn sampled_sphere_statistic(
    design: &DesignState,
    eps_t: f64,
    samples: usize,
    seed: u64,
) -> Result<Option<f64>> {
    let d = design.dim();
    let mu_hat = design.estimate().to_vec();
    let n = norm(&mu_hat);
    let mut g = GaussianSource::new(seed, Stream::Diagnostics);
    let mut best: Option<f64> = None;
    for _ in 0..samples {
        let raw: Vec<f64> = (0..d).map(|_| g.standard_normal()).collect();
        let r = norm(&raw);
        if r == 0.0 {
            continue;
        }
        let b: Vec<f64> = raw.iter().map(|x| x / r).collect();
        if n - dot(&mu_hat, &b) < eps_t {
            continue;
        }
        let z = sphere_pair_statistic(design, &b, eps_t)?;
        best = Some(best.map_or(z, |v: f64| v.min(z)));
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereStopCheck {
    pub stop: bool,
    pub z: f64,
    /// `2 sigma^2 zeta_t`.
    pub beta: f64,
    /// `max(c, rho / |mu_hat|^2)`.
    pub design_floor: f64,
}

/// `Z >= 2 sigma^2 zeta_t` and `lambda_min >= max(c, rho / |mu_hat|^2)`, with
/// `zeta_t = log det(G / c + I) / 2 + log(2 / delta_t)` and
/// `rho = 4 sigma^2 eps_t^2 zeta_t / (eps - eps_t)^2`.
pub fn sphere_check_stop(
    design: &DesignState,
    cfg: &SphereConfig,
    sigma: f64,
    t: u64,
) -> SphereStopCheck {
    let eps_t = epsilon_t(t, design.dim(), sigma, cfg);
    let zeta = 0.5 * design.spectrum().logdet_shifted(cfg.c) + (2.0 / cfg.delta_t(t)).ln();
    let s2 = sigma * sigma;
    let beta = 2.0 * s2 * zeta;
    let rho = 4.0 * s2 * eps_t * eps_t * zeta / (cfg.epsilon - eps_t).powi(2);
    let mu_norm_sq = dot(design.estimate(), design.estimate());
    let design_floor = if mu_norm_sq > 0.0 {
        cfg.c.max(rho / mu_norm_sq)
    } else {
        f64::INFINITY
    };
    let z = sphere_stopping_statistic(design, eps_t);
    let lambda = if design.t() == 0 {
        0.0
    } else {
        design.min_eig()
    };
    SphereStopCheck {
        stop: t > 0 && lambda >= design_floor && z >= beta,
        z,
        beta,
        design_floor,
    }
}

pub fn sphere_should_stop(design: &DesignState, cfg: &SphereConfig, sigma: f64, t: u64) -> bool {
    sphere_check_stop(design, cfg, sigma, t).stop
}

pub const ALGORITHM_ID: &str = "sphere";

/// One run of round-robin sampling with the sphere stopping rule.
pub fn run_sphere(instance: &Instance, cfg: &SphereConfig, seed: u64) -> Result<RunRecord> {
    cfg.validate_for(instance)?;
    let started = Instant::now();
    let d = instance.dim();
    let mut design = DesignState::new_continuous(d);
    let mut env = RewardStream::new(instance, seed);
    let mut incomplete = false;
    loop {
        let t = design.t();
        if sphere_should_stop(&design, cfg, instance.sigma, t) {
            break;
        }
        if t >= cfg.max_t {
            incomplete = true;
            break;
        }
        let a = round_robin_arm(t + 1, d);
        let r = env.sample_reward(&a)?;
        design.update(&a, None, r)?;
    }
    let mu_hat = design.estimate();
    let n = norm(mu_hat);
    let answer: Vec<f64> = if n > 0.0 {
        mu_hat.iter().map(|x| x / n).collect()
    } else {
        round_robin_arm(1, d)
    };
    let regret = norm(&instance.mu) - dot(&instance.mu, &answer);
    Ok(RunRecord {
        algorithm: ALGORITHM_ID.to_string(),
        instance: String::new(),
        seed,
        tau: design.t(),
        correct: regret <= cfg.epsilon,
        answer: Answer::Direction(answer),
        support_size: d,
        wall_time_s: started.elapsed().as_secs_f64(),
        incomplete,
    })
}

/// `sigma^2 (d - 1) / (20 |mu| eps) kl(delta, 1 - delta)`; requires `eps < |mu| / 5`.
pub fn sphere_lower_bound(instance: &Instance, cfg: &SphereConfig) -> Result<f64> {
    cfg.validate_for(instance)?;
    cfg.check_margin(instance)?;
    let d = instance.dim() as f64;
    let s2 = instance.sigma * instance.sigma;
    let kl = kl_bernoulli(cfg.delta, 1.0 - cfg.delta)?;
    Ok(s2 * (d - 1.0) / (LOWER_BOUND_CONSTANT * norm(&instance.mu) * cfg.epsilon) * kl)
}
