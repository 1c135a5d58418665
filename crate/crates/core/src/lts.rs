//! Lazy Track-and-Stop.
//!
//! Each round either forces a pull from a spanning exploration set `A0`
//! (whenever `lambda_min` of the design falls below `f(t) = c_A0 sqrt(t)`) or
//! tracks the current target allocation. The target is re-optimized against
//! the least-squares estimate only at the rounds of a [`LazySchedule`], warm
//! started from the previous target. The run stops once the design dominates
//! `c I` and the GLLR statistic `Z(t)` exceeds the threshold `beta(delta, t)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::allocation::{optimize_allocation, support_of, Allocation, OptimizerSettings};
use crate::environment::RewardStream;
use crate::error::{Error, Result};
use crate::estimator::DesignState;
use crate::instance::{ArmSet, Instance};
use crate::linalg::{dot, quad_form};
use crate::record::{Answer, RunRecord};
use crate::tol;

/// Hard cap on the number of rounds of one run.
pub const DEFAULT_MAX_T: u64 = 10_000_000;

/// Rounds at which the target allocation is recomputed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LazySchedule {
    /// `t in {1, 2, 4, 8, ...}`.
    #[default]
    Exponential,
    /// `t in {1, 1 + P, 1 + 2P, ...}`.
    Periodic(u64),
    EveryRound,
}

impl LazySchedule {
    pub fn is_update(&self, t: u64) -> bool {
        match *self {
            _ if t == 0 => false,
            LazySchedule::Exponential => t.is_power_of_two(),
            LazySchedule::Periodic(p) => (t - 1).is_multiple_of(p.max(1)),
            LazySchedule::EveryRound => true,
        }
    }
}

impl fmt::Display for LazySchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LazySchedule::Exponential => write!(f, "exp"),
            LazySchedule::Periodic(p) => write!(f, "period:{p}"),
            LazySchedule::EveryRound => write!(f, "every"),
        }
    }
}

impl FromStr for LazySchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exp" => Ok(LazySchedule::Exponential),
            "every" => Ok(LazySchedule::EveryRound),
            _ => {
                let p = s
                    .strip_prefix("period:")
                    .and_then(|p| p.parse::<u64>().ok())
                    .filter(|&p| p >= 1)
                    .ok_or_else(|| {
                        Error::config(format!(
                            "unknown schedule '{s}' (expected exp, every or period:P with P >= 1)"
                        ))
                    })?;
                Ok(LazySchedule::Periodic(p))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackingMode {
    /// Track the running sum of past targets.
    Averaging,
    /// Track `t w(t)` for the current target only.
    #[default]
    NoAveraging,
}

impl fmt::Display for TrackingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrackingMode::Averaging => "avg",
            TrackingMode::NoAveraging => "noavg",
        })
    }
}

impl FromStr for TrackingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "avg" => Ok(TrackingMode::Averaging),
            "noavg" => Ok(TrackingMode::NoAveraging),
            _ => Err(Error::config(format!(
                "unknown mode '{s}' (expected avg or noavg)"
            ))),
        }
    }
}

/// Threshold constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdProfile {
    /// `u = 1` with the risk inflated to `6 delta / (pi^2 t^2)`.
    PaperMain,
    /// `u = 0.1` with the plain risk `delta`.
    #[default]
    PaperAppendix,
}

impl ThresholdProfile {
    pub fn u(&self) -> f64 {
        match self {
            ThresholdProfile::PaperMain => 1.0,
            ThresholdProfile::PaperAppendix => 0.1,
        }
    }

    pub fn inflates_delta(&self) -> bool {
        matches!(self, ThresholdProfile::PaperMain)
    }
}

impl fmt::Display for ThresholdProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdProfile::PaperMain => "paper-main",
            ThresholdProfile::PaperAppendix => "paper-appendix",
        })
    }
}

impl FromStr for ThresholdProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-main" => Ok(ThresholdProfile::PaperMain),
            "paper-appendix" => Ok(ThresholdProfile::PaperAppendix),
            _ => Err(Error::config(format!(
                "unknown profile '{s}' (expected paper-main or paper-appendix)"
            ))),
        }
    }
}

/// Resolved stopping-rule constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopConfig {
    pub delta: f64,
    pub u: f64,
    /// Required design floor: stop only once `gram >= c I`.
    pub c: f64,
    pub sigma: f64,
    /// Replace `delta` by `6 delta / (pi^2 t^2)` in the threshold.
    pub inflate_delta: bool,
}

impl StopConfig {
    pub fn new(delta: f64, u: f64, c: f64, sigma: f64, inflate_delta: bool) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::config(format!(
                "delta must lie in (0,1), got {delta}"
            )));
        }
        if !(u > 0.0 && c > 0.0) || !u.is_finite() || !c.is_finite() {
            return Err(Error::config(format!(
                "u and c must be positive, got u={u}, c={c}"
            )));
        }
        if !(sigma >= 0.0) {
            return Err(Error::config(format!(
                "sigma must be non-negative, got {sigma}"
            )));
        }
        Ok(Self {
            delta,
            u,
            c,
            sigma,
            inflate_delta,
        })
    }

    /// Profile constants with `c = max_a |a|^2`.
    pub fn for_instance(
        instance: &Instance,
        delta: f64,
        profile: ThresholdProfile,
    ) -> Result<Self> {
        Self::new(
            delta,
            profile.u(),
            instance.arm_set.max_norm_sq(),
            instance.sigma,
            profile.inflates_delta(),
        )
    }

    /// The risk level used at round `t`.
    pub fn effective_delta(&self, t: u64) -> f64 {
        if self.inflate_delta {
            let t = t.max(1) as f64;
            6.0 * self.delta / (PI * PI * t * t)
        } else {
            self.delta
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtsConfig {
    pub delta: f64,
    pub profile: ThresholdProfile,
    /// Overrides the profile's `u`.
    pub u: Option<f64>,
    /// Overrides `c = max_a |a|^2`.
    pub c: Option<f64>,
    pub schedule: LazySchedule,
    pub mode: TrackingMode,
    pub optimizer: OptimizerSettings,
    pub max_t: u64,
}

impl Default for LtsConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            profile: ThresholdProfile::default(),
            u: None,
            c: None,
            schedule: LazySchedule::default(),
            mode: TrackingMode::default(),
            optimizer: OptimizerSettings::default(),
            max_t: DEFAULT_MAX_T,
        }
    }
}

impl LtsConfig {
    pub fn stop_config(&self, instance: &Instance) -> Result<StopConfig> {
        let base = StopConfig::for_instance(instance, self.delta, self.profile)?;
        StopConfig::new(
            self.delta,
            self.u.unwrap_or(base.u),
            self.c.unwrap_or(base.c),
            instance.sigma,
            base.inflate_delta,
        )
    }
}

/// Sampling-rule state: forced exploration plus tracking.
#[derive(Debug, Clone)]
pub struct TrackerState {
    mode: TrackingMode,
    w: Allocation,
    cumsum: Vec<f64>,
    forced_index: usize,
    exploration_set: Vec<usize>,
    c_a0: f64,
}

impl TrackerState {
    /// Tracker whose exploration set is the greedy spanning subset of `arms`.
    pub fn new(arms: &ArmSet, mode: TrackingMode, initial: Allocation) -> Result<Self> {
        if !arms.is_finite() {
            return Err(Error::input("tracking needs a finite arm set"));
        }
        if initial.len() != arms.len() {
            return Err(Error::input(format!(
                "initial allocation has {} weights for {} arms",
                initial.len(),
                arms.len()
            )));
        }
        let exploration_set = arms.spanning_subset();
        let d = arms.dim();
        if exploration_set.len() < d {
            return Err(Error::instance("arms do not span the ambient space"));
        }
        let mut sub = vec![0.0; arms.len()];
        for &i in &exploration_set {
            sub[i] = 1.0;
        }
        let lambda = arms.weighted_gram(&sub).spectrum()?.min_clamped();
        Ok(Self {
            mode,
            w: initial,
            cumsum: vec![0.0; arms.len()],
            forced_index: 0,
            exploration_set,
            c_a0: lambda / (d as f64).sqrt(),
        })
    }

    pub fn mode(&self) -> TrackingMode {
        self.mode
    }

    pub fn allocation(&self) -> &Allocation {
        &self.w
    }

    /// `sum_{s <= t} w(s)`.
    pub fn cumsum(&self) -> &[f64] {
        &self.cumsum
    }

    /// Position in the exploration set of the next forced pull (0-based).
    pub fn forced_index(&self) -> usize {
        self.forced_index
    }

    pub fn exploration_set(&self) -> &[usize] {
        &self.exploration_set
    }

    pub fn c_a0(&self) -> f64 {
        self.c_a0
    }

    /// `f(t) = c_A0 sqrt(t)`.
    pub fn f_threshold(&self, t: u64) -> f64 {
        self.c_a0 * (t as f64).sqrt()
    }

    pub fn set_allocation(&mut self, w: Allocation) {
        debug_assert_eq!(w.len(), self.w.len());
        self.w = w;
    }

    /// Adds the current target to the running sum; called once per round.
    pub fn accumulate(&mut self) {
        for (c, w) in self.cumsum.iter_mut().zip(self.w.weights()) {
            *c += w;
        }
    }

    /// Support of the tracked quantity: `w(t)` or the running sum.
    pub fn tracked_support_size(&self) -> usize {
        match self.mode {
            TrackingMode::NoAveraging => self.w.support_size(),
            TrackingMode::Averaging => support_of(&self.cumsum).len(),
        }
    }

    /// Whether the next pull is forced.
    pub fn is_forced(&self, design: &DesignState) -> bool {
        let t = design.t();
        t == 0 || design.min_eig() < self.f_threshold(t)
    }

    /// The arm to pull at round `t + 1`, and whether it was forced.
    pub fn next_arm(&mut self, design: &DesignState) -> (usize, bool) {
        if self.is_forced(design) {
            let arm = self.exploration_set[self.forced_index];
            self.forced_index = (self.forced_index + 1) % self.exploration_set.len();
            return (arm, true);
        }
        let counts = design.counts().expect("finite design tracks counts");
        let t = design.t() as f64;
        let mut best = usize::MAX;
        let mut best_val = f64::INFINITY;
        let mut consider = |i: usize, target: f64| {
            let v = counts[i] as f64 - target;
            if v < best_val {
                best_val = v;
                best = i;
            }
        };
        match self.mode {
            TrackingMode::NoAveraging => {
                for (i, &w) in self.w.weights().iter().enumerate() {
                    if w > tol::SUPPORT_CUTOFF {
                        consider(i, t * w);
                    }
                }
            }
            TrackingMode::Averaging => {
                for (i, &c) in self.cumsum.iter().enumerate() {
                    if c > tol::SUPPORT_CUTOFF {
                        consider(i, c);
                    }
                }
            }
        }
        if best == usize::MAX {
            // Empty support cannot arise after round 0; fall back to exploration.
            let arm = self.exploration_set[self.forced_index];
            self.forced_index = (self.forced_index + 1) % self.exploration_set.len();
            return (arm, true);
        }
        (best, false)
    }
}

/// Re-optimizes the target at scheduled rounds; returns whether it changed.
///
/// Skips the update when the empirical best arm is tied. Optimizer failures
/// keep the previous target.
pub fn maybe_update_allocation(
    tracker: &mut TrackerState,
    schedule: LazySchedule,
    design: &DesignState,
    arms: &ArmSet,
    settings: &OptimizerSettings,
) -> bool {
    let t = design.t();
    if !schedule.is_update(t) {
        return false;
    }
    let mu_hat = design.estimate();
    if arms.unique_argmax(mu_hat, tol::BEST_ARM_GAP).is_none() {
        return false;
    }
    match optimize_allocation(
        mu_hat,
        arms,
        Some(&tracker.w),
        settings.tol,
        settings.max_iter,
    ) {
        Ok(res) => {
            tracker.w = res.allocation;
            true
        }
        Err(e) => {
            log::warn!("allocation update at t={t} failed, keeping previous target: {e}");
            false
        }
    }
}

fn inverse_gram(design: &DesignState) -> Result<nalgebra::DMatrix<f64>> {
    if !design.is_invertible() {
        return Err(Error::SingularDesign);
    }
    Ok(design.spectrum().inverse())
}

fn pair_value(mu_hat: &[f64], inv: &nalgebra::DMatrix<f64>, diff: &[f64], eps: f64) -> f64 {
    let x = dot(mu_hat, diff) + eps;
    let q = quad_form(inv, diff);
    x.signum() * x * x / (2.0 * q)
}

/// `Z_{a,b,eps}(t) = sgn(x) x^2 / (2 (a-b)^T G^{-1} (a-b))`, `x = mu_hat^T (a-b) + eps`.
pub fn gllr_pair(design: &DesignState, a: &[f64], b: &[f64], eps: f64) -> Result<f64> {
    if a.len() != design.dim() || b.len() != design.dim() {
        return Err(Error::input("arm dimension does not match the design"));
    }
    if a == b {
        return Err(Error::input("the GLLR needs two distinct arms"));
    }
    let inv = inverse_gram(design)?;
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let x = dot(design.estimate(), &diff) + eps;
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(pair_value(design.estimate(), &inv, &diff, eps))
}

/// `Z(t) = min_{b != a_hat} Z_{a_hat,b,0}(t)` and the empirical best arm `a_hat`.
pub fn stopping_statistic(design: &DesignState, arms: &ArmSet) -> Result<(f64, usize)> {
    let inv = inverse_gram(design)?;
    let mu_hat = design.estimate();
    let a_hat = arms.argmax(mu_hat);
    let star = arms.arm(a_hat);
    let mut diff = vec![0.0; arms.dim()];
    let mut z = f64::INFINITY;
    for (i, b) in arms.iter().enumerate() {
        if i == a_hat {
            continue;
        }
        for (k, d) in diff.iter_mut().enumerate() {
            *d = star[k] - b[k];
        }
        let x = dot(mu_hat, &diff);
        let v = if x <= 0.0 {
            0.0
        } else {
            x * x / (2.0 * quad_form(&inv, &diff))
        };
        z = z.min(v);
    }
    Ok((z, a_hat))
}

/// `(1 + u) sigma^2 (log det(G / (u c) + I) / 2 + log(1 / delta_t))`.
pub fn beta_threshold(design: &DesignState, cfg: &StopConfig, t: u64) -> f64 {
    let logdet = design.spectrum().logdet_shifted(cfg.u * cfg.c);
    (1.0 + cfg.u) * cfg.sigma * cfg.sigma * (0.5 * logdet + (1.0 / cfg.effective_delta(t)).ln())
}

/// Stopping-rule diagnostics for one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopCheck {
    pub stop: bool,
    /// `None` until `gram >= c I`.
    pub z: Option<f64>,
    pub beta: Option<f64>,
}

pub fn check_stop(design: &DesignState, cfg: &StopConfig, arms: &ArmSet) -> StopCheck {
    if design.t() == 0 || design.min_eig() < cfg.c {
        return StopCheck {
            stop: false,
            z: None,
            beta: None,
        };
    }
    let Ok((z, _)) = stopping_statistic(design, arms) else {
        return StopCheck {
            stop: false,
            z: None,
            beta: None,
        };
    };
    let beta = beta_threshold(design, cfg, design.t());
    StopCheck {
        stop: z > beta,
        z: Some(z),
        beta: Some(beta),
    }
}

/// `lambda_min(G) >= c` and `Z(t) > beta(delta, t)`.
pub fn should_stop(design: &DesignState, cfg: &StopConfig, arms: &ArmSet) -> bool {
    check_stop(design, cfg, arms).stop
}

/// Per-round trace emitted by the run loop after each pull.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundTrace {
    /// Number of samples after this round.
    pub t: u64,
    pub arm: usize,
    pub forced: bool,
    pub reward: f64,
    pub min_eig: f64,
    pub updated: bool,
    pub z: Option<f64>,
    pub beta: Option<f64>,
}

/// Where the tracked target comes from.
#[derive(Debug, Clone)]
pub enum TargetSource {
    /// Lazily re-optimized against the estimate.
    Lazy(LazySchedule),
    /// A constant allocation.
    Fixed(Allocation),
}

/// Shared loop of LTS and the tracking baselines.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_tracking(
    instance: &Instance,
    stop: &StopConfig,
    mode: TrackingMode,
    source: TargetSource,
    optimizer: &OptimizerSettings,
    max_t: u64,
    seed: u64,
    algorithm: String,
    mut observer: Option<&mut dyn FnMut(&RoundTrace)>,
) -> Result<RunRecord> {
    let started = Instant::now();
    let arms = &instance.arm_set;
    if !arms.is_finite() {
        return Err(Error::input("tracking algorithms need a finite arm set"));
    }
    let (initial, schedule) = match source {
        TargetSource::Lazy(s) => (
            Allocation::uniform_over(arms.len(), &arms.spanning_subset()),
            Some(s),
        ),
        TargetSource::Fixed(w) => (w, None),
    };
    let mut tracker = TrackerState::new(arms, mode, initial)?;
    let mut design = DesignState::for_arm_set(arms);
    let mut env = RewardStream::new(instance, seed);

    let mut incomplete = false;
    loop {
        let check = check_stop(&design, stop, arms);
        if check.stop {
            break;
        }
        if design.t() >= max_t {
            incomplete = true;
            break;
        }
        let (arm, forced) = tracker.next_arm(&design);
        let a = arms.arm(arm);
        let reward = env.sample_reward(a)?;
        design.update(a, Some(arm), reward)?;
        let updated = match schedule {
            Some(s) => maybe_update_allocation(&mut tracker, s, &design, arms, optimizer),
            None => false,
        };
        tracker.accumulate();
        if let Some(obs) = observer.as_deref_mut() {
            let next = check_stop(&design, stop, arms);
            obs(&RoundTrace {
                t: design.t(),
                arm,
                forced,
                reward,
                min_eig: design.min_eig(),
                updated,
                z: next.z,
                beta: next.beta,
            });
        }
    }

    let a_hat = design.empirical_best_arm(arms);
    Ok(RunRecord {
        algorithm,
        instance: String::new(),
        seed,
        tau: design.t(),
        answer: Answer::Arm(a_hat),
        correct: a_hat == instance.best_arm(),
        support_size: tracker.tracked_support_size(),
        wall_time_s: started.elapsed().as_secs_f64(),
        incomplete,
    })
}

pub fn algorithm_id(mode: TrackingMode) -> String {
    format!("lts-{mode}")
}

/// One run of LTS on a finite instance.
pub fn run_lts(instance: &Instance, cfg: &LtsConfig, seed: u64) -> Result<RunRecord> {
    run_lts_traced(instance, cfg, seed, None)
}

/// [`run_lts`] with a per-round observer.
pub fn run_lts_traced(
    instance: &Instance,
    cfg: &LtsConfig,
    seed: u64,
    observer: Option<&mut dyn FnMut(&RoundTrace)>,
) -> Result<RunRecord> {
    let stop = cfg.stop_config(instance)?;
    run_tracking(
        instance,
        &stop,
        cfg.mode,
        TargetSource::Lazy(cfg.schedule),
        &cfg.optimizer,
        cfg.max_t,
        seed,
        algorithm_id(cfg.mode),
        observer,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::psi;
    use crate::instance::{gen_many_arms, orthonormal_instance};
    use approx::assert_abs_diff_eq;

    fn ortho_arms() -> ArmSet {
        orthonormal_instance(vec![1.0, 0.0], 1.0).unwrap().arm_set
    }

    /// Design with the given Gram matrix and estimate, built from fake pulls.
    fn design_with(gram_diag: &[f64], mu_hat: &[f64]) -> DesignState {
        let d = gram_diag.len();
        let mut s = DesignState::new_continuous(d);
        for (i, &g) in gram_diag.iter().enumerate() {
            let mut e = vec![0.0; d];
            e[i] = g.sqrt();
            // reward so that moment_i = g * mu_i
            s.update(&e, None, mu_hat[i] * g.sqrt()).unwrap();
        }
        s
    }

    #[test]
    fn schedules() {
        let exp: Vec<u64> = (0..20)
            .filter(|&t| LazySchedule::Exponential.is_update(t))
            .collect();
        assert_eq!(exp, vec![1, 2, 4, 8, 16]);
        let per: Vec<u64> = (0..12)
            .filter(|&t| LazySchedule::Periodic(5).is_update(t))
            .collect();
        assert_eq!(per, vec![1, 6, 11]);
        assert!(!LazySchedule::EveryRound.is_update(0));
        assert!(LazySchedule::EveryRound.is_update(3));
        for s in ["exp", "every", "period:7"] {
            assert_eq!(s.parse::<LazySchedule>().unwrap().to_string(), s);
        }
        assert!("period:0".parse::<LazySchedule>().is_err());
        assert!("weekly".parse::<LazySchedule>().is_err());
    }

    #[test]
    fn f_threshold_examples() {
        let arms = ortho_arms();
        let tr =
            TrackerState::new(&arms, TrackingMode::NoAveraging, Allocation::uniform(2)).unwrap();
        assert_abs_diff_eq!(tr.c_a0(), 1.0 / 2f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(tr.f_threshold(4), 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(tr.f_threshold(0), 0.0);
        assert!((1..100).all(|t| tr.f_threshold(t) > tr.f_threshold(t - 1)));
    }

    #[test]
    fn first_pull_is_forced() {
        let arms = ortho_arms();
        let mut tr =
            TrackerState::new(&arms, TrackingMode::NoAveraging, Allocation::uniform(2)).unwrap();
        let design = DesignState::for_arm_set(&arms);
        let (arm, forced) = tr.next_arm(&design);
        assert!(forced);
        assert_eq!(arm, tr.exploration_set()[0]);
        assert_eq!(tr.forced_index(), 1);
    }

    fn simulate_tracking(
        mode: TrackingMode,
        w: Allocation,
        rounds: u64,
    ) -> (TrackerState, DesignState) {
        let arms = ortho_arms();
        let mut tr = TrackerState::new(&arms, mode, w).unwrap();
        let mut design = DesignState::for_arm_set(&arms);
        for _ in 0..rounds {
            let (i, _) = tr.next_arm(&design);
            design.update(arms.arm(i), Some(i), 0.0).unwrap();
            tr.accumulate();
        }
        (tr, design)
    }

    #[test]
    fn constant_target_is_tracked() {
        for mode in [TrackingMode::NoAveraging, TrackingMode::Averaging] {
            for t in [1u64, 2, 3, 10, 101, 1000] {
                let (_, design) = simulate_tracking(mode, Allocation::uniform(2), t);
                for &n in design.counts().unwrap() {
                    assert!(
                        (n as f64 - t as f64 / 2.0).abs() <= 3.0,
                        "{mode} t={t} n={n}"
                    );
                }
            }
        }
    }

    #[test]
    fn single_support_target() {
        let arms = orthonormal_instance(vec![1.0, 0.0], 1.0).unwrap().arm_set;
        let mut tr =
            TrackerState::new(&arms, TrackingMode::NoAveraging, Allocation::uniform(2)).unwrap();
        let mut design = DesignState::for_arm_set(&arms);
        for _ in 0..6 {
            let (i, _) = tr.next_arm(&design);
            design.update(arms.arm(i), Some(i), 0.0).unwrap();
        }
        tr.set_allocation(Allocation::vertex(2, 1));
        let mut non_forced = 0;
        for _ in 0..50 {
            let before = design.counts().unwrap()[1];
            let (i, forced) = tr.next_arm(&design);
            if !forced {
                assert_eq!(i, 1);
                non_forced += 1;
            }
            design.update(arms.arm(i), Some(i), 0.0).unwrap();
            if !forced {
                assert_eq!(design.counts().unwrap()[1], before + 1);
            }
        }
        assert!(non_forced > 0);
    }

    #[test]
    fn lazy_update_respects_schedule_and_ties() {
        let inst = gen_many_arms(20, 3).unwrap();
        let arms = &inst.arm_set;
        let init = Allocation::uniform_over(arms.len(), &arms.spanning_subset());
        let mut tr = TrackerState::new(arms, TrackingMode::NoAveraging, init.clone()).unwrap();
        let mut design = DesignState::for_arm_set(arms);
        let settings = OptimizerSettings::default();
        // t = 0 is never an update round.
        assert!(!maybe_update_allocation(
            &mut tr,
            LazySchedule::Exponential,
            &design,
            arms,
            &settings
        ));
        design.update(&[1.0, 0.0], Some(0), 1.0).unwrap();
        design.update(&[0.0, 1.0], None, 0.0).unwrap();
        design.update(&[0.0, 1.0], None, 0.0).unwrap();
        // t = 3 is not in the exponential schedule.
        assert!(!maybe_update_allocation(
            &mut tr,
            LazySchedule::Exponential,
            &design,
            arms,
            &settings
        ));
        assert_eq!(tr.allocation(), &init);
        design.update(&[1.0, 0.0], None, 1.0).unwrap();
        assert!(maybe_update_allocation(
            &mut tr,
            LazySchedule::Exponential,
            &design,
            arms,
            &settings
        ));
        assert_ne!(tr.allocation(), &init);

        // A zero estimate ties every arm: no update.
        let mut tr = TrackerState::new(arms, TrackingMode::NoAveraging, init.clone()).unwrap();
        let mut zero = DesignState::for_arm_set(arms);
        zero.update(&[1.0, 0.0], None, 0.0).unwrap();
        zero.update(&[0.0, 1.0], None, 0.0).unwrap();
        assert!(!maybe_update_allocation(
            &mut tr,
            LazySchedule::EveryRound,
            &zero,
            arms,
            &settings
        ));
        assert_eq!(tr.allocation(), &init);
    }

    #[test]
    fn gllr_examples() {
        let design = design_with(&[2.0, 2.0], &[0.5, 0.1]);
        assert_abs_diff_eq!(design.estimate()[0], 0.5, epsilon = 1e-12);
        let z = gllr_pair(&design, &[1.0, 0.0], &[0.0, 1.0], 0.0).unwrap();
        assert_abs_diff_eq!(z, 0.08, epsilon = 1e-12);
        let swapped = gllr_pair(&design, &[0.0, 1.0], &[1.0, 0.0], 0.0).unwrap();
        assert_abs_diff_eq!(swapped, -0.08, epsilon = 1e-12);
        // mu_hat^T (a - b) = 0.4 = -eps.
        assert_eq!(
            gllr_pair(&design, &[1.0, 0.0], &[0.0, 1.0], -0.4).unwrap(),
            0.0
        );
        assert!(matches!(
            gllr_pair(&design, &[1.0, 0.0], &[1.0, 0.0], 0.0),
            Err(Error::InvalidInput(_))
        ));
        let singular = design_with(&[2.0, 0.0], &[0.5, 0.0]);
        assert!(matches!(
            gllr_pair(&singular, &[1.0, 0.0], &[0.0, 1.0], 0.0),
            Err(Error::SingularDesign)
        ));
    }

    #[test]
    fn statistic_examples() {
        let arms = ortho_arms();
        let m = 7.0;
        let design = design_with(&[m, m], &[0.9, 0.3]);
        let (z, a_hat) = stopping_statistic(&design, &arms).unwrap();
        assert_eq!(a_hat, 0);
        assert_abs_diff_eq!(z, m * 0.6f64.powi(2) / 4.0, epsilon = 1e-12);

        let tied = design_with(&[m, m], &[0.4, 0.4]);
        assert_eq!(stopping_statistic(&tied, &arms).unwrap().0, 0.0);
    }

    #[test]
    fn statistic_matches_t_psi() {
        let inst = gen_many_arms(12, 5).unwrap();
        let arms = &inst.arm_set;
        let mut design = DesignState::for_arm_set(arms);
        let mut env = RewardStream::new(&inst, 11);
        for t in 0..300usize {
            let i = (t * 5 + t / 7) % arms.len();
            let a = arms.arm(i);
            design
                .update(a, Some(i), env.sample_reward(a).unwrap())
                .unwrap();
            if !design.is_invertible() || arms.unique_argmax(design.estimate(), 1e-9).is_none() {
                continue;
            }
            let (z, _) = stopping_statistic(&design, arms).unwrap();
            let n = design.t() as f64;
            let w = Allocation::normalized(
                design
                    .counts()
                    .unwrap()
                    .iter()
                    .map(|&c| c as f64 / n)
                    .collect(),
            )
            .unwrap();
            let via_psi = n * psi(design.estimate(), &w, arms).unwrap();
            assert!(
                (z - via_psi).abs() <= 1e-8 * z.max(1.0),
                "t={n}: {z} vs {via_psi}"
            );
        }
    }

    #[test]
    fn beta_examples() {
        let cfg = StopConfig::new(0.05, 1.0, 1.0, 1.0, false).unwrap();
        let empty = DesignState::new_continuous(2);
        assert_abs_diff_eq!(
            beta_threshold(&empty, &cfg, 0),
            2.0 * 20f64.ln(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(beta_threshold(&empty, &cfg, 0), 5.9915, epsilon = 1e-4);
        let design = design_with(&[3.0, 1.0], &[0.0, 0.0]);
        let expected = 2.0 * (0.5 * 8f64.ln() + 20f64.ln());
        assert_abs_diff_eq!(beta_threshold(&design, &cfg, 2), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 8.0709, epsilon = 1e-4);
    }

    #[test]
    fn beta_bounded_by_dimension_rate() {
        let inst = gen_many_arms(50, 1).unwrap();
        let cfg = StopConfig::for_instance(&inst, 0.05, ThresholdProfile::PaperMain).unwrap();
        let cfg = StopConfig {
            inflate_delta: false,
            ..cfg
        };
        let mut design = DesignState::for_arm_set(&inst.arm_set);
        for t in 0..500usize {
            let i = (t * 13) % 50;
            design.update(inst.arm_set.arm(i), Some(i), 0.0).unwrap();
            let tt = design.t() as f64;
            let d = inst.dim() as f64;
            let bound = 2.0 * ((tt + 1.0).powf(d / 2.0) / 0.05).ln();
            assert!(beta_threshold(&design, &cfg, design.t()) <= bound + 1e-12);
        }
    }

    #[test]
    fn inflated_delta() {
        let cfg = StopConfig::new(0.05, 1.0, 1.0, 1.0, true).unwrap();
        assert_abs_diff_eq!(
            cfg.effective_delta(2),
            6.0 * 0.05 / (PI * PI * 4.0),
            epsilon = 1e-15
        );
        assert_eq!(cfg.effective_delta(0), cfg.effective_delta(1));
    }

    #[test]
    fn stop_conditions() {
        let arms = ortho_arms();
        let cfg = StopConfig::new(0.05, 1.0, 1.0, 1.0, false).unwrap();
        assert!(!should_stop(&DesignState::for_arm_set(&arms), &cfg, &arms));
        // lambda_min >= c but a tiny gap keeps Z below beta.
        let design = design_with(&[4.0, 4.0], &[0.51, 0.5]);
        assert!(design.min_eig() >= cfg.c);
        assert!(!should_stop(&design, &cfg, &arms));
        let clear = design_with(&[400.0, 400.0], &[1.0, 0.0]);
        assert!(should_stop(&clear, &cfg, &arms));
    }

    #[test]
    fn noiseless_runs_stop_correctly() {
        let inst = orthonormal_instance(vec![1.0, 0.0], 1e-6).unwrap();
        let rec = run_lts(&inst, &LtsConfig::default(), 3).unwrap();
        assert!(!rec.incomplete && rec.correct);
        assert!(rec.tau >= inst.dim() as u64);
        let inst = orthonormal_instance(vec![1.0, 0.0], 1e-9).unwrap();
        let rec = run_lts(&inst, &LtsConfig::default(), 3).unwrap();
        assert_eq!(rec.answer, Answer::Arm(0));
    }

    #[test]
    fn cap_yields_incomplete_record() {
        let inst = gen_many_arms(10, 2).unwrap();
        let cfg = LtsConfig {
            max_t: 5,
            ..LtsConfig::default()
        };
        let rec = run_lts(&inst, &cfg, 0).unwrap();
        assert!(rec.incomplete);
        assert_eq!(rec.tau, 5);
    }

    #[test]
    fn runs_are_deterministic() {
        let inst = gen_many_arms(30, 4).unwrap();
        let cfg = LtsConfig::default();
        let mut a = run_lts(&inst, &cfg, 9).unwrap();
        let mut b = run_lts(&inst, &cfg, 9).unwrap();
        a.wall_time_s = 0.0;
        b.wall_time_s = 0.0;
        assert_eq!(a, b);
    }

    #[test]
    fn trace_reports_every_round() {
        let inst = gen_many_arms(10, 1).unwrap();
        let mut rounds = Vec::new();
        let mut obs = |r: &RoundTrace| rounds.push(*r);
        let rec = run_lts_traced(&inst, &LtsConfig::default(), 2, Some(&mut obs)).unwrap();
        assert_eq!(rounds.len() as u64, rec.tau);
        assert!(rounds.windows(2).all(|w| w[1].t == w[0].t + 1));
        assert!(rounds[0].forced);
    }
}
