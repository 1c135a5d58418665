//! Reference sampling rules paired with the LTS stopping rule.

use crate::allocation::{
    design_inverse, optimize_allocation, Allocation, CHARACTERISTIC_TIME_SETTINGS,
};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::lts::{run_tracking, LtsConfig, TargetSource};
use crate::record::RunRecord;

pub const ORACLE_ID: &str = "oracle";
pub const STATIC_ID: &str = "static";

/// An optimal allocation for the true parameter.
pub fn oracle_allocation(instance: &Instance) -> Result<Allocation> {
    let s = CHARACTERISTIC_TIME_SETTINGS;
    Ok(optimize_allocation(&instance.mu, &instance.arm_set, None, s.tol, s.max_iter)?.allocation)
}

/// Tracks a precomputed optimal allocation of the true `mu`.
pub fn run_oracle_tracking(instance: &Instance, cfg: &LtsConfig, seed: u64) -> Result<RunRecord> {
    let w = oracle_allocation(instance)?;
    run_fixed(instance, cfg, seed, w, ORACLE_ID)
}

/// Tracks `w`, which must give an invertible design.
pub fn run_static(
    instance: &Instance,
    cfg: &LtsConfig,
    seed: u64,
    w: &Allocation,
) -> Result<RunRecord> {
    if w.len() != instance.arm_set.len() {
        return Err(Error::input(format!(
            "allocation has {} weights for {} arms",
            w.len(),
            instance.arm_set.len()
        )));
    }
    if design_inverse(&instance.arm_set, w).is_none() {
        return Err(Error::input("static allocation has a singular design"));
    }
    run_fixed(instance, cfg, seed, w.clone(), STATIC_ID)
}

fn run_fixed(
    instance: &Instance,
    cfg: &LtsConfig,
    seed: u64,
    w: Allocation,
    id: &str,
) -> Result<RunRecord> {
    let stop = cfg.stop_config(instance)?;
    run_tracking(
        instance,
        &stop,
        cfg.mode,
        TargetSource::Fixed(w),
        &cfg.optimizer,
        cfg.max_t,
        seed,
        id.to_string(),
        None,
    )
}
