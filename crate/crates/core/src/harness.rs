//! Batch experiments: run trials in parallel, aggregate, persist.
//!
//! Trial `i` uses seed `seed_base + i` and results are merged by trial index,
//! so a table is a pure function of its [`BenchConfig`]. Wall-clock timing is
//! opt-in (`timing`); when disabled every `wall_time_s` is recorded as 0 to
//! keep outputs byte-identical across reruns.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{Allocation, OptimizerSettings};
use crate::baselines::{run_oracle_tracking, run_static};
use crate::error::{Error, Result};
use crate::instance::{gen_many_arms, orthonormal_instance, ArmSet, Instance};
use crate::lts::{
    algorithm_id, run_lts, LazySchedule, LtsConfig, ThresholdProfile, TrackingMode, DEFAULT_MAX_T,
};
use crate::record::RunRecord;
use crate::sphere::{run_sphere, EpsilonRule, SphereConfig};

/// Version of the CSV / JSON output schemas.
pub const FORMAT_VERSION: u32 = 1;

pub const CSV_HEADER: &str =
    "algorithm,instance,trials,mean_tau,std_tau,error_rate,mean_support,mean_time_s,incomplete";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    ManyArms {
        k: usize,
        seed: u64,
    },
    Orthonormal {
        mu: Vec<f64>,
        #[serde(default = "one")]
        sigma: f64,
    },
    Sphere {
        mu: Vec<f64>,
        #[serde(default = "one")]
        sigma: f64,
    },
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

impl InstanceSpec {
    pub fn build(&self) -> Result<Instance> {
        match self {
            InstanceSpec::ManyArms { k, seed } => gen_many_arms(*k, *seed),
            InstanceSpec::Orthonormal { mu, sigma } => orthonormal_instance(mu.clone(), *sigma),
            InstanceSpec::Sphere { mu, sigma } => {
                Instance::new(ArmSet::sphere(mu.len())?, mu.clone(), *sigma)
            }
            InstanceSpec::File { path } => Instance::load(path),
        }
    }

    pub fn label(&self) -> String {
        match self {
            InstanceSpec::ManyArms { k, seed } => format!("many-arms-k{k}-s{seed}"),
            InstanceSpec::Orthonormal { mu, .. } => format!("orthonormal-d{}", mu.len()),
            InstanceSpec::Sphere { mu, .. } => format!("sphere-d{}", mu.len()),
            InstanceSpec::File { path } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Lts {
        #[serde(default)]
        mode: TrackingMode,
        #[serde(default)]
        schedule: LazySchedule,
        #[serde(default)]
        profile: ThresholdProfile,
    },
    Oracle {
        #[serde(default)]
        profile: ThresholdProfile,
    },
    /// Tracks `weights`, or the uniform allocation when absent.
    Static {
        #[serde(default)]
        profile: ThresholdProfile,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    Sphere {
        epsilon: f64,
        #[serde(default)]
        rule: EpsilonRule,
    },
}

impl AlgorithmSpec {
    pub fn label(&self) -> String {
        match self {
            AlgorithmSpec::Lts {
                mode,
                schedule,
                profile,
            } => format!("{}/{schedule}/{profile}", algorithm_id(*mode)),
            AlgorithmSpec::Oracle { profile } => format!("oracle/{profile}"),
            AlgorithmSpec::Static { profile, .. } => format!("static/{profile}"),
            AlgorithmSpec::Sphere { epsilon, .. } => format!("sphere/eps{epsilon}"),
        }
    }

    fn run(&self, instance: &Instance, common: &BenchConfig, seed: u64) -> Result<RunRecord> {
        let lts_cfg =
            |mode: TrackingMode, schedule: LazySchedule, profile: ThresholdProfile| LtsConfig {
                delta: common.delta,
                profile,
                schedule,
                mode,
                optimizer: common.optimizer,
                max_t: common.max_t,
                ..LtsConfig::default()
            };
        match self {
            AlgorithmSpec::Lts {
                mode,
                schedule,
                profile,
            } => run_lts(instance, &lts_cfg(*mode, *schedule, *profile), seed),
            AlgorithmSpec::Oracle { profile } => run_oracle_tracking(
                instance,
                &lts_cfg(
                    TrackingMode::NoAveraging,
                    LazySchedule::Exponential,
                    *profile,
                ),
                seed,
            ),
            AlgorithmSpec::Static { profile, weights } => {
                let w = match weights {
                    Some(w) => Allocation::new(w.clone())?,
                    None => Allocation::uniform(instance.arm_set.len()),
                };
                run_static(
                    instance,
                    &lts_cfg(
                        TrackingMode::NoAveraging,
                        LazySchedule::Exponential,
                        *profile,
                    ),
                    seed,
                    &w,
                )
            }
            AlgorithmSpec::Sphere { epsilon, rule } => {
                let cfg = SphereConfig {
                    epsilon: *epsilon,
                    delta: common.delta,
                    rule: *rule,
                    max_t: common.max_t,
                    ..SphereConfig::default()
                };
                run_sphere(instance, &cfg, seed)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub instance: InstanceSpec,
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub trials: usize,
    #[serde(default)]
    pub seed_base: u64,
    /// Worker threads; 0 uses all cores.
    #[serde(default)]
    pub jobs: usize,
    /// Output CSV path; the JSON goes next to it with a `.json` extension.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub timing: bool,
    #[serde(default = "default_max_t")]
    pub max_t: u64,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
}

fn default_delta() -> f64 {
    0.05
}

fn default_max_t() -> u64 {
    DEFAULT_MAX_T
}

impl BenchConfig {
    pub fn new(
        instance: InstanceSpec,
        algorithms: Vec<AlgorithmSpec>,
        delta: f64,
        trials: usize,
    ) -> Self {
        Self {
            instance,
            algorithms,
            delta,
            trials,
            seed_base: 0,
            jobs: 0,
            out: None,
            timing: false,
            max_t: DEFAULT_MAX_T,
            optimizer: OptimizerSettings::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config("at least one algorithm is required"));
        }
        if self.max_t == 0 {
            return Err(Error::config("max_t must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub instance: String,
    pub trials: usize,
    /// Over complete runs only.
    pub mean_tau: f64,
    /// Sample standard deviation over complete runs.
    pub std_tau: f64,
    /// Fraction of complete runs with a wrong answer.
    pub error_rate: f64,
    pub mean_support: f64,
    pub mean_time_s: f64,
    pub incomplete: usize,
}

impl SummaryRow {
    pub fn from_records(algorithm: &str, instance: &str, records: &[RunRecord]) -> Self {
        let done: Vec<&RunRecord> = records.iter().filter(|r| !r.incomplete).collect();
        let n = done.len() as f64;
        let mean = |f: &dyn Fn(&RunRecord) -> f64| done.iter().map(|r| f(r)).sum::<f64>() / n;
        let mean_tau = mean(&|r| r.tau as f64);
        let std_tau = if done.len() > 1 {
            (done
                .iter()
                .map(|r| (r.tau as f64 - mean_tau).powi(2))
                .sum::<f64>()
                / (n - 1.0))
                .sqrt()
        } else {
            0.0
        };
        Self {
            algorithm: algorithm.to_string(),
            instance: instance.to_string(),
            trials: records.len(),
            mean_tau,
            std_tau,
            error_rate: mean(&|r| if r.correct { 0.0 } else { 1.0 }),
            mean_support: mean(&|r| r.support_size as f64),
            mean_time_s: mean(&|r| r.wall_time_s),
            incomplete: records.len() - done.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTable {
    pub format_version: u32,
    pub config: BenchConfig,
    pub rows: Vec<SummaryRow>,
    /// Per-run records, grouped by algorithm in config order, then by trial.
    pub records: Vec<RunRecord>,
}

impl BenchTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.algorithm,
                r.instance,
                r.trials,
                r.mean_tau,
                r.std_tau,
                r.error_rate,
                r.mean_support,
                r.mean_time_s,
                r.incomplete
            );
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes `path` (CSV) and the same path with a `.json` extension.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv())?;
        std::fs::write(path.with_extension("json"), self.to_json()?)?;
        Ok(())
    }
}

fn run_trials(
    spec: &AlgorithmSpec,
    instance: &Instance,
    cfg: &BenchConfig,
    instance_label: &str,
) -> Result<Vec<RunRecord>> {
    let one = |i: usize| -> Result<RunRecord> {
        let mut rec = spec.run(instance, cfg, cfg.seed_base + i as u64)?;
        rec.algorithm = spec.label();
        rec.instance = instance_label.to_string();
        if !cfg.timing {
            rec.wall_time_s = 0.0;
        }
        Ok(rec)
    };
    (0..cfg.trials).into_par_iter().map(one).collect()
}

/// Runs every algorithm of `cfg` for `cfg.trials` seeds and aggregates.
pub fn bench(cfg: &BenchConfig) -> Result<BenchTable> {
    cfg.validate()?;
    let instance = cfg.instance.build()?;
    let label = cfg.instance.label();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))?;
    let mut rows = Vec::with_capacity(cfg.algorithms.len());
    let mut records = Vec::new();
    for spec in &cfg.algorithms {
        let recs = pool.install(|| run_trials(spec, &instance, cfg, &label))?;
        let row = SummaryRow::from_records(&spec.label(), &label, &recs);
        log::info!(
            "{}: mean tau {:.1} (std {:.1}), errors {:.3}, incomplete {}",
            row.algorithm,
            row.mean_tau,
            row.std_tau,
            row.error_rate,
            row.incomplete
        );
        rows.push(row);
        records.extend(recs);
    }
    let table = BenchTable {
        format_version: FORMAT_VERSION,
        config: cfg.clone(),
        rows,
        records,
    };
    if let Some(out) = &cfg.out {
        table.write(out)?;
    }
    Ok(table)
}
