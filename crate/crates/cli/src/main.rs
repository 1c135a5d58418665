use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lts_core::harness::InstanceSpec;
use lts_core::lts::{run_lts_traced, RoundTrace};
use lts_core::sphere::{run_sphere, SphereConfig};
use lts_core::{
    bench, characteristic_time, kl_bernoulli, run_oracle_tracking, run_static, sphere_lower_bound,
    AlgorithmSpec, Allocation, ArmKind, BenchConfig, EpsilonRule, LazySchedule, LtsConfig,
    ThresholdProfile, TrackingMode,
};

#[derive(Parser)]
#[command(
    name = "lts",
    version,
    about = "Lazy Track-and-Stop best-arm identification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a many-arms benchmark instance as CSV.
    GenInstance {
        #[arg(long, short = 'k')]
        arms: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one trial and print a per-round trace.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "lts", value_parser = ["lts", "oracle", "static"])]
        algorithm: String,
        /// Print only the final record.
        #[arg(long)]
        quiet: bool,
    },
    /// Monte-Carlo benchmark over many seeds.
    Bench {
        #[command(flatten)]
        common: Common,
        /// JSON config file; replaces all other options except --out, --jobs and --timing.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Algorithms to compare.
        #[arg(long, value_delimiter = ',', default_value = "lts", value_parser = ["lts", "oracle", "static"])]
        algorithms: Vec<String>,
        #[command(flatten)]
        batch: Batch,
    },
    /// Print T* and the sample-complexity lower bound.
    LowerBound {
        #[arg(long)]
        instance: String,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// Target accuracy (sphere instances).
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
    },
    /// Monte-Carlo benchmark of the sphere algorithm.
    SphereBench {
        /// Sphere instance spec; defaults to the unit diagonal direction in --dim dimensions.
        #[arg(long)]
        instance: Option<String>,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value = "sqrt-log", value_parser = ["sqrt-log", "log-confidence"])]
        rule: String,
        #[command(flatten)]
        batch: Batch,
    },
}

#[derive(Args)]
struct Common {
    /// Instance: a CSV path, `many-arms:K[:SEED]`, `orthonormal:MU1,MU2,...` or `sphere:MU1,...`.
    #[arg(long, default_value = "many-arms:1000")]
    instance: String,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Lazy update schedule: exp, every or period:P.
    #[arg(long, default_value = "exp")]
    schedule: String,
    /// Tracking mode: avg or noavg.
    #[arg(long, default_value = "noavg")]
    mode: String,
    /// Threshold profile: paper-main or paper-appendix.
    #[arg(long, default_value = "paper-appendix")]
    profile: String,
}

#[derive(Args)]
struct Batch {
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// First trial seed; trial i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// CSV output path (a .json with per-run records is written alongside).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall-clock times (makes outputs run-dependent).
    #[arg(long)]
    timing: bool,
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .with_context(|| format!("bad number '{x}'"))
        })
        .collect()
}

fn parse_instance(s: &str) -> Result<InstanceSpec> {
    if let Some(rest) = s.strip_prefix("many-arms:") {
        let mut parts = rest.split(':');
        let k = parts
            .next()
            .unwrap_or_default()
            .parse()
            .context("bad arm count")?;
        let seed = match parts.next() {
            Some(p) => p.parse().context("bad instance seed")?,
            None => 0,
        };
        return Ok(InstanceSpec::ManyArms { k, seed });
    }
    if let Some(rest) = s.strip_prefix("orthonormal:") {
        return Ok(InstanceSpec::Orthonormal {
            mu: parse_floats(rest)?,
            sigma: 1.0,
        });
    }
    if let Some(rest) = s.strip_prefix("sphere:") {
        return Ok(InstanceSpec::Sphere {
            mu: parse_floats(rest)?,
            sigma: 1.0,
        });
    }
    Ok(InstanceSpec::File {
        path: PathBuf::from(s),
    })
}

fn lts_config(common: &Common) -> Result<LtsConfig> {
    Ok(LtsConfig {
        delta: common.delta,
        schedule: common.schedule.parse::<LazySchedule>()?,
        mode: common.mode.parse::<TrackingMode>()?,
        profile: common.profile.parse::<ThresholdProfile>()?,
        ..LtsConfig::default()
    })
}

fn algorithm_spec(name: &str, cfg: &LtsConfig) -> AlgorithmSpec {
    match name {
        "oracle" => AlgorithmSpec::Oracle {
            profile: cfg.profile,
        },
        "static" => AlgorithmSpec::Static {
            profile: cfg.profile,
            weights: None,
        },
        _ => AlgorithmSpec::Lts {
            mode: cfg.mode,
            schedule: cfg.schedule,
            profile: cfg.profile,
        },
    }
}

fn print_trace(r: &RoundTrace) {
    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
    println!(
        "t={} arm={} forced={} reward={:.6} min_eig={:.6} updated={} z={} beta={}",
        r.t,
        r.arm,
        r.forced,
        r.reward,
        r.min_eig,
        r.updated,
        fmt(r.z),
        fmt(r.beta)
    );
}

fn finish_batch(cfg: &mut BenchConfig, batch: &Batch) -> Result<()> {
    cfg.jobs = batch.jobs;
    cfg.timing = batch.timing;
    if batch.out.is_some() {
        cfg.out.clone_from(&batch.out);
    }
    let table = bench(cfg)?;
    if cfg.out.is_none() {
        std::io::stdout().write_all(table.to_csv().as_bytes())?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenInstance { arms, seed, out } => {
            let inst = lts_core::gen_many_arms(arms, seed)?;
            match out {
                Some(p) => inst.save(&p)?,
                None => print!("{}", inst.to_csv()),
            }
        }
        Command::Run {
            common,
            seed,
            algorithm,
            quiet,
        } => {
            let inst = parse_instance(&common.instance)?.build()?;
            if inst.arm_set.kind() == ArmKind::Sphere {
                bail!("use sphere-bench for sphere instances");
            }
            let cfg = lts_config(&common)?;
            let mut record = match algorithm.as_str() {
                "oracle" => run_oracle_tracking(&inst, &cfg, seed)?,
                "static" => {
                    run_static(&inst, &cfg, seed, &Allocation::uniform(inst.arm_set.len()))?
                }
                _ => {
                    let mut obs = |r: &RoundTrace| print_trace(r);
                    let observer: Option<&mut dyn FnMut(&RoundTrace)> =
                        if quiet { None } else { Some(&mut obs) };
                    run_lts_traced(&inst, &cfg, seed, observer)?
                }
            };
            record.instance = common.instance.clone();
            record.wall_time_s = 0.0;
            println!("{}", serde_json::to_string(&record)?);
        }
        Command::Bench {
            common,
            config,
            algorithms,
            batch,
        } => {
            let mut cfg = match config {
                Some(path) => BenchConfig::load(&path)
                    .with_context(|| format!("reading config {}", path.display()))?,
                None => {
                    let lts = lts_config(&common)?;
                    let mut cfg = BenchConfig::new(
                        parse_instance(&common.instance)?,
                        algorithms.iter().map(|a| algorithm_spec(a, &lts)).collect(),
                        common.delta,
                        batch.trials,
                    );
                    cfg.seed_base = batch.seed;
                    cfg
                }
            };
            finish_batch(&mut cfg, &batch)?;
        }
        Command::LowerBound {
            instance,
            delta,
            epsilon,
        } => {
            let inst = parse_instance(&instance)?.build()?;
            let kl = kl_bernoulli(delta, 1.0 - delta)?;
            if inst.arm_set.kind() == ArmKind::Sphere {
                let cfg = SphereConfig {
                    epsilon,
                    delta,
                    ..SphereConfig::default()
                };
                println!("kl={kl}");
                println!("lower_bound={}", sphere_lower_bound(&inst, &cfg)?);
            } else {
                let t_star = characteristic_time(&inst.mu, &inst.arm_set)?;
                println!("t_star={t_star}");
                println!("kl={kl}");
                println!("lower_bound={}", inst.sigma * inst.sigma * t_star * kl);
            }
        }
        Command::SphereBench {
            instance,
            dim,
            epsilon,
            delta,
            rule,
            batch,
        } => {
            let spec = match instance {
                Some(s) => parse_instance(&s)?,
                None => {
                    if dim < 1 {
                        bail!("--dim must be at least 1");
                    }
                    InstanceSpec::Sphere {
                        mu: vec![1.0 / (dim as f64).sqrt(); dim],
                        sigma: 1.0,
                    }
                }
            };
            if !matches!(spec, InstanceSpec::Sphere { .. }) {
                bail!("sphere-bench needs a sphere instance");
            }
            let rule = match rule.as_str() {
                "log-confidence" => EpsilonRule::LogConfidence,
                _ => EpsilonRule::SqrtLog,
            };
            // Fail fast on an invalid config before spawning trials.
            let inst = spec.build()?;
            run_sphere(
                &inst,
                &SphereConfig {
                    epsilon,
                    delta,
                    rule,
                    max_t: 1,
                    ..SphereConfig::default()
                },
                0,
            )?;
            let mut cfg = BenchConfig::new(
                spec,
                vec![AlgorithmSpec::Sphere { epsilon, rule }],
                delta,
                batch.trials,
            );
            cfg.seed_base = batch.seed;
            finish_batch(&mut cfg, &batch)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
