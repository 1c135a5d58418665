//! Arm sets, problem instances and the benchmark generators.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, SymMatrix};
use crate::rng::{GaussianSource, Stream};
use crate::tol;

/// Standard deviation of the angular perturbations in the many-arms benchmark.
pub const MANY_ARMS_PHI_STD: f64 = 0.09;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmKind {
    Finite,
    /// The unit sphere of the ambient space; the stored arms are the
    /// orthonormal basis used for round-robin sampling.
    Sphere,
}

/// The action space: `K` arms of dimension `d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSet {
    dim: usize,
    arms: Vec<f64>,
    max_norm: f64,
    kind: ArmKind,
}

impl ArmSet {
    /// A finite arm set. Requires `K >= 2` arms spanning `R^d`.
    pub fn finite(arms: Vec<Vec<f64>>) -> Result<Self> {
        if arms.len() < 2 {
            return Err(Error::instance(format!(
                "a finite arm set needs at least 2 arms, got {}",
                arms.len()
            )));
        }
        let dim = arms[0].len();
        if dim == 0 {
            return Err(Error::instance("arms must have positive dimension"));
        }
        let mut flat = Vec::with_capacity(arms.len() * dim);
        for (i, a) in arms.iter().enumerate() {
            if a.len() != dim {
                return Err(Error::instance(format!(
                    "arm {i} has dimension {}, expected {dim}",
                    a.len()
                )));
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(Error::instance(format!("arm {i} has non-finite entries")));
            }
            flat.extend_from_slice(a);
        }
        let set = Self::from_flat(dim, flat, ArmKind::Finite);
        let spectrum = set.gram().spectrum()?;
        if !spectrum.is_invertible() {
            return Err(Error::instance("arms do not span the ambient space"));
        }
        Ok(set)
    }

    /// The unit sphere `S^{d-1}`, sampled through the standard basis.
    pub fn sphere(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::instance("sphere dimension must be positive"));
        }
        let flat = gen_orthonormal_basis(dim).concat();
        Ok(Self::from_flat(dim, flat, ArmKind::Sphere))
    }

    fn from_flat(dim: usize, arms: Vec<f64>, kind: ArmKind) -> Self {
        let max_norm = arms.chunks_exact(dim).map(norm).fold(0.0f64, f64::max);
        Self {
            dim,
            arms,
            max_norm,
            kind,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> ArmKind {
        self.kind
    }

    pub fn is_finite(&self) -> bool {
        self.kind == ArmKind::Finite
    }

    /// Number of stored arms (the basis size for a sphere).
    pub fn len(&self) -> usize {
        self.arms.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn arm(&self, i: usize) -> &[f64] {
        &self.arms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.arms.chunks_exact(self.dim)
    }

    /// `L = max_a |a|`.
    pub fn max_norm(&self) -> f64 {
        self.max_norm
    }

    pub fn max_norm_sq(&self) -> f64 {
        self.max_norm * self.max_norm
    }

    /// `sum_a a a^T` over all stored arms.
    pub fn gram(&self) -> SymMatrix {
        self.weighted_gram_iter(self.iter().map(|_| 1.0))
    }

    /// `sum_a w_a a a^T`.
    pub fn weighted_gram(&self, weights: &[f64]) -> SymMatrix {
        self.weighted_gram_iter(weights.iter().copied())
    }

    fn weighted_gram_iter(&self, weights: impl Iterator<Item = f64>) -> SymMatrix {
        let mut g = SymMatrix::zeros(self.dim);
        for (a, w) in self.iter().zip(weights) {
            if w != 0.0 {
                g.add_outer(a, w);
            }
        }
        g
    }

    /// Inner products `theta^T a` for every arm.
    pub fn values(&self, theta: &[f64]) -> Vec<f64> {
        self.iter().map(|a| dot(a, theta)).collect()
    }

    /// Index of the largest `theta^T a`, ties broken by the lowest index.
    pub fn argmax(&self, theta: &[f64]) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (i, a) in self.iter().enumerate() {
            let v = dot(a, theta);
            if v > best_val {
                best = i;
                best_val = v;
            }
        }
        best
    }

    /// The best arm of `theta` when it beats every other arm by more than `gap`.
    pub fn unique_argmax(&self, theta: &[f64], gap: f64) -> Option<usize> {
        let best = self.argmax(theta);
        let top = dot(self.arm(best), theta);
        let unique = self
            .iter()
            .enumerate()
            .all(|(i, a)| i == best || top - dot(a, theta) > gap);
        unique.then_some(best)
    }

    /// Greedy max-volume selection of `d` spanning arms (Gram-Schmidt pivoting).
    pub fn spanning_subset(&self) -> Vec<usize> {
        let mut residual = self.arms.clone();
        let mut chosen = Vec::with_capacity(self.dim);
        for _ in 0..self.dim {
            let mut best = None;
            let mut best_norm = 0.0;
            for (i, r) in residual.chunks_exact(self.dim).enumerate() {
                if chosen.contains(&i) {
                    continue;
                }
                let n = norm(r);
                if n > best_norm * (1.0 + 1e-12) {
                    best = Some(i);
                    best_norm = n;
                }
            }
            let Some(pick) = best else { break };
            if best_norm <= 0.0 {
                break;
            }
            chosen.push(pick);
            let u: Vec<f64> = residual[pick * self.dim..(pick + 1) * self.dim]
                .iter()
                .map(|x| x / best_norm)
                .collect();
            for r in residual.chunks_exact_mut(self.dim) {
                let proj = dot(r, &u);
                for (ri, ui) in r.iter_mut().zip(&u) {
                    *ri -= proj * ui;
                }
            }
        }
        chosen
    }
}

/// Arm set + true parameter + noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub arm_set: ArmSet,
    pub mu: Vec<f64>,
    pub sigma: f64,
}

impl Instance {
    pub fn new(arm_set: ArmSet, mu: Vec<f64>, sigma: f64) -> Result<Self> {
        if mu.len() != arm_set.dim() {
            return Err(Error::instance(format!(
                "mu has dimension {}, arms have dimension {}",
                mu.len(),
                arm_set.dim()
            )));
        }
        if mu.iter().any(|x| !x.is_finite()) {
            return Err(Error::instance("mu has non-finite entries"));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::instance(format!(
                "sigma must be non-negative, got {sigma}"
            )));
        }
        match arm_set.kind() {
            ArmKind::Finite => {
                if arm_set.unique_argmax(&mu, tol::BEST_ARM_GAP).is_none() {
                    return Err(Error::instance("the best arm of mu is not unique"));
                }
            }
            ArmKind::Sphere => {
                if norm(&mu) <= 0.0 {
                    return Err(Error::instance("mu must be non-zero on the sphere"));
                }
            }
        }
        Ok(Self { arm_set, mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.arm_set.dim()
    }

    /// Index of the best arm (finite kind).
    pub fn best_arm(&self) -> usize {
        self.arm_set.argmax(&self.mu)
    }

    /// `mu / |mu|`, the best arm on the sphere.
    pub fn best_direction(&self) -> Vec<f64> {
        let n = norm(&self.mu);
        self.mu.iter().map(|x| x / n).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    /// Serializes as `d,K,sigma`, then one arm per line, then `mu,...`.
    /// A sphere instance is written with `K = 0` and no arm lines.
    pub fn to_csv(&self) -> String {
        let k = if self.arm_set.is_finite() {
            self.arm_set.len()
        } else {
            0
        };
        let mut out = String::new();
        let _ = writeln!(out, "{},{},{}", self.dim(), k, fmt_f64(self.sigma));
        if self.arm_set.is_finite() {
            for a in self.arm_set.iter() {
                let _ = writeln!(out, "{}", join_f64(a));
            }
        }
        let _ = writeln!(out, "mu,{}", join_f64(&self.mu));
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hl, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty file".into(),
        })?;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: hl,
                msg: format!("header needs 3 fields d,K,sigma, got {}", fields.len()),
            });
        }
        let dim: usize = parse_field(fields[0], hl)?;
        let k: usize = parse_field(fields[1], hl)?;
        let sigma: f64 = parse_field(fields[2], hl)?;
        if dim == 0 {
            return Err(Error::Parse {
                line: hl,
                msg: "dimension must be positive".into(),
            });
        }
        let mut arms = Vec::with_capacity(k);
        for _ in 0..k {
            let (ln, line) = lines.next().ok_or(Error::Parse {
                line: hl + arms.len() + 1,
                msg: format!("expected {k} arm lines, found {}", arms.len()),
            })?;
            arms.push(parse_row(line, dim, ln)?);
        }
        let (ml, mu_line) = lines.next().ok_or(Error::Parse {
            line: hl + k + 1,
            msg: "missing mu line".into(),
        })?;
        let rest = mu_line.strip_prefix("mu,").ok_or(Error::Parse {
            line: ml,
            msg: "expected line starting with `mu,`".into(),
        })?;
        let mu = parse_row(rest, dim, ml)?;
        if let Some((extra, _)) = lines.next() {
            return Err(Error::Parse {
                line: extra,
                msg: "unexpected trailing content".into(),
            });
        }
        let arm_set = if k == 0 {
            ArmSet::sphere(dim)?
        } else {
            ArmSet::finite(arms)?
        };
        Instance::new(arm_set, mu, sigma)
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse `{s}`"),
    })
}

fn parse_row(line: &str, dim: usize, ln: usize) -> Result<Vec<f64>> {
    let row: Vec<f64> = line
        .split(',')
        .map(|s| parse_field::<f64>(s.trim(), ln))
        .collect::<Result<_>>()?;
    if row.len() != dim {
        return Err(Error::Parse {
            line: ln,
            msg: format!("expected {dim} values, got {}", row.len()),
        });
    }
    Ok(row)
}

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
}

/// The many-arms benchmark in `d = 2`: `(1,0)`, the arm at angle `3pi/4`, and
/// `K - 2` arms at angles `pi/4 + phi_i` with Gaussian `phi_i`. `mu = (1,0)`, `sigma = 1`.
pub fn gen_many_arms(k: usize, seed: u64) -> Result<Instance> {
    gen_many_arms_with(k, seed, MANY_ARMS_PHI_STD)
}

pub fn gen_many_arms_with(k: usize, seed: u64, phi_std: f64) -> Result<Instance> {
    if k < 3 {
        return Err(Error::input(format!(
            "many-arms instance needs K >= 3, got {k}"
        )));
    }
    let mut rng = GaussianSource::new(seed, Stream::Instance);
    let mut arms = Vec::with_capacity(k);
    arms.push(vec![1.0, 0.0]);
    let far = 3.0 * PI / 4.0;
    arms.push(vec![far.cos(), far.sin()]);
    for _ in 0..k - 2 {
        let angle = PI / 4.0 + rng.normal(0.0, phi_std);
        arms.push(vec![angle.cos(), angle.sin()]);
    }
    Instance::new(ArmSet::finite(arms)?, vec![1.0, 0.0], 1.0)
}

/// The standard basis `e_1, ..., e_d`.
pub fn gen_orthonormal_basis(d: usize) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e
        })
        .collect()
}

/// `{e_1, ..., e_d}` with the given parameter.
pub fn orthonormal_instance(mu: Vec<f64>, sigma: f64) -> Result<Instance> {
    let arms = ArmSet::finite(gen_orthonormal_basis(mu.len()))?;
    Instance::new(arms, mu, sigma)
}
