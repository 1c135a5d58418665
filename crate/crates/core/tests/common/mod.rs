//! Independent oracles and statistics shared by the integration suites.
//!
//! Nothing here calls into the algorithmic code of `lts_core`: the objective,
//! grid search and likelihood-ratio computations are re-derived from raw
//! arm coordinates and reward samples.

#![allow(dead_code)]

use lts_core::rng::{GaussianSource, Stream};
use nalgebra::{DMatrix, DVector};

/// Direct evaluation of the allocation objective for `d = 2`; 0 when the
/// design is (numerically) singular.
pub struct Psi2 {
    /// `(a1^2, a1 a2, a2^2)` per arm.
    outer: Vec<[f64; 3]>,
    /// `(a* - a, (mu^T (a* - a))^2)` per competitor.
    comp: Vec<([f64; 2], f64)>,
}

impl Psi2 {
    pub fn new(mu: [f64; 2], arms: &[[f64; 2]]) -> Self {
        let val = |a: &[f64; 2]| mu[0] * a[0] + mu[1] * a[1];
        let best = (0..arms.len())
            .max_by(|&i, &j| val(&arms[i]).total_cmp(&val(&arms[j])))
            .unwrap();
        let star = arms[best];
        let comp = arms
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != best)
            .map(|(_, a)| {
                let x = [star[0] - a[0], star[1] - a[1]];
                let g = mu[0] * x[0] + mu[1] * x[1];
                (x, g * g)
            })
            .collect();
        let outer = arms
            .iter()
            .map(|a| [a[0] * a[0], a[0] * a[1], a[1] * a[1]])
            .collect();
        Self { outer, comp }
    }

    pub fn eval(&self, w: &[f64]) -> f64 {
        let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
        for (p, &wi) in self.outer.iter().zip(w) {
            s11 += wi * p[0];
            s12 += wi * p[1];
            s22 += wi * p[2];
        }
        let det = s11 * s22 - s12 * s12;
        let tr = s11 + s22;
        // lambda_min <= 1e-12 lambda_max  <=>  det <= ~1e-12 tr^2
        if tr <= 0.0 || det <= 1e-12 * tr * tr {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for (x, g2) in &self.comp {
            // (x^T A^{-1} x) det
            let num = x[0] * x[0] * s22 - 2.0 * x[0] * x[1] * s12 + x[1] * x[1] * s11;
            best = best.min(g2 * det / (2.0 * num));
        }
        best
    }
}

/// Exhaustive maximization over `{w : w = n / steps, sum n = steps}` for `K <= 4`.
pub fn grid_max(psi: &Psi2, k: usize, steps: usize) -> (f64, Vec<f64>) {
    assert!((2..=4).contains(&k));
    let h = 1.0 / steps as f64;
    let mut best = (f64::NEG_INFINITY, vec![0.0; k]);
    let mut w = vec![0.0; k];
    let mut consider = |w: &[f64]| {
        let v = psi.eval(w);
        if v > best.0 {
            best = (v, w.to_vec());
        }
    };
    match k {
        2 => {
            for i in 0..=steps {
                w[0] = i as f64 * h;
                w[1] = (steps - i) as f64 * h;
                consider(&w);
            }
        }
        3 => {
            for i in 0..=steps {
                for j in 0..=steps - i {
                    w[0] = i as f64 * h;
                    w[1] = j as f64 * h;
                    w[2] = (steps - i - j) as f64 * h;
                    consider(&w);
                }
            }
        }
        _ => {
            for i in 0..=steps {
                for j in 0..=steps - i {
                    for l in 0..=steps - i - j {
                        w[0] = i as f64 * h;
                        w[1] = j as f64 * h;
                        w[2] = l as f64 * h;
                        w[3] = (steps - i - j - l) as f64 * h;
                        consider(&w);
                    }
                }
            }
        }
    }
    best
}

fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    x.clone()
        .svd(true, true)
        .solve(y, 1e-14)
        .expect("svd solve")
}

fn half_sse(x: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>) -> f64 {
    0.5 * (y - x * beta).norm_squared()
}

/// `min (1/2) sum (r_s - mu^T a_s)^2` subject to `mu^T v = -eps`, by
/// eliminating the coordinate of largest `|v_j|`.
fn boundary_min(rows: &[Vec<f64>], rewards: &[f64], v: &[f64], eps: f64) -> f64 {
    let d = v.len();
    let j = (0..d)
        .max_by(|&p, &q| v[p].abs().total_cmp(&v[q].abs()))
        .unwrap();
    let others: Vec<usize> = (0..d).filter(|&k| k != j).collect();
    let t = rows.len();
    let x = DMatrix::from_fn(t, d - 1, |s, c| {
        let k = others[c];
        rows[s][k] - rows[s][j] * v[k] / v[j]
    });
    let y = DVector::from_fn(t, |s, _| rewards[s] + eps * rows[s][j] / v[j]);
    let beta = least_squares(&x, &y);
    half_sse(&x, &y, &beta)
}

/// Log of the ratio of maximized Gaussian likelihoods over
/// `{mu : mu^T (a - b) >= -eps}` and `{mu : mu^T (a - b) <= -eps}`, solved as
/// two single-constraint least-squares problems from the raw samples.
pub fn numeric_gllr(rows: &[Vec<f64>], rewards: &[f64], a: &[f64], b: &[f64], eps: f64) -> f64 {
    let t = rows.len();
    let d = a.len();
    let x = DMatrix::from_fn(t, d, |s, k| rows[s][k]);
    let y = DVector::from_column_slice(rewards);
    let free = least_squares(&x, &y);
    let free_loss = half_sse(&x, &y, &free);
    let v: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
    let slack: f64 = free.iter().zip(&v).map(|(m, vi)| m * vi).sum::<f64>() + eps;
    let on_boundary = boundary_min(rows, rewards, &v, eps);
    // Convex objective, one half-space constraint: the constrained optimum is
    // the free optimum when feasible and lies on the boundary otherwise.
    let loss_ge = if slack >= 0.0 { free_loss } else { on_boundary };
    let loss_le = if slack <= 0.0 { free_loss } else { on_boundary };
    loss_le - loss_ge
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation.
pub fn sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)).sqrt()
}

/// Ordinary least-squares `(slope, intercept)` of `y` on `x`.
pub fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Wilson score upper bound of a binomial proportion at `z`.
pub fn wilson_upper(successes: usize, n: usize, z: f64) -> f64 {
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    (p + z2 / (2.0 * n) + z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt()) / (1.0 + z2 / n)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut xs: Vec<f64> = a.iter().chain(b).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let cdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    let d = xs
        .iter()
        .map(|&x| (cdf(a, x) - cdf(b, x)).abs())
        .fold(0.0, f64::max);
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    (d, if d == 0.0 { 1.0 } else { p.clamp(0.0, 1.0) })
}

pub fn rng(seed: u64) -> GaussianSource {
    GaussianSource::new(seed, Stream::Diagnostics)
}

/// Random unit-ish arms in the plane with a unique best arm and a spanning set.
pub fn random_planar_instance(g: &mut GaussianSource, k: usize) -> ([f64; 2], Vec<[f64; 2]>) {
    loop {
        let arms: Vec<[f64; 2]> = (0..k)
            .map(|_| [g.standard_normal(), g.standard_normal()])
            .collect();
        let mu = [g.standard_normal(), g.standard_normal()];
        let mut vals: Vec<f64> = arms.iter().map(|a| mu[0] * a[0] + mu[1] * a[1]).collect();
        vals.sort_by(f64::total_cmp);
        let gap_ok = vals[k - 1] - vals[k - 2] > 1e-3;
        let span = arms.iter().any(|a| {
            arms.iter()
                .any(|b| (a[0] * b[1] - a[1] * b[0]).abs() > 1e-2)
        });
        if gap_ok && span {
            return (mu, arms);
        }
    }
}
