//! Allocations over a finite arm set and the optimal-design objective.
//!
//! For a parameter `mu` with a unique best arm `a*` and an allocation `w`,
//!
//! ```text
//! psi(mu, w) = min_{a != a*} (mu^T (a* - a))^2 / (2 (a* - a)^T A(w)^{-1} (a* - a)),
//! A(w) = sum_a w_a a a^T,
//! ```
//!
//! and `psi = 0` whenever `A(w)` is singular. `psi` is concave in `w`; its
//! maximum over the simplex is the inverse characteristic time `1 / T*`.
//!
//! The maximizer runs Frank-Wolfe on a soft-min smoothing of `psi`. `psi` is a
//! minimum of smooth concave terms, and plain conditional gradient steps
//! driven by the single active term stall at the kinks where several terms
//! tie (which is where the optimum usually sits). Smoothing with a vanishing
//! temperature removes the stall, and the soft-min weights double as dual
//! variables, giving a certified upper bound on `psi*` at every iterate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{ArmSet, Instance};
use crate::linalg::dot;
use crate::tol;

/// A point of the probability simplex over the arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    weights: Vec<f64>,
}

impl Allocation {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::input("allocation must have at least one weight"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::input(
                "allocation weights must be finite and non-negative",
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > tol::SIMPLEX_SUM * weights.len().max(1) as f64 {
            return Err(Error::input(format!(
                "allocation weights sum to {sum}, not 1"
            )));
        }
        Ok(Self { weights })
    }

    /// Normalizes non-negative weights onto the simplex.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        for w in weights.iter_mut() {
            if !w.is_finite() {
                return Err(Error::input("allocation weights must be finite"));
            }
            *w = w.max(0.0);
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::input("allocation weights sum to zero"));
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Ok(Self { weights })
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            weights: vec![1.0 / k as f64; k],
        }
    }

    /// Uniform over `indices` (distinct), zero elsewhere.
    pub fn uniform_over(k: usize, indices: &[usize]) -> Self {
        let mut weights = vec![0.0; k];
        for &i in indices {
            weights[i] = 1.0 / indices.len() as f64;
        }
        Self { weights }
    }

    pub fn vertex(k: usize, i: usize) -> Self {
        let mut weights = vec![0.0; k];
        weights[i] = 1.0;
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Indices whose weight exceeds [`tol::SUPPORT_CUTOFF`].
    pub fn support(&self) -> Vec<usize> {
        support_of(&self.weights)
    }

    pub fn support_size(&self) -> usize {
        self.weights
            .iter()
            .filter(|&&w| w > tol::SUPPORT_CUTOFF)
            .count()
    }
}

pub(crate) fn support_of(weights: &[f64]) -> Vec<usize> {
    weights
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > tol::SUPPORT_CUTOFF)
        .map(|(i, _)| i)
        .collect()
}

/// `max_a |w_a - v_a|`.
pub fn d_infty(w: &Allocation, v: &Allocation) -> Result<f64> {
    if w.len() != v.len() {
        return Err(Error::input(format!(
            "allocations have different lengths {} and {}",
            w.len(),
            v.len()
        )));
    }
    Ok(w.weights
        .iter()
        .zip(&v.weights)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Solver controls for [`optimize_allocation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    /// Relative duality-gap tolerance: stop once `(upper - psi) <= tol * psi`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerResult {
    pub allocation: Allocation,
    /// `psi(mu, allocation)`.
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Certified bound on `(psi* - value) / value`.
    pub duality_gap_estimate: f64,
    /// Certified upper bound on `psi*`.
    pub upper_bound: f64,
}

/// The competitor terms of `psi` at one allocation.
struct Terms {
    best: usize,
    /// Row-major `A(w)^{-1}`.
    a_inv: Vec<f64>,
    /// `f_a`, infinite at the best arm.
    values: Vec<f64>,
    /// `(a* - a)^T A^{-1} (a* - a)`.
    q: Vec<f64>,
    min_value: f64,
    argmin: usize,
}

/// Checks the preconditions shared by `psi`-type functions; returns the best arm.
fn best_arm_of(mu: &[f64], arms: &ArmSet) -> Result<usize> {
    if !arms.is_finite() {
        return Err(Error::input(
            "allocations are defined for finite arm sets only",
        ));
    }
    if mu.len() != arms.dim() {
        return Err(Error::input(format!(
            "mu has dimension {}, arms have dimension {}",
            mu.len(),
            arms.dim()
        )));
    }
    arms.unique_argmax(mu, tol::BEST_ARM_GAP)
        .ok_or_else(|| Error::instance("the best arm of mu is not unique"))
}

fn inverse_design(arms: &ArmSet, weights: &[f64]) -> Option<Vec<f64>> {
    let spectrum = arms.weighted_gram(weights).spectrum().ok()?;
    if !spectrum.is_invertible() {
        return None;
    }
    Some(spectrum.inverse().transpose().as_slice().to_vec())
}

fn quad(m: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut acc = 0.0;
    for i in 0..d {
        let row = &m[i * d..(i + 1) * d];
        acc += x[i] * dot(row, x);
    }
    acc
}

fn evaluate(mu: &[f64], arms: &ArmSet, best: usize, weights: &[f64]) -> Option<Terms> {
    let a_inv = inverse_design(arms, weights)?;
    let d = arms.dim();
    let star = arms.arm(best);
    let mut diff = vec![0.0; d];
    let mut values = Vec::with_capacity(arms.len());
    let mut q = Vec::with_capacity(arms.len());
    let mut min_value = f64::INFINITY;
    let mut argmin = usize::MAX;
    for (i, a) in arms.iter().enumerate() {
        if i == best {
            values.push(f64::INFINITY);
            q.push(0.0);
            continue;
        }
        for k in 0..d {
            diff[k] = star[k] - a[k];
        }
        let gap = dot(mu, &diff);
        let qi = quad(&a_inv, &diff);
        let f = gap * gap / (2.0 * qi);
        if f < min_value {
            min_value = f;
            argmin = i;
        }
        values.push(f);
        q.push(qi);
    }
    Some(Terms {
        best,
        a_inv,
        values,
        q,
        min_value,
        argmin,
    })
}

fn check_len(w: &Allocation, arms: &ArmSet) -> Result<()> {
    if w.len() != arms.len() {
        return Err(Error::input(format!(
            "allocation has {} weights for {} arms",
            w.len(),
            arms.len()
        )));
    }
    Ok(())
}

/// The allocation objective; zero when `A(w)` is singular.
pub fn psi(mu: &[f64], w: &Allocation, arms: &ArmSet) -> Result<f64> {
    let best = best_arm_of(mu, arms)?;
    check_len(w, arms)?;
    Ok(evaluate(mu, arms, best, &w.weights).map_or(0.0, |t| t.min_value))
}

/// Gradient of the active term of `psi` (lowest index among minimizers):
/// `g_b = f(a-) (x^T A^{-1} b)^2 / (x^T A^{-1} x)` with `x = a* - a-`.
pub fn psi_supergradient(mu: &[f64], w: &Allocation, arms: &ArmSet) -> Result<Vec<f64>> {
    let best = best_arm_of(mu, arms)?;
    check_len(w, arms)?;
    let terms = evaluate(mu, arms, best, &w.weights).ok_or(Error::SingularDesign)?;
    let j = terms.argmin;
    let star = arms.arm(terms.best);
    let x: Vec<f64> = star.iter().zip(arms.arm(j)).map(|(s, a)| s - a).collect();
    let d = arms.dim();
    // v = A^{-1} x
    let v: Vec<f64> = (0..d)
        .map(|i| dot(&terms.a_inv[i * d..(i + 1) * d], &x))
        .collect();
    let scale = terms.values[j] / terms.q[j];
    Ok(arms
        .iter()
        .map(|b| {
            let s = dot(&v, b);
            scale * s * s
        })
        .collect())
}

/// Soft-min temperature relative to the current objective value.
const SMOOTHING: f64 = 0.1;

/// Maximizes `psi(mu, .)` over the simplex.
///
/// Starts from `warm_start` when given (and non-singular), otherwise from the
/// uniform allocation over a greedy spanning subset of `d` arms. Iterates
/// `w <- (1 - g_k) w + g_k e_b` with `g_k = 2 / (k + 2)`, `k >= 1`, where `b`
/// maximizes the gradient of the soft-min smoothing of `psi`. Returns the
/// best iterate found.
pub fn optimize_allocation(
    mu: &[f64],
    arms: &ArmSet,
    warm_start: Option<&Allocation>,
    tol: f64,
    max_iter: usize,
) -> Result<OptimizerResult> {
    let best = best_arm_of(mu, arms)?;
    if !(tol >= 0.0) {
        return Err(Error::input(format!(
            "tolerance must be non-negative, got {tol}"
        )));
    }
    let k_arms = arms.len();
    let d = arms.dim();
    let spanning = arms.spanning_subset();
    if spanning.len() < d {
        return Err(Error::instance("arms do not span the ambient space"));
    }
    let cold = Allocation::uniform_over(k_arms, &spanning);

    let mut w = match warm_start {
        Some(ws) => {
            check_len(ws, arms)?;
            if inverse_design(arms, &ws.weights).is_some() {
                ws.weights.clone()
            } else {
                ws.weights
                    .iter()
                    .zip(&cold.weights)
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect()
            }
        }
        None => cold.weights.clone(),
    };

    let mut best_w = w.clone();
    let mut best_value = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    let mut grad = vec![0.0; k_arms];
    let mut m = vec![0.0; d * d];
    let mut b_mat = vec![0.0; d * d];
    let mut diff = vec![0.0; d];
    let star = arms.arm(best).to_vec();

    for k in 1..=max_iter.max(1) {
        let terms = evaluate(mu, arms, best, &w).ok_or(Error::SingularDesign)?;
        let f_min = terms.min_value;
        if f_min > best_value {
            best_value = f_min;
            best_w.clone_from(&w);
        }

        // Soft-min weights over the competitor terms.
        let eta = (SMOOTHING * f_min / (k as f64).sqrt()).max(f64::MIN_POSITIVE);
        let mut z = 0.0;
        let mut mean_f = 0.0;
        m.iter_mut().for_each(|x| *x = 0.0);
        for (i, &f) in terms.values.iter().enumerate() {
            if i == terms.best {
                continue;
            }
            let p = (-(f - f_min) / eta).exp();
            if p < 1e-300 {
                continue;
            }
            z += p;
            mean_f += p * f;
            let c = p * f / terms.q[i];
            let a = arms.arm(i);
            for r in 0..d {
                diff[r] = star[r] - a[r];
            }
            for r in 0..d {
                let cr = c * diff[r];
                for s in 0..d {
                    m[r * d + s] += cr * diff[s];
                }
            }
        }
        mean_f /= z;
        m.iter_mut().for_each(|x| *x /= z);

        // B = A^{-1} M A^{-1}; gradient g_b = b^T B b.
        let a_inv = &terms.a_inv;
        for r in 0..d {
            for s in 0..d {
                let mut acc = 0.0;
                for u in 0..d {
                    let mut inner = 0.0;
                    for v in 0..d {
                        inner += m[u * d + v] * a_inv[v * d + s];
                    }
                    acc += a_inv[r * d + u] * inner;
                }
                b_mat[r * d + s] = acc;
            }
        }
        let mut top = 0;
        let mut top_val = f64::NEG_INFINITY;
        let mut along_w = 0.0;
        for (i, a) in arms.iter().enumerate() {
            let g = quad(&b_mat, a);
            grad[i] = g;
            along_w += w[i] * g;
            if g > top_val {
                top_val = g;
                top = i;
            }
        }
        let fw_gap = (top_val - along_w).max(0.0);
        upper = upper.min(mean_f + fw_gap);
        iterations = k;

        if upper - best_value <= tol * best_value {
            converged = true;
            break;
        }
        if k == max_iter {
            break;
        }
        let step = 2.0 / (k as f64 + 2.0);
        for x in w.iter_mut() {
            *x *= 1.0 - step;
        }
        w[top] += step;
    }

    // The final iterate has not been evaluated when the loop ran out of budget.
    if !converged {
        if let Some(t) = evaluate(mu, arms, best, &w) {
            if t.min_value > best_value {
                best_value = t.min_value;
                best_w.clone_from(&w);
            }
        }
    }

    let allocation = Allocation::normalized(best_w)?;
    let gap = if best_value > 0.0 {
        ((upper - best_value) / best_value).max(0.0)
    } else {
        f64::INFINITY
    };
    Ok(OptimizerResult {
        allocation,
        value: best_value,
        iterations,
        converged,
        duality_gap_estimate: gap,
        upper_bound: upper,
    })
}

/// Settings used by [`characteristic_time`].
pub const CHARACTERISTIC_TIME_SETTINGS: OptimizerSettings = OptimizerSettings {
    tol: 1e-6,
    max_iter: 100_000,
};

/// `T*(mu) = 1 / psi*(mu)`.
pub fn characteristic_time(mu: &[f64], arms: &ArmSet) -> Result<f64> {
    let s = CHARACTERISTIC_TIME_SETTINGS;
    let res = optimize_allocation(mu, arms, None, s.tol, s.max_iter)?;
    Ok(1.0 / res.value)
}

/// Bernoulli Kullback-Leibler divergence `kl(a, b)` for `a, b` in `(0, 1)`.
pub fn kl_bernoulli(a: f64, b: f64) -> Result<f64> {
    let inside = |x: f64| x > 0.0 && x < 1.0;
    if !inside(a) || !inside(b) {
        return Err(Error::input(format!(
            "kl arguments must lie in (0,1), got ({a}, {b})"
        )));
    }
    Ok(a * (a / b).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln())
}

/// `sigma^2 T*(mu) kl(delta, 1 - delta)`.
pub fn sample_complexity_lower_bound(instance: &Instance, delta: f64) -> Result<f64> {
    let kl = kl_bernoulli(delta, 1.0 - delta)?;
    let t_star = characteristic_time(&instance.mu, &instance.arm_set)?;
    Ok(instance.sigma * instance.sigma * t_star * kl)
}

/// Dense `A(w)^{-1}` for diagnostics and tests.
pub fn design_inverse(arms: &ArmSet, w: &Allocation) -> Option<DMatrix<f64>> {
    inverse_design(arms, &w.weights).map(|v| DMatrix::from_row_slice(arms.dim(), arms.dim(), &v))
}
