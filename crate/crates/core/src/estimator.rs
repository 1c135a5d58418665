//! Running sufficient statistics and the least-squares estimate of `mu`.
//!
//! The Gram matrix and moment vector are maintained exactly. Derived
//! quantities (spectrum, estimate) are cached in `OnceCell`s that every
//! [`DesignState::update`] resets, so a cached value always corresponds to the
//! current `(gram, moment)` pair.

use std::cell::OnceCell;

use crate::error::{Error, Result};
use crate::instance::ArmSet;
use crate::linalg::{Spectrum, SymMatrix};

#[derive(Debug, Clone)]
pub struct DesignState {
    t: u64,
    counts: Option<Vec<u64>>,
    gram: SymMatrix,
    moment: Vec<f64>,
    spectrum: OnceCell<Spectrum>,
    mu_hat: OnceCell<Vec<f64>>,
}

impl DesignState {
    /// Empty state tracking per-arm pull counts for `num_arms` arms.
    pub fn new_finite(dim: usize, num_arms: usize) -> Self {
        Self::with_counts(dim, Some(vec![0; num_arms]))
    }

    /// Empty state without per-arm counts (continuous arm sets).
    pub fn new_continuous(dim: usize) -> Self {
        Self::with_counts(dim, None)
    }

    fn with_counts(dim: usize, counts: Option<Vec<u64>>) -> Self {
        Self {
            t: 0,
            counts,
            gram: SymMatrix::zeros(dim),
            moment: vec![0.0; dim],
            spectrum: OnceCell::new(),
            mu_hat: OnceCell::new(),
        }
    }

    pub fn for_arm_set(arms: &ArmSet) -> Self {
        if arms.is_finite() {
            Self::new_finite(arms.dim(), arms.len())
        } else {
            Self::new_continuous(arms.dim())
        }
    }

    pub fn dim(&self) -> usize {
        self.moment.len()
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn counts(&self) -> Option<&[u64]> {
        self.counts.as_deref()
    }

    pub fn gram(&self) -> &SymMatrix {
        &self.gram
    }

    pub fn moment(&self) -> &[f64] {
        &self.moment
    }

    /// Records the pull of `arm` (index `arm_index` for finite sets) with `reward`.
    pub fn update(&mut self, arm: &[f64], arm_index: Option<usize>, reward: f64) -> Result<()> {
        if arm.len() != self.dim() {
            return Err(Error::input(format!(
                "arm has dimension {}, design has dimension {}",
                arm.len(),
                self.dim()
            )));
        }
        if let (Some(counts), Some(i)) = (self.counts.as_mut(), arm_index) {
            let slot = counts
                .get_mut(i)
                .ok_or_else(|| Error::input(format!("arm index {i} out of range")))?;
            *slot += 1;
        }
        self.t += 1;
        self.gram.add_outer(arm, 1.0);
        for (m, a) in self.moment.iter_mut().zip(arm) {
            *m += a * reward;
        }
        self.spectrum = OnceCell::new();
        self.mu_hat = OnceCell::new();
        Ok(())
    }

    pub fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| {
            self.gram
                .spectrum()
                .expect("design entries stay finite for finite rewards")
        })
    }

    /// `lambda_min` of the Gram matrix (0 for rank-deficient designs).
    pub fn min_eig(&self) -> f64 {
        self.spectrum().min_clamped()
    }

    pub fn is_invertible(&self) -> bool {
        self.t > 0 && self.spectrum().is_invertible()
    }

    /// Least-squares estimate through the pseudo-inverse; zero before any data.
    pub fn estimate(&self) -> &[f64] {
        self.mu_hat.get_or_init(|| {
            if self.t == 0 {
                vec![0.0; self.dim()]
            } else {
                self.spectrum().solve_pinv(&self.moment)
            }
        })
    }

    /// `argmax_a mu_hat^T a`, lowest index on ties.
    pub fn empirical_best_arm(&self, arms: &ArmSet) -> usize {
        arms.argmax(self.estimate())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::RewardStream;
    use crate::instance::{gen_many_arms, orthonormal_instance};
    use crate::linalg::{norm, solve_psd};

    #[test]
    fn single_update_uses_pseudo_inverse() {
        let mut s = DesignState::new_finite(2, 2);
        s.update(&[1.0, 0.0], Some(0), 2.0).unwrap();
        assert_eq!(s.gram(), &SymMatrix::diagonal(&[1.0, 0.0]));
        assert_eq!(s.moment(), &[2.0, 0.0]);
        let mu = s.estimate();
        assert!((mu[0] - 2.0).abs() < 1e-12 && mu[1].abs() < 1e-12);
    }

    #[test]
    fn noiseless_recovery() {
        let mut s = DesignState::new_finite(2, 2);
        s.update(&[1.0, 0.0], Some(0), 1.0).unwrap();
        s.update(&[0.0, 1.0], Some(1), -1.0).unwrap();
        assert_eq!(s.estimate(), &[1.0, -1.0]);
    }

    #[test]
    fn counts_sum_to_t() {
        let inst = gen_many_arms(20, 1).unwrap();
        let mut s = DesignState::for_arm_set(&inst.arm_set);
        let mut env = RewardStream::new(&inst, 4);
        let mut trace = 0.0;
        for t in 0..57usize {
            let i = (t * 7) % 20;
            let a = inst.arm_set.arm(i);
            trace += norm(a).powi(2);
            s.update(a, Some(i), env.sample_reward(a).unwrap()).unwrap();
        }
        assert_eq!(s.counts().unwrap().iter().sum::<u64>(), 57);
        assert_eq!(s.t(), 57);
        assert!((s.gram().trace() - trace).abs() < 1e-9);
    }

    #[test]
    fn empty_estimate_and_tie_break() {
        let inst = orthonormal_instance(vec![1.0, 0.0], 1.0).unwrap();
        let s = DesignState::for_arm_set(&inst.arm_set);
        assert_eq!(s.estimate(), &[0.0, 0.0]);
        assert_eq!(s.empirical_best_arm(&inst.arm_set), 0);
        assert_eq!(s.min_eig(), 0.0);
    }

    #[test]
    fn rank_one_data_projects_onto_row_space() {
        let mut s = DesignState::new_continuous(2);
        for r in [2.0, 3.0, 4.0] {
            s.update(&[1.0, 0.0], None, r).unwrap();
        }
        let mu = s.estimate();
        assert!((mu[0] - 3.0).abs() < 1e-12 && mu[1].abs() < 1e-12);
    }

    #[test]
    fn best_arm_on_many_arms() {
        let inst = gen_many_arms(100, 8).unwrap();
        let mut s = DesignState::for_arm_set(&inst.arm_set);
        s.update(&[1.0, 0.0], None, 1.0).unwrap();
        s.update(&[0.0, 1.0], None, 0.0).unwrap();
        assert_eq!(s.estimate(), &[1.0, 0.0]);
        assert_eq!(s.empirical_best_arm(&inst.arm_set), 0);
    }

    #[test]
    fn cache_tracks_updates() {
        let inst = gen_many_arms(30, 2).unwrap();
        let mut s = DesignState::for_arm_set(&inst.arm_set);
        let mut env = RewardStream::new(&inst, 77);
        let mut last_min = 0.0;
        for t in 0..200usize {
            let i = t % 30;
            let a = inst.arm_set.arm(i);
            s.update(a, Some(i), env.sample_reward(a).unwrap()).unwrap();
            let direct = solve_psd(s.gram(), s.moment()).unwrap();
            for (x, y) in direct.iter().zip(s.estimate()) {
                assert!((x - y).abs() < 1e-10);
            }
            assert!(s.min_eig() >= last_min - 1e-12);
            last_min = s.min_eig();
        }
    }

    #[test]
    fn noiseless_consistency_many_arms() {
        let mut inst = gen_many_arms(40, 3).unwrap();
        inst.sigma = 0.0;
        inst.mu = vec![0.3, -1.7];
        let mut s = DesignState::for_arm_set(&inst.arm_set);
        let mut env = RewardStream::new(&inst, 0);
        for i in 0..40 {
            let a = inst.arm_set.arm(i);
            s.update(a, Some(i), env.sample_reward(a).unwrap()).unwrap();
        }
        for (x, y) in s.estimate().iter().zip(&inst.mu) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
