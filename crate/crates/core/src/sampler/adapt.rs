//! Adaptive random-walk Metropolis proposals.
//!
//! Scales follow a Robbins–Monro recursion on `log s` toward a target
//! acceptance rate; block proposals additionally learn their shape from the
//! empirical covariance of past states. Adaptation stops for good once
//! [`freeze`](BlockProposal::freeze) is called at the end of burn-in.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const TARGET_BLOCK: f64 = 0.234;
pub const TARGET_SCALAR: f64 = 0.44;

const GAIN_EXPONENT: f64 = 0.6;
const COVARIANCE_REFRESH: usize = 100;

fn gain(step: usize) -> f64 {
    (step as f64 + 1.0).powf(-GAIN_EXPONENT)
}

/// Normal random walk on a scalar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarProposal {
    pub log_scale: f64,
    pub target: f64,
    adapting: bool,
    steps: usize,
    pub accepted: usize,
    pub proposed: usize,
}

impl ScalarProposal {
    pub fn new(scale: f64) -> Self {
        ScalarProposal {
            log_scale: scale.ln(),
            target: TARGET_SCALAR,
            adapting: true,
            steps: 0,
            accepted: 0,
            proposed: 0,
        }
    }

    /// A proposal whose scale never changes.
    pub fn fixed(scale: f64) -> Self {
        ScalarProposal {
            adapting: false,
            ..ScalarProposal::new(scale)
        }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    pub fn propose<R: Rng + ?Sized>(&self, current: f64, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        current + self.scale() * z
    }

    /// Records the outcome of one step; `log_ratio` is the Metropolis log ratio.
    pub fn record(&mut self, log_ratio: f64, accepted: bool) {
        self.proposed += 1;
        self.accepted += usize::from(accepted);
        if self.adapting {
            let alpha = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
            self.log_scale += gain(self.steps) * (alpha - self.target);
            self.steps += 1;
        }
    }

    pub fn freeze(&mut self) {
        self.adapting = false;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn reset_counts(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }
}

/// Multivariate normal random walk with Haario-style covariance learning.
#[derive(Debug, Clone)]
pub struct BlockProposal {
    dim: usize,
    pub log_scale: f64,
    pub target: f64,
    /// Lower Cholesky factor of the shape matrix.
    chol: DMatrix<f64>,
    base: DMatrix<f64>,
    adapting: bool,
    steps: usize,
    count: usize,
    mean: DVector<f64>,
    scatter: DMatrix<f64>,
    min_history: usize,
    learned: bool,
    pub accepted: usize,
    pub proposed: usize,
}

impl BlockProposal {
    /// `shape` is the initial proposal covariance before scaling; the
    /// initial scale is `2.38 / √d`.
    pub fn new(shape: DMatrix<f64>) -> Self {
        let dim = shape.nrows();
        let chol = cholesky_or_diagonal(&shape);
        BlockProposal {
            dim,
            log_scale: (2.38 / (dim.max(1) as f64).sqrt()).ln(),
            target: if dim == 1 { TARGET_SCALAR } else { TARGET_BLOCK },
            chol,
            base: shape,
            adapting: true,
            steps: 0,
            count: 0,
            mean: DVector::zeros(dim),
            scatter: DMatrix::zeros(dim, dim),
            min_history: (20 * dim).max(200),
            learned: false,
            accepted: 0,
            proposed: 0,
        }
    }

    pub fn identity(dim: usize, variance: f64) -> Self {
        BlockProposal::new(DMatrix::identity(dim, dim) * variance)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn propose<R: Rng + ?Sized>(&self, current: &[f64], rng: &mut R) -> Vec<f64> {
        let z = DVector::from_iterator(self.dim, (0..self.dim).map(|_| rng.sample(StandardNormal)));
        let step = &self.chol * z * self.log_scale.exp();
        current.iter().zip(step.iter()).map(|(c, s)| c + s).collect()
    }

    /// Records the outcome of one step and, while adapting, the state the
    /// chain moved to.
    pub fn record(&mut self, log_ratio: f64, accepted: bool, state: &[f64]) {
        self.proposed += 1;
        self.accepted += usize::from(accepted);
        if !self.adapting {
            return;
        }
        let alpha = if log_ratio.is_nan() { 0.0 } else { log_ratio.min(0.0).exp() };
        self.log_scale += gain(self.steps) * (alpha - self.target);
        self.steps += 1;

        self.count += 1;
        let x = DVector::from_column_slice(state);
        let delta = &x - &self.mean;
        self.mean += &delta / self.count as f64;
        let delta2 = &x - &self.mean;
        self.scatter += &delta * delta2.transpose();
        if self.count >= self.min_history && self.count % COVARIANCE_REFRESH == 0 {
            self.refresh_shape();
        }
    }

    fn refresh_shape(&mut self) {
        let mut cov = &self.scatter / (self.count - 1) as f64;
        // keep a sliver of the initial shape so a stuck history cannot collapse it
        for i in 0..self.dim {
            cov[(i, i)] += 1e-6 * self.base[(i, i)].abs().max(1e-12);
        }
        if let Some(c) = cov.cholesky() {
            self.chol = c.l();
            if !self.learned {
                // the empirical covariance already has the posterior's scale
                self.log_scale = (2.38 / (self.dim as f64).sqrt()).ln();
                self.learned = true;
            }
        }
    }

    pub fn freeze(&mut self) {
        self.adapting = false;
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn reset_counts(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }

    /// Current proposal covariance `s² L L'`.
    pub fn covariance(&self) -> DMatrix<f64> {
        &self.chol * self.chol.transpose() * (2.0 * self.log_scale).exp()
    }
}

fn cholesky_or_diagonal(shape: &DMatrix<f64>) -> DMatrix<f64> {
    match shape.clone().cholesky() {
        Some(c) => c.l(),
        None => DMatrix::from_diagonal(&shape.diagonal().map(|v| v.abs().max(1e-12).sqrt())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn scalar_scale_moves_toward_target() {
        let mut p = ScalarProposal::new(1.0);
        for _ in 0..50 {
            p.record(0.0, true);
        }
        assert!(p.scale() > 1.0);
        let before = p.log_scale;
        p.freeze();
        p.record(-10.0, false);
        assert_eq!(p.log_scale, before);
    }

    #[test]
    fn zero_scale_never_moves() {
        let p = ScalarProposal::fixed(0.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        assert_eq!(p.propose(1.5, &mut rng), 1.5);
    }

    #[test]
    fn block_learns_covariance() {
        let mut p = BlockProposal::identity(2, 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            p.record(-1.4, false, &[3.0 * a, 0.1 * b]);
        }
        let cov = p.covariance();
        let ratio = cov[(0, 0)] / cov[(1, 1)];
        assert!(ratio > 300.0 && ratio < 3000.0, "ratio {ratio}");
    }
}
