//! Metropolis-within-Gibbs sampler for the frailty PH model.
//!
//! One sweep updates, in order: the stacked log hazard heights and regression
//! coefficients `γ`, each cluster frailty `e_i`, every node coefficient vector
//! `β` in level order, the partition scale `θ`, and the precision `c`. All
//! blocks but `c` (conjugate Gamma) use adaptive random-walk Metropolis;
//! adaptation stops at the end of burn-in.

pub mod adapt;
pub mod likelihood;

use crate::chain::{ChainMeta, Controls, Diagnostics, PosteriorChain};
use crate::data::{ClusterInfo, Dataset};
use crate::error::{Error, Result};
use crate::hazard::{expand_poisson, CutPoints};
use crate::ldtfp::{
    node_location, FrailtyLawKind, LawHyper, PartitionTree, PrecisionPrior, TailfreeForest,
};
use crate::numeric::{batch_means_se, ln_sigmoid, mean};
use crate::rng::{stream, ChainRng};
use adapt::{BlockProposal, ScalarProposal};
use likelihood::{ClusterStats, ObservationModel};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Normal prior `N(γ₀, S₀)` on the stacked `γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionPrior {
    pub mean: Vec<f64>,
    /// Row-major `S₀`.
    pub covariance: Vec<Vec<f64>>,
}

impl RegressionPrior {
    pub fn isotropic(dim: usize, variance: f64) -> Self {
        RegressionPrior {
            mean: vec![0.0; dim],
            covariance: (0..dim)
                .map(|i| (0..dim).map(|j| if i == j { variance } else { 0.0 }).collect())
                .collect(),
        }
    }

    /// Returns `(γ₀, S₀⁻¹)` after checking dimension, symmetry and definiteness.
    fn precision(&self, dim: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if self.mean.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "γ₀",
                expected: dim,
                got: self.mean.len(),
            });
        }
        if self.covariance.len() != dim || self.covariance.iter().any(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                what: "S₀",
                expected: dim,
                got: self.covariance.len(),
            });
        }
        let s = DMatrix::from_fn(dim, dim, |i, j| self.covariance[i][j]);
        let scale = s.amax().max(f64::MIN_POSITIVE);
        if (&s - s.transpose()).amax() > 1e-12 * scale {
            return Err(Error::invalid("S₀ must be symmetric"));
        }
        let chol = s
            .cholesky()
            .ok_or_else(|| Error::invalid("S₀ must be positive definite"))?;
        Ok((DVector::from_column_slice(&self.mean), chol.inverse()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHyper {
    pub law: LawHyper,
    pub gamma: RegressionPrior,
}

/// A fully specified model: data, baseline partition, frailty law and priors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub dataset: Dataset,
    pub cuts: CutPoints,
    pub frailty: FrailtyLawKind,
    pub depth: usize,
    pub hyper: ModelHyper,
    /// Exponent of `ρ(j) = j^rho_power`.
    pub rho_power: f64,
    /// Replaces the cluster count n in the coefficient prior variance.
    pub n_scale: Option<f64>,
}

impl ModelSpec {
    /// Default priors: `τ₁ = τ₂ = 1.001`, `c ~ Gamma(1, 1)`, `γ ~ N(0, 10³ I)`, `ρ(j) = j²`.
    pub fn new(dataset: Dataset, cuts: CutPoints, frailty: FrailtyLawKind, depth: usize) -> Self {
        let dim = cuts.len() + dataset.p();
        ModelSpec {
            dataset,
            cuts,
            frailty,
            depth,
            hyper: ModelHyper {
                law: LawHyper::default(),
                gamma: RegressionPrior::isotropic(dim, 1e3),
            },
            rho_power: 2.0,
            n_scale: None,
        }
    }

    pub fn gamma_dim(&self) -> usize {
        self.cuts.len() + self.dataset.p()
    }

    pub fn n_scale(&self) -> f64 {
        self.n_scale.unwrap_or(self.dataset.n_clusters() as f64)
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        self.hyper.law.validate()?;
        self.hyper.gamma.precision(self.gamma_dim())?;
        PartitionTree::new(self.depth, 1.0)?;
        if !self.rho_power.is_finite() {
            return Err(Error::invalid("ρ exponent must be finite"));
        }
        if !(self.n_scale() > 0.0) {
            return Err(Error::invalid("coefficient prior scale n must be positive"));
        }
        Ok(())
    }

    pub fn gamma_names(&self) -> Vec<String> {
        (1..=self.cuts.len())
            .map(|k| format!("log_lambda_{k}"))
            .chain(self.dataset.covariate_names())
            .collect()
    }

    pub fn chain_meta(&self, controls: Controls) -> ChainMeta {
        ChainMeta {
            kind: self.frailty,
            depth: self.depth,
            q: self.dataset.q(),
            rho_power: self.rho_power,
            n_scale: self.n_scale(),
            cuts: self.cuts.clone(),
            gamma_names: self.gamma_names(),
            cluster_ids: self.dataset.clusters.iter().map(|c| c.id.clone()).collect(),
            cluster_covariates: self
                .dataset
                .clusters
                .iter()
                .map(|c| c.covariates.clone())
                .collect(),
            cluster_covariate_names: self.dataset.cluster_covariate_names.clone(),
            observation_labels: observation_labels(&self.dataset),
            standardization: self.dataset.standardization.clone(),
            controls,
            diagnostics: Diagnostics::default(),
        }
    }
}

/// `cluster:position` label of every record, e.g. `"A:2"`.
pub fn observation_labels(dataset: &Dataset) -> Vec<String> {
    let mut seen = vec![0usize; dataset.n_clusters()];
    dataset
        .records
        .iter()
        .map(|r| {
            seen[r.cluster] += 1;
            format!("{}:{}", dataset.clusters[r.cluster].id, seen[r.cluster])
        })
        .collect()
}

/// Sampler state and proposal machinery of one chain.
pub struct Sampler {
    model: ObservationModel,
    cluster_x: Vec<Vec<f64>>,
    law: LawHyper,
    gamma_mean: DVector<f64>,
    gamma_precision: DMatrix<f64>,
    pub gamma: Vec<f64>,
    pub frailties: Vec<f64>,
    pub forest: TailfreeForest,
    stats: ClusterStats,
    gamma_proposal: BlockProposal,
    frailty_proposals: Vec<ScalarProposal>,
    node_proposals: Vec<BlockProposal>,
    theta_proposal: ScalarProposal,
    rng: ChainRng,
    iteration: usize,
}

impl Sampler {
    /// Initial state: `γ` at the ridge-penalized Poisson mode with zero
    /// frailties, `β = 0`, `θ⁻²` and `c` at their prior means.
    pub fn new(spec: &ModelSpec, seed: u64, stream_id: u64) -> Result<Self> {
        spec.validate()?;
        let dim = spec.gamma_dim();
        let (gamma_mean, gamma_precision) = spec.hyper.gamma.precision(dim)?;
        let model = ObservationModel::new(&expand_poisson(&spec.dataset, &spec.cuts));
        let n = spec.dataset.n_clusters();

        let (gamma, gamma_cov) = ridge_poisson_mode(&model, &gamma_mean, &gamma_precision)?;
        let frailties = vec![0.0; n];

        let law = spec.hyper.law;
        let theta = (law.tau2 / law.tau1).sqrt();
        let precision = match law.precision_prior {
            PrecisionPrior::Gamma { shape, rate } => shape / rate,
            PrecisionPrior::Fixed(c) => c,
        };
        let tree = PartitionTree::new(spec.depth, theta)?;
        let forest = TailfreeForest::centered(
            spec.frailty,
            tree,
            spec.dataset.q(),
            precision,
            spec.rho_power,
            spec.n_scale(),
        );

        let stats = model.cluster_stats(&gamma);
        let frailty_proposals = stats
            .events
            .iter()
            .map(|d| ScalarProposal::new(2.4 / (d + 1.0).sqrt()))
            .collect();
        let node_proposals = (0..forest.n_nodes())
            .map(|_| BlockProposal::identity(forest.dim(), 1.0))
            .collect();

        let sampler = Sampler {
            cluster_x: spec.dataset.clusters.iter().map(|c: &ClusterInfo| c.covariates.clone()).collect(),
            model,
            law,
            gamma_mean,
            gamma_precision,
            gamma,
            frailties,
            forest,
            stats,
            gamma_proposal: BlockProposal::new(gamma_cov),
            frailty_proposals,
            node_proposals,
            theta_proposal: ScalarProposal::new(0.5),
            rng: stream(seed, stream_id),
            iteration: 0,
        };
        let lp = sampler.log_posterior();
        if !lp.is_finite() {
            return Err(Error::Initialization(format!(
                "log-posterior is {lp} at the initial state; consider standardizing the covariates"
            )));
        }
        Ok(sampler)
    }

    pub fn model(&self) -> &ObservationModel {
        &self.model
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn gamma_log_prior(&self, gamma: &[f64]) -> f64 {
        let d = DVector::from_column_slice(gamma) - &self.gamma_mean;
        -0.5 * d.dot(&(&self.gamma_precision * &d))
    }

    /// Conditional log-likelihood `Σ log f(D_ij | γ, e_i)` of the current state.
    pub fn loglik(&self) -> f64 {
        self.stats.total(&self.frailties)
    }

    /// Unnormalized log posterior of the current state.
    pub fn log_posterior(&self) -> f64 {
        let frailty_part: f64 = self
            .frailties
            .iter()
            .zip(&self.cluster_x)
            .map(|(&e, x)| self.forest.ln_density(e, x))
            .sum();
        self.loglik()
            + self.gamma_log_prior(&self.gamma)
            + frailty_part
            + crate::ldtfp::log_prior_density(&self.forest, &self.law)
    }

    fn accept(&mut self, log_ratio: f64) -> bool {
        let u: f64 = self.rng.random();
        u.ln() < log_ratio
    }

    pub fn update_gamma(&mut self) {
        let proposal = self.gamma_proposal.propose(&self.gamma, &mut self.rng);
        let stats = self.model.cluster_stats(&proposal);
        let log_ratio = stats.total(&self.frailties) + self.gamma_log_prior(&proposal)
            - self.loglik()
            - self.gamma_log_prior(&self.gamma);
        let accepted = self.accept(log_ratio);
        if accepted {
            self.gamma = proposal;
            self.stats = stats;
        }
        self.gamma_proposal.record(log_ratio, accepted, &self.gamma);
    }

    pub fn update_frailties(&mut self) {
        for i in 0..self.frailties.len() {
            let current = self.frailties[i];
            let proposal = self.frailty_proposals[i].propose(current, &mut self.rng);
            let x = &self.cluster_x[i];
            let log_ratio = self.stats.cluster_loglik(i, proposal)
                + self.forest.ln_density(proposal, x)
                - self.stats.cluster_loglik(i, current)
                - self.forest.ln_density(current, x);
            let accepted = self.accept(log_ratio);
            if accepted {
                self.frailties[i] = proposal;
            }
            self.frailty_proposals[i].record(log_ratio, accepted);
        }
    }

    /// Updates every node coefficient vector given the frailty paths.
    ///
    /// A node no frailty passes through is drawn from its prior directly.
    pub fn update_forest(&mut self) {
        let dim = self.forest.dim();
        if dim == 0 {
            return;
        }
        let depth = self.forest.depth();
        let n_nodes = self.forest.n_nodes();
        let mut members: Vec<Vec<(usize, bool)>> = vec![Vec::new(); n_nodes];
        for (i, &e) in self.frailties.iter().enumerate() {
            let index = self.forest.tree.finest_index(e);
            for level in 2..=depth {
                let parent = index >> (depth - level + 1);
                let right = (index >> (depth - level)) & 1 == 1;
                members[crate::ldtfp::node_index(level, parent)].push((i, right));
            }
        }
        for (node, members) in members.iter().enumerate() {
            let (level, _) = node_location(node);
            let variance = self.forest.prior_variance(level);
            if !(variance > 0.0 && variance.is_finite()) {
                self.forest.node_mut(node).fill(0.0);
                continue;
            }
            if members.is_empty() {
                let sd = variance.sqrt();
                for k in 0..dim {
                    let z: f64 = self.rng.sample(StandardNormal);
                    self.forest.node_mut(node)[k] = sd * z;
                }
                continue;
            }
            let current = self.forest.node(node).to_vec();
            let proposal = self.node_proposals[node].propose(&current, &mut self.rng);
            let log_ratio = self.node_target(&proposal, members, variance)
                - self.node_target(&current, members, variance);
            let accepted = self.accept(log_ratio);
            if accepted {
                self.forest.node_mut(node).copy_from_slice(&proposal);
            }
            let state = self.forest.node(node).to_vec();
            self.node_proposals[node].record(log_ratio, accepted, &state);
        }
    }

    fn node_target(&self, beta: &[f64], members: &[(usize, bool)], variance: f64) -> f64 {
        let (intercept, slopes) = beta.split_first().expect("non-empty coefficients");
        let loglik: f64 = members
            .iter()
            .map(|&(i, right)| {
                let d = intercept
                    + slopes
                        .iter()
                        .zip(&self.cluster_x[i])
                        .map(|(b, x)| b * x)
                        .sum::<f64>();
                if right {
                    ln_sigmoid(-d)
                } else {
                    ln_sigmoid(d)
                }
            })
            .sum();
        loglik - 0.5 * beta.iter().map(|b| b * b).sum::<f64>() / variance
    }

    /// Random walk on `log θ`; the partition moves with `θ`.
    pub fn update_theta(&mut self) {
        let current = self.forest.theta();
        let log_proposal = self.theta_proposal.propose(current.ln(), &mut self.rng);
        let proposal = log_proposal.exp();
        let log_ratio = if proposal > 0.0 && proposal.is_finite() {
            self.theta_target(proposal) - self.theta_target(current)
        } else {
            f64::NEG_INFINITY
        };
        let accepted = self.accept(log_ratio);
        if accepted {
            self.forest.tree.theta = proposal;
        }
        self.theta_proposal.record(log_ratio, accepted);
    }

    fn theta_target(&mut self, theta: f64) -> f64 {
        let saved = self.forest.tree.theta;
        self.forest.tree.theta = theta;
        let frailty_part: f64 = self
            .frailties
            .iter()
            .zip(&self.cluster_x)
            .map(|(&e, x)| self.forest.ln_density(e, x))
            .sum();
        self.forest.tree.theta = saved;
        frailty_part + self.law.ln_theta_prior(theta) + theta.ln()
    }

    /// Conjugate draw `c | β ~ Gamma(a_c + D/2, b_c + Σ ρ(j) ||β||² / (4n))`.
    pub fn update_precision(&mut self) {
        let PrecisionPrior::Gamma { shape, rate } = self.law.precision_prior else {
            return;
        };
        let (post_shape, post_rate) = precision_conditional(&self.forest, shape, rate);
        let draw = Gamma::new(post_shape, 1.0 / post_rate)
            .expect("positive Gamma parameters")
            .sample(&mut self.rng);
        self.forest.precision = draw;
    }

    /// One full sweep followed by a finiteness check.
    pub fn sweep(&mut self) -> Result<()> {
        self.update_gamma();
        self.update_frailties();
        self.update_forest();
        self.update_theta();
        self.update_precision();
        self.iteration += 1;
        let ll = self.loglik();
        if !ll.is_finite() || !self.forest.theta().is_finite() || !self.forest.precision.is_finite()
        {
            return Err(Error::Divergence {
                iteration: self.iteration,
                message: format!(
                    "log-likelihood {ll}, θ {}, c {}",
                    self.forest.theta(),
                    self.forest.precision
                ),
            });
        }
        Ok(())
    }

    /// Stops all adaptation and clears the acceptance counters.
    pub fn freeze(&mut self) {
        self.gamma_proposal.freeze();
        self.gamma_proposal.reset_counts();
        for p in &mut self.frailty_proposals {
            p.freeze();
            p.reset_counts();
        }
        for p in &mut self.node_proposals {
            p.freeze();
            p.reset_counts();
        }
        self.theta_proposal.freeze();
        self.theta_proposal.reset_counts();
    }

    /// Every proposal scale and covariance entry, flattened.
    pub fn proposal_scales(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.gamma_proposal.covariance().iter().copied().collect();
        out.extend(self.frailty_proposals.iter().map(ScalarProposal::scale));
        for p in &self.node_proposals {
            out.extend(p.covariance().iter().copied());
        }
        out.push(self.theta_proposal.scale());
        out
    }

    pub fn gamma_acceptance(&self) -> f64 {
        self.gamma_proposal.acceptance_rate()
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let frailty: Vec<f64> = self
            .frailty_proposals
            .iter()
            .map(ScalarProposal::acceptance_rate)
            .collect();
        let nodes: Vec<f64> = self
            .node_proposals
            .iter()
            .filter(|p| p.proposed > 0)
            .map(BlockProposal::acceptance_rate)
            .collect();
        let or_zero = |v: f64| if v.is_finite() { v } else { 0.0 };
        Diagnostics {
            gamma_acceptance: self.gamma_proposal.acceptance_rate(),
            frailty_acceptance_mean: or_zero(mean(&frailty)),
            frailty_acceptance_min: frailty.iter().copied().fold(f64::INFINITY, f64::min).min(1.0),
            frailty_acceptance_max: frailty.iter().copied().fold(0.0, f64::max),
            node_acceptance_mean: or_zero(mean(&nodes)),
            theta_acceptance: self.theta_proposal.acceptance_rate(),
            ..Diagnostics::default()
        }
    }

    /// `log f(D_ij | γ, e_i)` of every observation at the current state.
    pub fn loglik_each(&self) -> Vec<f64> {
        self.model.loglik_each(&self.gamma, &self.frailties)
    }
}

/// Shape and rate of the full conditional of `c`.
pub fn precision_conditional(forest: &TailfreeForest, shape: f64, rate: f64) -> (f64, f64) {
    let n_coeffs = forest.coeffs.len() as f64;
    let weighted: f64 = (0..forest.n_nodes())
        .map(|node| {
            let level = node_location(node).0;
            forest.rho(level) * forest.node(node).iter().map(|b| b * b).sum::<f64>()
        })
        .sum();
    (shape + 0.5 * n_coeffs, rate + weighted / (4.0 * forest.n_scale))
}

/// Newton ascent on the Poisson log-likelihood with zero frailties plus the
/// `N(γ₀, S₀)` log prior. Returns the mode and the inverse negative Hessian.
fn ridge_poisson_mode(
    model: &ObservationModel,
    prior_mean: &DVector<f64>,
    prior_precision: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let k = model.n_intervals;
    let dim = k + model.p;
    let zeros = vec![0.0; model.n_clusters];
    let objective = |g: &DVector<f64>| {
        let d = g - prior_mean;
        model.loglik(g.as_slice(), &zeros) - 0.5 * d.dot(&(prior_precision * &d))
    };

    let mut gamma = prior_mean.clone();
    let events = (0..model.n_obs()).filter(|&o| model.is_event(o)).count() as f64;
    let exposure: f64 = (0..model.n_obs())
        .flat_map(|o| model.exposures(o).iter().map(|e| e.1))
        .sum();
    if events > 0.0 && exposure > 0.0 {
        for g in gamma.iter_mut().take(k) {
            *g = (events / exposure).ln();
        }
    }
    let mut value = objective(&gamma);
    if !value.is_finite() {
        gamma = prior_mean.clone();
        value = objective(&gamma);
    }

    let mut info = DMatrix::zeros(dim, dim);
    let mut z = vec![0.0; dim];
    for _ in 0..200 {
        let mut grad = -(prior_precision * (&gamma - prior_mean));
        info.copy_from(prior_precision);
        let xi = &gamma.as_slice()[k..];
        for o in 0..model.n_obs() {
            let lin = model.linear(o, xi);
            let w = model.covariates(o);
            z[k..].copy_from_slice(w);
            for &(interval, width) in model.exposures(o) {
                let mu = (gamma[interval] + lin).exp() * width;
                let y = if model.is_event(o) && model.event_interval(o) == interval {
                    1.0
                } else {
                    0.0
                };
                z[..k].fill(0.0);
                z[interval] = 1.0;
                for a in 0..dim {
                    if z[a] == 0.0 {
                        continue;
                    }
                    grad[a] += (y - mu) * z[a];
                    for b in 0..dim {
                        info[(a, b)] += mu * z[a] * z[b];
                    }
                }
            }
        }
        if info.iter().chain(grad.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Initialization(
                "non-finite Poisson score or information at the ridge start; consider standardizing the covariates"
                    .into(),
            ));
        }
        let Some(chol) = info.clone().cholesky() else {
            break;
        };
        let step = chol.solve(&grad);
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-10 {
            let candidate = &gamma + &step * t;
            let v = objective(&candidate);
            if v.is_finite() && v >= value - 1e-12 * value.abs().max(1.0) {
                gamma = candidate;
                value = v;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved || (&step * t).amax() < 1e-10 {
            break;
        }
    }
    if !value.is_finite() {
        return Err(Error::Initialization(
            "non-finite log-posterior at the ridge Poisson start; consider standardizing the covariates"
                .into(),
        ));
    }
    let cov = info
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| DMatrix::identity(dim, dim) * 0.01);
    Ok((gamma.as_slice().to_vec(), cov))
}

/// Runs one chain and collects the retained draws.
pub fn run_chain(spec: &ModelSpec, controls: &Controls) -> Result<PosteriorChain> {
    controls.validate()?;
    let start = Instant::now();
    let mut sampler = Sampler::new(spec, controls.seed, controls.stream)?;
    let mut chain = PosteriorChain::empty(spec.chain_meta(*controls));
    let mut scales_at_burn_in = Vec::new();
    if controls.burn_in == 0 {
        sampler.freeze();
        scales_at_burn_in = sampler.proposal_scales();
    }
    let report_every = (controls.iterations / 10).max(1);
    for t in 1..=controls.iterations {
        sampler.sweep()?;
        if t == controls.burn_in {
            sampler.freeze();
            scales_at_burn_in = sampler.proposal_scales();
        }
        if controls.keeps(t) {
            let ll = controls.record_loglik.then(|| sampler.loglik_each());
            chain.push(&sampler.gamma, &sampler.frailties, &sampler.forest, ll.as_deref());
        }
        if t % report_every == 0 {
            log::debug!(
                "iteration {t}/{}: loglik {:.3}, θ {:.4}, c {:.4}",
                controls.iterations,
                sampler.loglik(),
                sampler.forest.theta(),
                sampler.forest.precision
            );
        }
    }
    let mut diagnostics = sampler.diagnostics();
    diagnostics.scales_at_burn_in = scales_at_burn_in;
    diagnostics.scales_at_end = sampler.proposal_scales();
    diagnostics.seconds = start.elapsed().as_secs_f64();
    chain.meta.diagnostics = diagnostics;
    Ok(chain)
}

/// Adaptive random-walk Metropolis on an arbitrary log density, using the
/// same proposal machinery and freeze rule as [`run_chain`].
pub fn random_walk_chain<F: Fn(&[f64]) -> f64>(
    log_target: F,
    init: &[f64],
    controls: &Controls,
) -> Result<Vec<Vec<f64>>> {
    controls.validate()?;
    let mut rng = stream(controls.seed, controls.stream);
    let mut proposal = BlockProposal::identity(init.len(), 1.0);
    let mut state = init.to_vec();
    let mut current = log_target(&state);
    if !current.is_finite() {
        return Err(Error::Initialization("log target is not finite at the start".into()));
    }
    let mut out = Vec::with_capacity(controls.retained());
    for t in 1..=controls.iterations {
        let candidate = proposal.propose(&state, &mut rng);
        let value = log_target(&candidate);
        let log_ratio = value - current;
        let u: f64 = rng.random();
        let accepted = u.ln() < log_ratio;
        if accepted {
            state = candidate;
            current = value;
        }
        proposal.record(log_ratio, accepted, &state);
        if t == controls.burn_in {
            proposal.freeze();
        }
        if controls.keeps(t) {
            out.push(state.clone());
        }
    }
    Ok(out)
}

/// Settings of a prior-only run.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorCheckConfig {
    pub kind: FrailtyLawKind,
    pub depth: usize,
    pub hyper: LawHyper,
    pub rho_power: f64,
    /// Clusters without observations; their frailties are drawn from the law.
    pub n_clusters: usize,
    pub q: usize,
    pub n_scale: f64,
}

impl Default for PriorCheckConfig {
    fn default() -> Self {
        PriorCheckConfig {
            kind: FrailtyLawKind::Ldtfp,
            depth: 4,
            hyper: LawHyper::default(),
            rho_power: 2.0,
            n_clusters: 10,
            q: 1,
            n_scale: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentCheck {
    pub name: String,
    pub estimate: f64,
    pub expected: f64,
    pub standard_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorCheckReport {
    pub draws: usize,
    pub checks: Vec<MomentCheck>,
}

impl PriorCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs the sampler with no observations and compares the retained draws of
/// `θ⁻²`, `c` and the standardized node coefficients with their priors.
///
/// Each mean must lie within three batch-means standard errors of its prior
/// value; the pooled `β² c ρ(j) / (2n)` must also lie in `[0.9, 1.1]`.
pub fn prior_replication_check(
    config: &PriorCheckConfig,
    controls: &Controls,
) -> Result<PriorCheckReport> {
    let q = config.q;
    let clusters = (0..config.n_clusters)
        .map(|i| ClusterInfo {
            id: format!("c{}", i + 1),
            covariates: (0..q)
                .map(|k| ((i as f64 + 0.5) * (k as f64 + 1.0) * 0.7).sin() * 1.5)
                .collect(),
        })
        .collect();
    let dataset = Dataset::new(
        Vec::new(),
        clusters,
        Vec::new(),
        (1..=q).map(|k| format!("x{k}")).collect(),
    )?;
    let cuts = CutPoints::new(vec![1.0])?;
    let mut spec = ModelSpec::new(dataset, cuts, config.kind, config.depth);
    spec.hyper.law = config.hyper;
    spec.rho_power = config.rho_power;
    spec.n_scale = Some(config.n_scale);
    let controls = Controls {
        record_loglik: false,
        ..*controls
    };
    let chain = run_chain(&spec, &controls)?;
    let m = chain.n_draws();
    if m == 0 {
        return Err(Error::EmptyChain);
    }

    let mut checks = Vec::new();
    let check = |name: &str, series: &[f64], expected: f64| {
        let estimate = mean(series);
        let se = batch_means_se(series);
        MomentCheck {
            name: name.into(),
            estimate,
            expected,
            standard_error: se,
            passed: (estimate - expected).abs() <= 3.0 * se,
        }
    };

    let inv_theta2: Vec<f64> = chain.theta.iter().map(|t| t.powi(-2)).collect();
    checks.push(check(
        "theta^-2",
        &inv_theta2,
        config.hyper.tau1 / config.hyper.tau2,
    ));
    if let PrecisionPrior::Gamma { shape, rate } = config.hyper.precision_prior {
        checks.push(check("c", &chain.precision, shape / rate));
    }
    let dim = config.kind.coefficient_dim(q);
    if dim > 0 && config.depth >= 2 {
        let n_nodes = crate::ldtfp::n_nodes(config.depth);
        let z2: Vec<f64> = (0..m)
            .map(|draw| {
                let coeffs = chain.coefficient_draw(draw);
                let c = chain.precision[draw];
                let total: f64 = (0..n_nodes)
                    .map(|node| {
                        let rho = (node_location(node).0 as f64).powf(config.rho_power);
                        coeffs[node * dim..(node + 1) * dim]
                            .iter()
                            .map(|b| b * b * c * rho / (2.0 * config.n_scale))
                            .sum::<f64>()
                    })
                    .sum();
                total / (n_nodes * dim) as f64
            })
            .collect();
        let mut pooled = check("beta^2 c rho / 2n", &z2, 1.0);
        pooled.passed &= (0.9..=1.1).contains(&pooled.estimate);
        checks.push(pooled);
    }
    Ok(PriorCheckReport { draws: m, checks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SurvivalRecord;

    fn small_spec(kind: FrailtyLawKind) -> ModelSpec {
        let clusters: Vec<ClusterInfo> = (0..6)
            .map(|i| ClusterInfo {
                id: format!("k{i}"),
                covariates: vec![i as f64 / 3.0 - 1.0],
            })
            .collect();
        let records = (0..30)
            .map(|j| SurvivalRecord {
                time: 0.2 + (j as f64 * 0.37) % 2.0,
                event: j % 3 != 0,
                subject_covariates: vec![((j * 7) % 5) as f64 / 2.0 - 1.0],
                cluster: j % 6,
            })
            .collect();
        let ds = Dataset::new(records, clusters, vec!["w".into()], vec!["x".into()]).unwrap();
        let cuts = CutPoints::new(vec![0.7, 1.4, 2.2]).unwrap();
        ModelSpec::new(ds, cuts, kind, 3)
    }

    #[test]
    fn chains_are_reproducible() {
        let spec = small_spec(FrailtyLawKind::Ldtfp);
        let controls = Controls::new(300, 100, 2, 9);
        let a = run_chain(&spec, &controls).unwrap();
        let b = run_chain(&spec, &controls).unwrap();
        assert_eq!(a.n_draws(), 100);
        assert_eq!(a.gamma, b.gamma);
        assert_eq!(a.coeffs, b.coeffs);
        assert_eq!(a.loglik, b.loglik);
        assert!(a.meta.diagnostics.adaptation_frozen());
    }

    #[test]
    fn stored_loglik_matches_recomputation() {
        let spec = small_spec(FrailtyLawKind::Ldtfp);
        let chain = run_chain(&spec, &Controls::new(200, 50, 10, 4)).unwrap();
        let model = ObservationModel::new(&expand_poisson(&spec.dataset, &spec.cuts));
        for m in [0, 3, 7, 11, 14] {
            let fresh = model.loglik_each(chain.gamma_draw(m), chain.frailty_draw(m));
            for (a, b) in fresh.iter().zip(chain.loglik_draw(m).unwrap()) {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn gaussian_kind_keeps_no_coefficients() {
        let spec = small_spec(FrailtyLawKind::Gaussian);
        let chain = run_chain(&spec, &Controls::new(100, 20, 1, 1)).unwrap();
        assert!(chain.coeffs.is_empty());
        let forest = chain.forest_draw(5).unwrap();
        let e = 0.37;
        let expected = crate::numeric::normal_ln_pdf(e, 0.0, chain.theta[5]);
        assert!((forest.ln_density(e, &[0.1]) - expected).abs() < 1e-12);
    }

    #[test]
    fn point_mass_gamma_prior_pins_gamma() {
        let mut spec = small_spec(FrailtyLawKind::Gaussian);
        let dim = spec.gamma_dim();
        spec.hyper.gamma = RegressionPrior::isotropic(dim, 1e-20);
        spec.hyper.gamma.mean = (0..dim).map(|k| 0.1 * k as f64 - 0.2).collect();
        let chain = run_chain(&spec, &Controls::new(200, 100, 1, 2)).unwrap();
        for m in 0..chain.n_draws() {
            for (g, g0) in chain.gamma_draw(m).iter().zip(&spec.hyper.gamma.mean) {
                assert!((g - g0).abs() < 1e-8, "{g} vs {g0}");
            }
        }
    }

    #[test]
    fn precision_conditional_with_zero_coefficients() {
        let tree = PartitionTree::new(3, 1.0).unwrap();
        let forest = TailfreeForest::centered(FrailtyLawKind::Ldtfp, tree, 2, 1.0, 2.0, 20.0);
        let (shape, rate) = precision_conditional(&forest, 1.0, 2.0);
        assert_eq!(shape, 1.0 + 0.5 * (6 * 3) as f64);
        assert_eq!(rate, 2.0);
    }

    #[test]
    fn rejects_bad_prior_and_controls() {
        let mut spec = small_spec(FrailtyLawKind::Ldtfp);
        spec.hyper.gamma.mean.pop();
        assert!(matches!(
            Sampler::new(&spec, 1, 0),
            Err(Error::DimensionMismatch { what: "γ₀", .. })
        ));
        assert!(Controls::new(10, 10, 1, 0).validate().is_err());
        assert!(Controls::new(10, 0, 0, 0).validate().is_err());
    }

    #[test]
    fn huge_covariates_fail_initialization() {
        let mut spec = small_spec(FrailtyLawKind::Gaussian);
        for r in &mut spec.dataset.records {
            r.subject_covariates[0] *= 1e300;
        }
        match Sampler::new(&spec, 1, 0) {
            Err(Error::Initialization(msg)) => assert!(msg.contains("standardiz")),
            other => panic!("unexpected {:?}", other.err()),
        }
    }
}
