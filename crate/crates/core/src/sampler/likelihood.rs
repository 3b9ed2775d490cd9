//! Per-observation evaluation of the conditional proportional hazards
//! likelihood, factored for cheap block updates.
//!
//! Observation `(i, j)` contributes
//! `δ_ij (γ_{K(t_ij)} + w_ij'ξ + e_i) − e^{w_ij'ξ + e_i} Σ_k e^{γ_k} Δ_k(t_ij)`,
//! which is the sum of its rows in the Poisson expansion.

use crate::hazard::PoissonExpansion;

#[derive(Debug, Clone)]
pub struct ObservationModel {
    pub n_intervals: usize,
    pub p: usize,
    pub n_clusters: usize,
    cluster: Vec<usize>,
    event: Vec<bool>,
    /// Interval carrying the event (last at-risk interval).
    event_interval: Vec<usize>,
    /// `(interval, Δ)` pairs, observation-major.
    exposures: Vec<(usize, f64)>,
    offsets: Vec<usize>,
    /// Row-major `n_obs × p` covariates.
    covariates: Vec<f64>,
}

impl ObservationModel {
    pub fn new(expansion: &PoissonExpansion) -> Self {
        let n = expansion.observations.len();
        let mut cluster = Vec::with_capacity(n);
        let mut event = Vec::with_capacity(n);
        let mut event_interval = Vec::with_capacity(n);
        let mut exposures = Vec::with_capacity(expansion.rows.len());
        let mut offsets = Vec::with_capacity(n + 1);
        let mut covariates = Vec::with_capacity(n * expansion.p);
        offsets.push(0);
        for obs in &expansion.observations {
            let rows = &expansion.rows[obs.start..obs.end];
            cluster.push(obs.cluster);
            let ev = rows.iter().find(|r| r.y);
            event.push(ev.is_some());
            event_interval.push(ev.or(rows.last()).map_or(0, |r| r.interval));
            exposures.extend(rows.iter().map(|r| (r.interval, r.log_offset.exp())));
            offsets.push(exposures.len());
            covariates.extend_from_slice(&expansion.covariates[obs.record]);
        }
        ObservationModel {
            n_intervals: expansion.n_intervals,
            p: expansion.p,
            n_clusters: expansion.n_clusters,
            cluster,
            event,
            event_interval,
            exposures,
            offsets,
            covariates,
        }
    }

    pub fn n_obs(&self) -> usize {
        self.cluster.len()
    }

    pub fn cluster_of(&self, obs: usize) -> usize {
        self.cluster[obs]
    }

    pub fn is_event(&self, obs: usize) -> bool {
        self.event[obs]
    }

    pub fn covariates(&self, obs: usize) -> &[f64] {
        &self.covariates[obs * self.p..(obs + 1) * self.p]
    }

    /// `w'ξ` for one observation.
    pub fn linear(&self, obs: usize, xi: &[f64]) -> f64 {
        self.covariates(obs).iter().zip(xi).map(|(a, b)| a * b).sum()
    }

    /// `Λ₀(t_ij)` given the hazard heights `e^{γ_k}`.
    pub fn cumulative(&self, obs: usize, heights: &[f64]) -> f64 {
        self.exposures[self.offsets[obs]..self.offsets[obs + 1]]
            .iter()
            .map(|&(k, width)| heights[k] * width)
            .sum()
    }

    pub fn loglik_obs(&self, obs: usize, gamma: &[f64], heights: &[f64], frailty: f64) -> f64 {
        let xi = &gamma[self.n_intervals..];
        let lin = self.linear(obs, xi) + frailty;
        let event = if self.event[obs] {
            gamma[self.event_interval[obs]] + lin
        } else {
            0.0
        };
        event - lin.exp() * self.cumulative(obs, heights)
    }

    /// Log-likelihood contribution of every observation.
    pub fn loglik_each(&self, gamma: &[f64], frailties: &[f64]) -> Vec<f64> {
        let heights = heights(gamma, self.n_intervals);
        (0..self.n_obs())
            .map(|o| self.loglik_obs(o, gamma, &heights, frailties[self.cluster[o]]))
            .collect()
    }

    pub fn loglik(&self, gamma: &[f64], frailties: &[f64]) -> f64 {
        self.loglik_each(gamma, frailties).iter().sum()
    }

    /// Per-cluster sufficient statistics for the frailty updates:
    /// `ll_i(e) = fixed_i + events_i · e − e^e · exposure_i`.
    pub fn cluster_stats(&self, gamma: &[f64]) -> ClusterStats {
        let heights = heights(gamma, self.n_intervals);
        let xi = &gamma[self.n_intervals..];
        let mut stats = ClusterStats::zeros(self.n_clusters);
        for o in 0..self.n_obs() {
            let i = self.cluster[o];
            let lin = self.linear(o, xi);
            if self.event[o] {
                stats.fixed[i] += gamma[self.event_interval[o]] + lin;
                stats.events[i] += 1.0;
            }
            stats.exposure[i] += lin.exp() * self.cumulative(o, &heights);
        }
        stats
    }

    /// Iterator over `(interval, Δ)` of one observation.
    pub fn exposures(&self, obs: usize) -> &[(usize, f64)] {
        &self.exposures[self.offsets[obs]..self.offsets[obs + 1]]
    }

    pub fn event_interval(&self, obs: usize) -> usize {
        self.event_interval[obs]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    pub fixed: Vec<f64>,
    pub events: Vec<f64>,
    pub exposure: Vec<f64>,
}

impl ClusterStats {
    fn zeros(n: usize) -> Self {
        ClusterStats {
            fixed: vec![0.0; n],
            events: vec![0.0; n],
            exposure: vec![0.0; n],
        }
    }

    pub fn cluster_loglik(&self, i: usize, frailty: f64) -> f64 {
        self.fixed[i] + self.events[i] * frailty - frailty.exp() * self.exposure[i]
    }

    pub fn total(&self, frailties: &[f64]) -> f64 {
        frailties
            .iter()
            .enumerate()
            .map(|(i, &e)| self.cluster_loglik(i, e))
            .sum()
    }
}

pub fn heights(gamma: &[f64], n_intervals: usize) -> Vec<f64> {
    gamma[..n_intervals].iter().map(|g| g.exp()).collect()
}
