//! Piecewise-exponential baseline hazard and the exact Poisson representation
//! of the conditional proportional hazards likelihood.
//!
//! Intervals are `I_k = (a_{k-1}, a_k]` with `a_0 = 0`; a time `t` belongs to
//! interval `K(t) = min{k : a_k >= t}`. Indices in code are zero-based.

use crate::data::Dataset;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CutPoints(Vec<f64>);

impl CutPoints {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("at least one cut-point is required"));
        }
        if !points.iter().all(|a| a.is_finite() && *a > 0.0) {
            return Err(Error::invalid("cut-points must be positive and finite"));
        }
        if let Some(w) = points.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::invalid(format!(
                "cut-points must be strictly increasing ({} is followed by {})",
                w[0], w[1]
            )));
        }
        Ok(CutPoints(points))
    }

    /// Number of intervals K.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// Left end `a_{k-1}` of interval `k`.
    pub fn lower(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.0[k - 1]
        }
    }

    /// Zero-based `K(t) - 1`; times beyond `a_K` map to the last interval.
    pub fn interval_of(&self, t: f64) -> usize {
        self.0.partition_point(|&a| a < t).min(self.0.len() - 1)
    }

    /// `Δ_k(t) = min(a_k, t) - a_{k-1}` for `t` in or beyond interval `k`.
    /// The last interval extends to infinity.
    pub fn exposure(&self, k: usize, t: f64) -> f64 {
        let upper = if k + 1 == self.0.len() {
            t
        } else {
            self.0[k].min(t)
        };
        upper - self.lower(k)
    }
}

impl TryFrom<Vec<f64>> for CutPoints {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        CutPoints::new(v)
    }
}

impl From<CutPoints> for Vec<f64> {
    fn from(c: CutPoints) -> Self {
        c.0
    }
}

/// Cut-points at the empirical `k/K` quantiles of the follow-up times.
///
/// The quantile is the inverse empirical CDF, so cut-points are observed
/// times. A quantile repeating its predecessor moves to the midpoint between
/// the predecessor and the next distinct time; `a_K` is the largest time.
pub fn quantile_cutpoints(times: &[f64], k: usize) -> Result<CutPoints> {
    if k == 0 {
        return Err(Error::invalid("number of intervals must be at least 1"));
    }
    if times.is_empty() {
        return Err(Error::invalid("no follow-up times"));
    }
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if k > distinct.len() {
        return Err(Error::invalid(format!(
            "{k} intervals requested but only {} distinct follow-up times",
            distinct.len()
        )));
    }
    let n = sorted.len();
    let max = sorted[n - 1];
    let mut cuts: Vec<f64> = Vec::with_capacity(k);
    for i in 1..k {
        // smallest order statistic with F_n(t) >= i/K, in exact integer arithmetic
        let rank = (i * n).div_ceil(k);
        let mut a = sorted[rank.max(1) - 1];
        let prev = cuts.last().copied().unwrap_or(0.0);
        if a <= prev {
            let next = distinct.iter().copied().find(|&v| v > prev).unwrap_or(max);
            a = 0.5 * (prev + next);
        }
        if a >= max {
            a = 0.5 * (prev + max);
        }
        cuts.push(a);
    }
    cuts.push(max);
    CutPoints::new(cuts)
}

/// Quantile cut-points from a dataset, pooling event and censored times
/// unless `events_only` is set. The last cut-point is always the largest
/// follow-up time.
pub fn dataset_quantile_cutpoints(dataset: &Dataset, k: usize, events_only: bool) -> Result<CutPoints> {
    if !events_only {
        return quantile_cutpoints(&dataset.times(), k);
    }
    let events: Vec<f64> = dataset
        .records
        .iter()
        .filter(|r| r.event)
        .map(|r| r.time)
        .collect();
    let cuts = quantile_cutpoints(&events, k)?;
    let mut points = cuts.0;
    let max = dataset.max_time();
    let last = points.len() - 1;
    if points[last] < max {
        points[last] = max;
    }
    CutPoints::new(points)
}

/// Validates user-supplied cut-points against the data.
///
/// When `a_K` falls short of the largest time it is moved to that time and a
/// warning is returned.
pub fn explicit_cutpoints(points: Vec<f64>, max_time: f64) -> Result<(CutPoints, Option<String>)> {
    let mut cuts = CutPoints::new(points)?;
    if cuts.last() >= max_time {
        return Ok((cuts, None));
    }
    let last = cuts.0.len() - 1;
    let old = cuts.0[last];
    cuts.0[last] = max_time;
    let warning = format!(
        "last cut-point {old} is below the largest follow-up time {max_time}; it was moved to \
         {max_time}, so the last interval now covers ({}, {max_time}] and its hazard height \
         applies over the whole follow-up beyond {}{}",
        cuts.lower(last),
        cuts.lower(last),
        if last == 0 {
            " (a single cut-point still gives an exponential baseline, but over the full follow-up range)"
        } else {
            ""
        }
    );
    log::warn!("{warning}");
    Ok((cuts, Some(warning)))
}

/// Baseline hazard constant on each interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseHazard {
    pub cuts: CutPoints,
    pub log_heights: Vec<f64>,
}

impl PiecewiseHazard {
    pub fn new(cuts: CutPoints, log_heights: Vec<f64>) -> Result<Self> {
        if log_heights.len() != cuts.len() {
            return Err(Error::DimensionMismatch {
                what: "log hazard heights",
                expected: cuts.len(),
                got: log_heights.len(),
            });
        }
        Ok(PiecewiseHazard { cuts, log_heights })
    }

    pub fn hazard(&self, t: f64) -> f64 {
        self.log_heights[self.cuts.interval_of(t)].exp()
    }

    /// `Λ₀(t)`; beyond `a_K` the last height is extended.
    pub fn cumulative(&self, t: f64) -> f64 {
        cumulative_hazard(&self.cuts, &self.log_heights, t)
    }
}

/// `Λ₀(t) = Σ_k λ_k Δ_k(t)`.
pub fn cumulative_hazard(cuts: &CutPoints, log_heights: &[f64], t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let last = cuts.interval_of(t);
    (0..=last)
        .map(|k| log_heights[k].exp() * cuts.exposure(k, t))
        .sum()
}

/// One pseudo-observation `(i, j, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PseudoRow {
    pub cluster: usize,
    pub record: usize,
    pub interval: usize,
    pub y: bool,
    /// `log Δ_k(t_ij)`.
    pub log_offset: f64,
}

/// Rows belonging to one original observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationRows {
    pub cluster: usize,
    pub record: usize,
    pub start: usize,
    pub end: usize,
}

/// The Poisson data expansion: one row per interval an observation was at risk in.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonExpansion {
    pub n_intervals: usize,
    pub p: usize,
    pub n_clusters: usize,
    pub rows: Vec<PseudoRow>,
    /// One entry per record, in record order.
    pub observations: Vec<ObservationRows>,
    /// Full covariate vector `w_ij` of each record.
    pub covariates: Vec<Vec<f64>>,
    /// Number of zero-width rows removed.
    pub dropped: usize,
}

impl PoissonExpansion {
    /// Design row `z_ijk = (ι_k', w_ij')'` of a pseudo-row.
    pub fn design_row(&self, row: &PseudoRow) -> Vec<f64> {
        let mut z = vec![0.0; self.n_intervals];
        z[row.interval] = 1.0;
        z.extend_from_slice(&self.covariates[row.record]);
        z
    }

    /// Pseudo-row count of each cluster (`N_i`).
    pub fn rows_per_cluster(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_clusters];
        for r in &self.rows {
            out[r.cluster] += 1;
        }
        out
    }

    /// Writes the expansion as delimited text for inspection.
    pub fn dump<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "cluster".to_string(),
            "record".into(),
            "interval".into(),
            "y".into(),
            "log_offset".into(),
        ];
        header.extend((0..self.p).map(|k| format!("w{}", k + 1)));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut fields = vec![
                r.cluster.to_string(),
                r.record.to_string(),
                (r.interval + 1).to_string(),
                u8::from(r.y).to_string(),
                r.log_offset.to_string(),
            ];
            fields.extend(self.covariates[r.record].iter().map(f64::to_string));
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Expands every record into its at-risk intervals.
///
/// With `K(t) = min{k : a_k >= t}` and `t > 0` the final interval always has
/// positive width; the zero-width guard only matters for hand-built cut
/// vectors and moves the event to the nearest retained interval on the left.
pub fn expand_poisson(dataset: &Dataset, cuts: &CutPoints) -> PoissonExpansion {
    let mut rows = Vec::new();
    let mut observations = Vec::with_capacity(dataset.records.len());
    let mut covariates = Vec::with_capacity(dataset.records.len());
    let mut dropped = 0;
    for (j, rec) in dataset.records.iter().enumerate() {
        let start = rows.len();
        let last = cuts.interval_of(rec.time);
        let mut pending_event = false;
        for k in 0..=last {
            let width = cuts.exposure(k, rec.time);
            let y = rec.event && k == last;
            if width <= 0.0 {
                dropped += 1;
                pending_event |= y;
                continue;
            }
            rows.push(PseudoRow {
                cluster: rec.cluster,
                record: j,
                interval: k,
                y,
                log_offset: width.ln(),
            });
        }
        if pending_event {
            if let Some(r) = rows[start..].last_mut() {
                r.y = true;
            }
        }
        observations.push(ObservationRows {
            cluster: rec.cluster,
            record: j,
            start,
            end: rows.len(),
        });
        covariates.push(dataset.full_covariates(rec));
    }
    PoissonExpansion {
        n_intervals: cuts.len(),
        p: dataset.p(),
        n_clusters: dataset.n_clusters(),
        rows,
        observations,
        covariates,
        dropped,
    }
}

/// Poisson-form log-likelihood `Σ_rows [y (z'γ + e_i) - exp(z'γ + e_i + log Δ)]`.
///
/// The `-y log Δ` term that distinguishes this from the Poisson pmf is left
/// out, so the value equals the exact conditional proportional hazards
/// log-likelihood.
pub fn poisson_loglik(expansion: &PoissonExpansion, gamma: &[f64], frailties: &[f64]) -> Result<f64> {
    let dim = expansion.n_intervals + expansion.p;
    if gamma.len() != dim {
        return Err(Error::DimensionMismatch {
            what: "gamma",
            expected: dim,
            got: gamma.len(),
        });
    }
    if frailties.len() != expansion.n_clusters {
        return Err(Error::DimensionMismatch {
            what: "frailties",
            expected: expansion.n_clusters,
            got: frailties.len(),
        });
    }
    let (log_heights, xi) = gamma.split_at(expansion.n_intervals);
    let total = expansion
        .rows
        .iter()
        .map(|r| {
            let w = &expansion.covariates[r.record];
            let lin = log_heights[r.interval]
                + w.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>()
                + frailties[r.cluster];
            let y = if r.y { lin } else { 0.0 };
            y - (lin + r.log_offset).exp()
        })
        .sum();
    Ok(total)
}
