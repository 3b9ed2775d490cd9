//! Posterior summaries, predictive curves and model-comparison statistics.
//!
//! LPML and DIC both use the conditional likelihood `f(D_ij | γ, e_i)`, with
//! the cluster frailty evaluated at its draw rather than integrated out.

use crate::chain::PosteriorChain;
use crate::error::{Error, Result};
use crate::hazard::cumulative_hazard;
use crate::ldtfp::TailfreeForest;
use crate::numeric::{
    log_sum_exp, mean, normal_ln_pdf, sorted_quantile, std_normal_cdf, variance, GaussLegendre,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Pointwise posterior mean and equal-tailed band of a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveCurve {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PredictiveCurve {
    /// Averages per-draw curves (`curves[m][g]`) and takes pointwise percentiles.
    fn from_draws(grid: Vec<f64>, curves: &[Vec<f64>], level: f64) -> Self {
        let m = curves.len() as f64;
        let tail = 0.5 * (1.0 - level);
        let mut mean = Vec::with_capacity(grid.len());
        let mut lower = Vec::with_capacity(grid.len());
        let mut upper = Vec::with_capacity(grid.len());
        let mut column = Vec::with_capacity(curves.len());
        for g in 0..grid.len() {
            column.clear();
            column.extend(curves.iter().map(|c| c[g]));
            mean.push(column.iter().sum::<f64>() / m);
            column.sort_by(f64::total_cmp);
            lower.push(sorted_quantile(&column, tail));
            upper.push(sorted_quantile(&column, 1.0 - tail));
        }
        PredictiveCurve {
            grid,
            mean,
            lower,
            upper,
        }
    }

    pub fn write_csv<W: Write>(&self, out: W, grid_name: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([grid_name, "mean", "lower", "upper"])?;
        for g in 0..self.grid.len() {
            w.write_record([
                self.grid[g].to_string(),
                self.mean[g].to_string(),
                self.lower[g].to_string(),
                self.upper[g].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Quadrature used for `∫ exp{-A e^e} g(e | x) de`.
#[derive(Debug, Clone)]
pub struct SurvivalQuadrature {
    rule: GaussLegendre,
    /// Sets wider than this (in frailty units) are split into equal panels.
    pub panel_width: f64,
    /// Integration stops at `± tail_sd · √θ`; the remaining normal tails are
    /// added as point masses at the cut-offs.
    pub tail_sd: f64,
}

impl Default for SurvivalQuadrature {
    fn default() -> Self {
        SurvivalQuadrature::new(32)
    }
}

impl SurvivalQuadrature {
    pub fn new(points: usize) -> Self {
        SurvivalQuadrature {
            rule: GaussLegendre::new(points),
            panel_width: 1.0,
            tail_sd: 8.0,
        }
    }

    /// Nodes `e^{e_k}` and weights `ω_k` with `Σ ω_k h(e_k) ≈ ∫ h(e) g(e | x) de`.
    pub fn frailty_nodes(&self, forest: &TailfreeForest, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let masses = forest.finest_masses(x);
        let scale = masses.len() as f64;
        let theta = forest.theta();
        let sd = forest.tree.sd();
        let limit = self.tail_sd * sd;
        let tail_mass = std_normal_cdf(-self.tail_sd);
        let depth = forest.depth();

        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        nodes.push((-limit).exp());
        weights.push(masses[0] * scale * tail_mass);
        for (s, &mass) in masses.iter().enumerate() {
            let (lo, hi) = forest.tree.set_bounds(depth, s);
            let (lo, hi) = (lo.max(-limit), hi.min(limit));
            if !(hi > lo) || mass == 0.0 {
                continue;
            }
            let panels = ((hi - lo) / self.panel_width).ceil().clamp(1.0, 256.0) as usize;
            let step = (hi - lo) / panels as f64;
            for p in 0..panels {
                let a = lo + p as f64 * step;
                for (e, w) in self.rule.on(a, a + step) {
                    nodes.push(e.exp());
                    weights.push(w * mass * scale * normal_ln_pdf(e, 0.0, theta).exp());
                }
            }
        }
        nodes.push(limit.exp());
        weights.push(masses[masses.len() - 1] * scale * tail_mass);
        (nodes, weights)
    }
}

fn check_grid(grid: &[f64], nonnegative: bool) -> Result<()> {
    if grid.iter().any(|v| !v.is_finite()) || (nonnegative && grid.iter().any(|&v| v < 0.0)) {
        return Err(Error::invalid("grid values must be finite and nonnegative"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("grid must be strictly increasing"));
    }
    Ok(())
}

fn check_profile(chain: &PosteriorChain, profile: &[f64]) -> Result<()> {
    let p = chain.meta.gamma_dim() - chain.meta.n_intervals();
    if profile.len() != p {
        return Err(Error::DimensionMismatch {
            what: "covariate profile",
            expected: p,
            got: profile.len(),
        });
    }
    Ok(())
}

/// Survival curve `S^{(m)}(t | w)` of one draw on a grid.
pub fn draw_survival(
    chain: &PosteriorChain,
    m: usize,
    profile: &[f64],
    grid: &[f64],
    quadrature: &SurvivalQuadrature,
) -> Result<Vec<f64>> {
    let k = chain.meta.n_intervals();
    let gamma = chain.gamma_draw(m);
    let (log_heights, xi) = gamma.split_at(k);
    let lin: f64 = profile.iter().zip(xi).map(|(a, b)| a * b).sum();
    let x = &profile[profile.len() - chain.meta.q..];
    let forest = chain.forest_draw(m)?;
    let (nodes, weights) = quadrature.frailty_nodes(&forest, x);
    let total: f64 = weights.iter().sum();
    let scale = lin.exp();
    Ok(grid
        .iter()
        .map(|&t| {
            let a = cumulative_hazard(&chain.meta.cuts, log_heights, t) * scale;
            if a == 0.0 {
                return 1.0;
            }
            let s: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(u, w)| w * (-a * u).exp())
                .sum();
            (s / total).clamp(0.0, 1.0)
        })
        .collect())
}

/// Posterior predictive survival `S(t | w)` with pointwise bands.
///
/// `profile` is the full covariate vector on the fitted scale; its trailing
/// `q` entries index the frailty law.
pub fn predictive_survival(
    chain: &PosteriorChain,
    profile: &[f64],
    grid: &[f64],
    level: f64,
    quadrature: &SurvivalQuadrature,
) -> Result<PredictiveCurve> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    check_grid(grid, true)?;
    check_profile(chain, profile)?;
    let curves = (0..chain.n_draws())
        .into_par_iter()
        .map(|m| draw_survival(chain, m, profile, grid, quadrature))
        .collect::<Result<Vec<_>>>()?;
    let curve = PredictiveCurve::from_draws(grid.to_vec(), &curves, level);
    assert!(
        curve.mean.windows(2).all(|w| w[1] <= w[0]),
        "predictive survival must be nonincreasing"
    );
    Ok(curve)
}

/// Posterior predictive frailty density `g(e | x)`; with `shifted`, the
/// density of `e + x'ξ_x`.
pub fn predictive_frailty_density(
    chain: &PosteriorChain,
    x: &[f64],
    grid: &[f64],
    shifted: bool,
    level: f64,
) -> Result<PredictiveCurve> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    check_grid(grid, false)?;
    if x.len() != chain.meta.q {
        return Err(Error::DimensionMismatch {
            what: "cluster covariates",
            expected: chain.meta.q,
            got: x.len(),
        });
    }
    let curves = (0..chain.n_draws())
        .into_par_iter()
        .map(|m| {
            let forest = chain.forest_draw(m)?;
            let shift = if shifted {
                chain.xi_x(m).iter().zip(x).map(|(a, b)| a * b).sum()
            } else {
                0.0
            };
            Ok(grid.iter().map(|&v| forest.density(v - shift, x)).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(PredictiveCurve::from_draws(grid.to_vec(), &curves, level))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpmlReport {
    pub lpml: f64,
    pub log_cpo: Vec<f64>,
    pub warnings: Vec<String>,
}

impl LpmlReport {
    pub fn cpo(&self) -> Vec<f64> {
        self.log_cpo.iter().map(|v| v.exp()).collect()
    }
}

/// Gelfand–Dey CPO from a `draws × n_obs` log-likelihood matrix:
/// `log CPO_o = log M − log Σ_m exp(−ℓ_mo)`.
pub fn lpml_from_loglik(loglik: &[f64], n_obs: usize, labels: &[String]) -> Result<LpmlReport> {
    if n_obs == 0 {
        return Ok(LpmlReport {
            lpml: 0.0,
            log_cpo: Vec::new(),
            warnings: Vec::new(),
        });
    }
    let draws = loglik.len() / n_obs;
    if draws == 0 {
        return Err(Error::EmptyChain);
    }
    let ln_m = (draws as f64).ln();
    let mut warnings = Vec::new();
    let log_cpo: Vec<f64> = (0..n_obs)
        .map(|o| {
            let column = (0..draws).map(|m| -loglik[m * n_obs + o]);
            let v = ln_m - log_sum_exp(column);
            let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
            if v == f64::NEG_INFINITY {
                let label = labels.get(o).cloned().unwrap_or_else(|| o.to_string());
                warnings.push(format!("observation {label} has zero likelihood under some draw; CPO = 0"));
            }
            v
        })
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(LpmlReport {
        lpml: log_cpo.iter().sum(),
        log_cpo,
        warnings,
    })
}

pub fn compute_lpml(chain: &PosteriorChain) -> Result<LpmlReport> {
    let ll = chain.loglik.as_ref().ok_or_else(|| {
        Error::invalid("chain has no per-observation log-likelihood; rerun with it recorded")
    })?;
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    lpml_from_loglik(ll, chain.meta.n_obs(), &chain.meta.observation_labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DicReport {
    pub dic: f64,
    pub p_d: f64,
    pub d_bar: f64,
    pub d_at_mean: f64,
}

impl DicReport {
    /// `p_D = D̄ − D(Ω̄)`, `DIC = D̄ + p_D`.
    pub fn from_deviances(d_bar: f64, d_at_mean: f64) -> Self {
        let p_d = d_bar - d_at_mean;
        DicReport {
            dic: d_bar + p_d,
            p_d,
            d_bar,
            d_at_mean,
        }
    }
}

/// DIC with deviance `−2 log L(γ, e)`; `loglik` evaluates `log L` at a
/// `(γ, e)` pair.
pub fn compute_dic<F>(chain: &PosteriorChain, loglik: F) -> Result<DicReport>
where
    F: Fn(&[f64], &[f64]) -> Result<f64> + Sync,
{
    let m = chain.n_draws();
    if m == 0 {
        return Err(Error::EmptyChain);
    }
    let deviances = (0..m)
        .into_par_iter()
        .map(|i| loglik(chain.gamma_draw(i), chain.frailty_draw(i)).map(|l| -2.0 * l))
        .collect::<Result<Vec<f64>>>()?;
    let d_bar = column_means(&deviances, 1, m)[0];
    let gamma_mean = column_means(&chain.gamma, chain.meta.gamma_dim(), m);
    let frailty_mean = column_means(&chain.frailties, chain.meta.n_clusters(), m);
    let d_at_mean = -2.0 * loglik(&gamma_mean, &frailty_mean)?;
    Ok(DicReport::from_deviances(d_bar, d_at_mean))
}

/// Means shifted by the first draw, so constant columns are reproduced exactly.
fn column_means(rows: &[f64], width: usize, draws: usize) -> Vec<f64> {
    let first = &rows[..width];
    let mut out = vec![0.0; width];
    for m in 1..draws {
        for ((o, v), f) in out.iter_mut().zip(&rows[m * width..(m + 1) * width]).zip(first) {
            *o += v - f;
        }
    }
    out.iter_mut().zip(first).for_each(|(v, f)| *v = f + *v / draws as f64);
    out
}

/// `exp(LPML_a − LPML_b)`: how much better model a predicts than model b.
pub fn pseudo_bayes_factor(lpml_a: f64, lpml_b: f64) -> f64 {
    (lpml_a - lpml_b).exp()
}

/// LPML, DIC and the CPO vector of one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub lpml: f64,
    pub dic: f64,
    pub p_d: f64,
    pub d_bar: f64,
    pub cpo: Vec<f64>,
}

impl ComparisonReport {
    pub fn new(lpml: &LpmlReport, dic: &DicReport) -> Self {
        ComparisonReport {
            lpml: lpml.lpml,
            dic: dic.dic,
            p_d: dic.p_d,
            d_bar: dic.d_bar,
            cpo: lpml.cpo(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ParameterSummary {
    pub fn from_draws(name: impl Into<String>, draws: &[f64], level: f64) -> Self {
        let mut sorted = draws.to_vec();
        sorted.sort_by(f64::total_cmp);
        let tail = 0.5 * (1.0 - level);
        ParameterSummary {
            name: name.into(),
            mean: mean(draws),
            sd: variance(draws).sqrt(),
            median: sorted_quantile(&sorted, 0.5),
            lower: sorted_quantile(&sorted, tail),
            upper: sorted_quantile(&sorted, 1.0 - tail),
        }
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub level: f64,
    /// Parameters on the fitted (possibly standardized) scale.
    pub rows: Vec<ParameterSummary>,
    /// Hazard heights and coefficients mapped back to raw covariate units.
    pub raw_rows: Option<Vec<ParameterSummary>>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&ParameterSummary> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scale", "parameter", "mean", "sd", "median", "lower", "upper"])?;
        let raw = self.raw_rows.iter().flatten().map(|r| ("raw", r));
        for (scale, r) in self.rows.iter().map(|r| ("fitted", r)).chain(raw) {
            w.write_record([
                scale.to_string(),
                r.name.clone(),
                r.mean.to_string(),
                r.sd.to_string(),
                r.median.to_string(),
                r.lower.to_string(),
                r.upper.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Medians and equal-tailed intervals; hazard heights appear both as
/// `log_lambda_k` and `lambda_k`.
pub fn summarize_posterior(chain: &PosteriorChain, level: f64) -> Result<PosteriorSummary> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("credibility level must lie in (0, 1)"));
    }
    let k = chain.meta.n_intervals();
    let names = &chain.meta.gamma_names;
    let gamma_rows = |gammas: &dyn Fn(usize) -> Vec<f64>| {
        let draws: Vec<Vec<f64>> = (0..chain.n_draws()).map(gammas).collect();
        let mut rows = Vec::new();
        for (j, name) in names.iter().enumerate() {
            let column: Vec<f64> = draws.iter().map(|g| g[j]).collect();
            rows.push(ParameterSummary::from_draws(name.clone(), &column, level));
            if j < k {
                let heights: Vec<f64> = column.iter().map(|v| v.exp()).collect();
                rows.push(ParameterSummary::from_draws(
                    format!("lambda_{}", j + 1),
                    &heights,
                    level,
                ));
            }
        }
        rows
    };
    let mut rows = gamma_rows(&|m| chain.gamma_draw(m).to_vec());
    rows.push(ParameterSummary::from_draws("theta", &chain.theta, level));
    rows.push(ParameterSummary::from_draws("precision", &chain.precision, level));
    let raw_rows = chain
        .meta
        .standardization
        .as_ref()
        .map(|s| gamma_rows(&|m| s.raw_gamma(chain.gamma_draw(m), k)));
    Ok(PosteriorSummary {
        level,
        rows,
        raw_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pbf_arithmetic() {
        assert!((pseudo_bayes_factor(-2222.0, -2226.0) - 4f64.exp()).abs() < 1e-9);
        assert_eq!(pseudo_bayes_factor(-3.0, -3.0), 1.0);
        let (a, b) = (-10.5, -12.25);
        assert!((pseudo_bayes_factor(a, b) * pseudo_bayes_factor(b, a) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dic_definition() {
        let r = DicReport::from_deviances(4440.0, 4436.0);
        assert_eq!((r.p_d, r.dic), (4.0, 4444.0));
    }

    #[test]
    fn single_draw_cpo_is_the_likelihood() {
        let ll = [-1.25, -0.5, -3.0];
        let r = lpml_from_loglik(&ll, 3, &[]).unwrap();
        for (a, b) in r.log_cpo.iter().zip(ll) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((r.lpml + 4.75).abs() < 1e-14);
    }

    #[test]
    fn zero_likelihood_gives_zero_cpo() {
        let ll = [-1.0, f64::NEG_INFINITY, -2.0, -0.5];
        let labels = vec!["a:1".to_string(), "b:1".to_string()];
        let r = lpml_from_loglik(&ll, 2, &labels).unwrap();
        assert_eq!(r.log_cpo[1], f64::NEG_INFINITY);
        assert_eq!(r.lpml, f64::NEG_INFINITY);
        assert!(r.warnings[0].contains("b:1"));
    }

    #[test]
    fn cpo_bounded_by_largest_likelihood() {
        let ll = [-1.0, -2.0, -0.3, -4.0, -0.9, -2.5];
        let r = lpml_from_loglik(&ll, 2, &[]).unwrap();
        assert!(r.log_cpo[0] <= -0.3 && r.log_cpo[1] <= -0.9);
    }

    #[test]
    fn summary_of_small_sets() {
        let s = ParameterSummary::from_draws("a", &[3.0, 1.0, 2.0], 0.95);
        assert_eq!(s.median, 2.0);
        let s = ParameterSummary::from_draws("b", &[-2.0, -1.0, 0.0, 1.0, 2.0], 0.9);
        assert!((s.upper - s.median + (s.lower - s.median)).abs() < 1e-15);
    }
}
