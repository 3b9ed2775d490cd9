//! Simulated clustered survival data with known truth, and the replicate
//! study harness that scores fitted models against it.
//!
//! Scenario I draws frailties from the bimodal mixture
//! `0.5 N(−e^{0.4x}, 1) + 0.5 N(e^{0.4x}, 1)` and event times from the
//! conditional PH model with unit baseline hazard. Scenario II draws
//! `exp(e) ~ PS(α(x))` so that the marginal survival is exactly
//! `exp(−t e^{w̃'η})`.

use crate::chain::Controls;
use crate::data::{ClusterInfo, Dataset, SurvivalRecord};
use crate::error::{Error, Result};
use crate::hazard::quantile_cutpoints;
use crate::inference::{
    draw_survival, summarize_posterior, ParameterSummary, SurvivalQuadrature,
};
use crate::ldtfp::{FrailtyLawKind, LawHyper};
use crate::numeric::{mean, variance, GaussLegendre};
use crate::rng::replicate_stream;
use crate::sampler::{run_chain, ModelSpec};
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Exp1, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

/// One draw from the positive stable law with Laplace transform `exp(−s^α)`.
pub fn sample_positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "positive stable index must lie in (0, 1), got {alpha}"
        )));
    }
    let u: f64 = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    let w: f64 = Exp1.sample(rng);
    let a = PI * u;
    let r = (1.0 - alpha) / alpha;
    let num = (alpha * a).sin() * ((1.0 - alpha) * a).sin().powf(r);
    Ok(num / a.sin().powf(1.0 / alpha) * w.powf(-r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    I,
    II,
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "i" | "1" => Ok(Scenario::I),
            "II" | "ii" | "2" => Ok(Scenario::II),
            other => Err(Error::invalid(format!("unknown scenario `{other}` (expected I or II)"))),
        }
    }
}

/// Data-generating settings. Scenario-dependent fields left unset take the
/// scenario defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    #[serde(default = "default_clusters")]
    pub n_clusters: usize,
    #[serde(default = "default_cluster_size")]
    pub cluster_size: usize,
    /// Scenario I coefficients `(ξ₁, ξ₂, ξ_x)`.
    #[serde(default)]
    pub xi: Option<Vec<f64>>,
    /// Scenario II coefficients `η`.
    #[serde(default)]
    pub eta: Option<Vec<f64>>,
    /// Scenario I mixture: component means `±e^{slope·x}`.
    #[serde(default = "default_mixture_slope")]
    pub mixture_slope: f64,
    /// Scenario II: `α = 1 / (1 + e^{−a − b x})` with `(a, b)`.
    #[serde(default = "default_alpha_logit")]
    pub alpha_logit: [f64; 2],
    #[serde(default)]
    pub x_range: Option<[f64; 2]>,
    #[serde(default = "default_censoring")]
    pub censoring: [f64; 2],
    #[serde(default)]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_clusters() -> usize {
    100
}
fn default_cluster_size() -> usize {
    10
}
fn default_mixture_slope() -> f64 {
    0.4
}
fn default_alpha_logit() -> [f64; 2] {
    [0.5, 0.5]
}
fn default_censoring() -> [f64; 2] {
    [0.25, 4.0]
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario) -> Self {
        ScenarioSpec {
            scenario,
            n_clusters: default_clusters(),
            cluster_size: default_cluster_size(),
            xi: None,
            eta: None,
            mixture_slope: default_mixture_slope(),
            alpha_logit: default_alpha_logit(),
            x_range: None,
            censoring: default_censoring(),
            replicates: 0,
            seed: 0,
        }
    }

    pub fn xi(&self) -> Vec<f64> {
        self.xi.clone().unwrap_or_else(|| vec![1.0, 0.5, 1.0])
    }

    pub fn eta(&self) -> Vec<f64> {
        self.eta.clone().unwrap_or_else(|| vec![1.0, 0.5])
    }

    pub fn x_range(&self) -> [f64; 2] {
        self.x_range.unwrap_or(match self.scenario {
            Scenario::I => [-3.0, 3.0],
            Scenario::II => [0.0, 2.0],
        })
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.x_range();
        if !(lo < hi) {
            return Err(Error::invalid("x_range must be increasing"));
        }
        let [c0, c1] = self.censoring;
        if !(0.0 <= c0 && c0 < c1 && c1.is_finite()) {
            return Err(Error::invalid("censoring bounds must satisfy 0 <= lower < upper"));
        }
        match self.scenario {
            Scenario::I if self.xi().len() != 3 => {
                Err(Error::invalid("Scenario I needs three coefficients (ξ₁, ξ₂, ξ_x)"))
            }
            Scenario::II if self.eta().len() != 2 => {
                Err(Error::invalid("Scenario II needs two coefficients η"))
            }
            _ => Ok(()),
        }
    }

    /// Positive stable index of a cluster with covariate `x`.
    pub fn alpha(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-self.alpha_logit[0] - self.alpha_logit[1] * x).exp())
    }

    /// Covariate names of the generated data: `w1`, `w2` and cluster-level `x`.
    pub fn covariate_names() -> [&'static str; 3] {
        ["w1", "w2", "x"]
    }

    /// Evaluation profiles `(w1, w2, x)` used for ISE.
    pub fn profiles(&self) -> Vec<[f64; 3]> {
        match self.scenario {
            Scenario::I => vec![[2.0, 1.0, -2.0], [0.0, 1.0, 2.0]],
            Scenario::II => vec![[2.0, 1.0, 0.5], [0.0, 1.0, 1.5]],
        }
    }

    /// True survival function at a profile `(w1, w2, x)`.
    pub fn truth(&self, profile: &[f64]) -> TruthSurvival {
        match self.scenario {
            Scenario::I => {
                let lin = profile.iter().zip(self.xi()).map(|(a, b)| a * b).sum();
                TruthSurvival::Mixture {
                    lin,
                    shift: (self.mixture_slope * profile[2]).exp(),
                    rule: GaussLegendre::new(200),
                }
            }
            Scenario::II => TruthSurvival::Exponential {
                rate: (profile[0] * self.eta()[0] + profile[1] * self.eta()[1]).exp(),
            },
        }
    }
}

/// A generated dataset with the latent quantities that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub dataset: Dataset,
    pub frailties: Vec<f64>,
    pub censoring_fraction: f64,
}

/// Draws one dataset. Per cluster the order of draws is `x`, the frailty,
/// then per subject `w1`, `w2`, the event clock and the censoring time.
pub fn generate<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<SimulatedData> {
    spec.validate()?;
    let [x_lo, x_hi] = spec.x_range();
    let x_law = Uniform::new(x_lo, x_hi).map_err(|e| Error::invalid(e.to_string()))?;
    let c_law = Uniform::new(spec.censoring[0], spec.censoring[1])
        .map_err(|e| Error::invalid(e.to_string()))?;
    let coin = Bernoulli::new(0.5).expect("valid probability");
    let xi = spec.xi();
    let eta = spec.eta();

    let mut clusters = Vec::with_capacity(spec.n_clusters);
    let mut records = Vec::with_capacity(spec.n_clusters * spec.cluster_size);
    let mut frailties = Vec::with_capacity(spec.n_clusters);
    for i in 0..spec.n_clusters {
        let x = x_law.sample(rng);
        let (frailty, alpha) = match spec.scenario {
            Scenario::I => {
                let m = (spec.mixture_slope * x).exp();
                let sign = if coin.sample(rng) { 1.0 } else { -1.0 };
                let z: f64 = StandardNormal.sample(rng);
                (sign * m + z, 1.0)
            }
            Scenario::II => {
                let alpha = spec.alpha(x);
                (sample_positive_stable(alpha, rng)?.ln(), alpha)
            }
        };
        frailties.push(frailty);
        clusters.push(ClusterInfo {
            id: format!("{}", i + 1),
            covariates: vec![x],
        });
        for _ in 0..spec.cluster_size {
            let w1: f64 = StandardNormal.sample(rng);
            let w2 = if coin.sample(rng) { 1.0 } else { 0.0 };
            let clock: f64 = Exp1.sample(rng);
            let t = match spec.scenario {
                Scenario::I => clock / (w1 * xi[0] + w2 * xi[1] + x * xi[2] + frailty).exp(),
                Scenario::II => {
                    let lin = (w1 * eta[0] + w2 * eta[1]) / alpha;
                    (clock / (frailty + lin).exp()).powf(alpha)
                }
            };
            let c = c_law.sample(rng);
            let time = t.min(c).max(f64::MIN_POSITIVE);
            records.push(SurvivalRecord {
                time,
                event: t <= c,
                subject_covariates: vec![w1, w2],
                cluster: i,
            });
        }
    }
    let censored = records.iter().filter(|r| !r.event).count();
    let censoring_fraction = if records.is_empty() {
        0.0
    } else {
        censored as f64 / records.len() as f64
    };
    let dataset = Dataset::new(
        records,
        clusters,
        vec!["w1".into(), "w2".into()],
        vec!["x".into()],
    )?;
    Ok(SimulatedData {
        dataset,
        frailties,
        censoring_fraction,
    })
}

/// Exact survival function of a simulated population at one profile.
#[derive(Debug, Clone)]
pub enum TruthSurvival {
    /// `S(t) = ∫ exp(−t e^{lin + e}) g(e) de` with `g = 0.5 N(−shift, 1) + 0.5 N(shift, 1)`.
    Mixture {
        lin: f64,
        shift: f64,
        rule: GaussLegendre,
    },
    /// `S(t) = exp(−rate · t)`.
    Exponential { rate: f64 },
}

impl TruthSurvival {
    pub fn survival(&self, t: f64) -> f64 {
        match self {
            TruthSurvival::Exponential { rate } => (-rate * t).exp(),
            TruthSurvival::Mixture { lin, shift, rule } => {
                if t <= 0.0 {
                    return 1.0;
                }
                let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
                let component = |m: f64| {
                    rule.integrate(-10.0, 10.0, |z| (-t * (lin + m + z).exp()).exp() * phi(z))
                };
                0.5 * (component(-shift) + component(*shift))
            }
        }
    }

    /// The time at which the survival function equals `s`.
    pub fn time_at(&self, s: f64) -> f64 {
        match self {
            TruthSurvival::Exponential { rate } => -s.ln() / rate,
            TruthSurvival::Mixture { .. } => {
                if s >= 1.0 {
                    return 0.0;
                }
                let mut hi = 1.0;
                while self.survival(hi) > s {
                    hi *= 2.0;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.survival(mid) > s {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-15 * hi {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

/// Nodes `(u_k, w_k)` of the ISE rule on `u ∈ (0, 1)`.
pub fn ise_nodes() -> Vec<(f64, f64)> {
    GaussLegendre::new(200).on(0.0, 1.0).collect()
}

/// `∫ (Ŝ − S)² f_T dt`, computed as `∫₀¹ (Ŝ(t(u)) − (1 − u))² du` with
/// `t(u) = S⁻¹(1 − u)`. `fitted` maps an increasing time grid to survival
/// values.
pub fn weighted_ise<F>(fitted: F, truth: &TruthSurvival) -> Result<f64>
where
    F: FnOnce(&[f64]) -> Result<Vec<f64>>,
{
    let nodes = ise_nodes();
    let times: Vec<f64> = nodes.iter().map(|(u, _)| truth.time_at(1.0 - u)).collect();
    let values = fitted(&times)?;
    if values.len() != times.len() {
        return Err(Error::DimensionMismatch {
            what: "fitted survival values",
            expected: times.len(),
            got: values.len(),
        });
    }
    if values.windows(2).any(|w| w[1] > w[0] + 1e-12) {
        return Err(Error::invalid("fitted survival curve is not nonincreasing"));
    }
    Ok(nodes
        .iter()
        .zip(&values)
        .map(|((u, w), s)| w * (s - (1.0 - u)).powi(2))
        .sum())
}

/// Fit settings shared by every method in a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub methods: Vec<FrailtyLawKind>,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub depth: usize,
    pub n_intervals: usize,
    pub law: LawHyper,
    pub gamma_variance: f64,
    pub rho_power: f64,
    /// At most this many retained draws enter each predictive curve.
    pub ise_draws: usize,
    pub quadrature_points: usize,
    pub level: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            methods: vec![FrailtyLawKind::Ldtfp, FrailtyLawKind::Gaussian],
            iterations: 55_000,
            burn_in: 5_000,
            thin: 10,
            depth: 4,
            n_intervals: 10,
            law: LawHyper::default(),
            gamma_variance: 1e3,
            rho_power: 2.0,
            ise_draws: 1_000,
            quadrature_points: 16,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    pub name: String,
    pub truth: Option<f64>,
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

impl ParameterEstimate {
    pub fn covers(&self) -> Option<bool> {
        self.truth.map(|t| self.lower <= t && t <= self.upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileIse {
    pub profile: [f64; 3],
    pub ise: f64,
}

/// Outcome of fitting one method to one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub method: FrailtyLawKind,
    pub seed: u64,
    pub censoring_fraction: f64,
    /// `None` when the fit succeeded.
    pub failure: Option<String>,
    pub estimates: Vec<ParameterEstimate>,
    pub ise: Vec<ProfileIse>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterAggregate {
    pub method: FrailtyLawKind,
    pub parameter: String,
    pub truth: f64,
    pub bias: f64,
    /// Mean of the posterior standard deviations.
    pub mean_sd: f64,
    /// Standard deviation of the posterior means.
    pub sd_mean: f64,
    pub coverage: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IseAggregate {
    pub method: FrailtyLawKind,
    pub profile: [f64; 3],
    pub mean: f64,
    pub sd: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub scenario: ScenarioSpec,
    pub config: StudyConfig,
    pub results: Vec<ReplicateResult>,
    pub parameters: Vec<ParameterAggregate>,
    pub ise: Vec<IseAggregate>,
    /// Failed fits per method.
    pub failures: Vec<(FrailtyLawKind, usize)>,
    pub mean_censoring: f64,
}

/// Fits one method to one replicate; errors are recorded, not propagated.
pub fn run_replicate(
    scenario: &ScenarioSpec,
    config: &StudyConfig,
    replicate: usize,
    method_slot: usize,
) -> ReplicateResult {
    let start = Instant::now();
    let method = config.methods[method_slot];
    let mut result = ReplicateResult {
        replicate,
        method,
        seed: scenario.seed,
        censoring_fraction: f64::NAN,
        failure: None,
        estimates: Vec::new(),
        ise: Vec::new(),
        seconds: 0.0,
    };
    if let Err(e) = fit_replicate(scenario, config, replicate, method_slot, &mut result) {
        log::warn!("replicate {replicate} ({}) failed: {e}", method.name());
        result.failure = Some(e.to_string());
    }
    result.seconds = start.elapsed().as_secs_f64();
    result
}

fn fit_replicate(
    scenario: &ScenarioSpec,
    config: &StudyConfig,
    replicate: usize,
    method_slot: usize,
    result: &mut ReplicateResult,
) -> Result<()> {
    let mut data_rng = replicate_stream(scenario.seed, replicate as u64, 0);
    let sim = generate(scenario, &mut data_rng)?;
    result.censoring_fraction = sim.censoring_fraction;

    let cuts = quantile_cutpoints(&sim.dataset.times(), config.n_intervals)?;
    let mut spec = ModelSpec::new(sim.dataset, cuts, config.methods[method_slot], config.depth);
    spec.hyper.law = config.law;
    spec.hyper.gamma = crate::sampler::RegressionPrior::isotropic(spec.gamma_dim(), config.gamma_variance);
    spec.rho_power = config.rho_power;
    let controls = Controls {
        stream: replicate as u64 * crate::rng::STREAMS_PER_REPLICATE + 1 + method_slot as u64,
        record_loglik: false,
        ..Controls::new(config.iterations, config.burn_in, config.thin, scenario.seed)
    };
    let chain = run_chain(&spec, &controls)?;

    let summary = summarize_posterior(&chain, config.level)?;
    let truth_xi = match scenario.scenario {
        Scenario::I => Some(scenario.xi()),
        Scenario::II => None,
    };
    for (k, name) in ScenarioSpec::covariate_names().iter().enumerate() {
        let row: &ParameterSummary = summary
            .get(name)
            .ok_or_else(|| Error::invalid(format!("missing coefficient {name}")))?;
        result.estimates.push(ParameterEstimate {
            name: name.to_string(),
            truth: truth_xi.as_ref().map(|t| t[k]),
            mean: row.mean,
            sd: row.sd,
            lower: row.lower,
            upper: row.upper,
        });
    }

    let step = chain.n_draws().div_ceil(config.ise_draws.max(1)).max(1);
    let sub = chain.thinned(step);
    let quadrature = SurvivalQuadrature::new(config.quadrature_points);
    for profile in scenario.profiles() {
        let truth = scenario.truth(&profile);
        let ise = weighted_ise(
            |times| {
                let mut total = vec![0.0; times.len()];
                for m in 0..sub.n_draws() {
                    let s = draw_survival(&sub, m, &profile, times, &quadrature)?;
                    total.iter_mut().zip(s).for_each(|(a, b)| *a += b);
                }
                Ok(total.iter().map(|v| v / sub.n_draws() as f64).collect())
            },
            &truth,
        )?;
        result.ise.push(ProfileIse { profile, ise });
    }
    Ok(())
}

/// Runs every (replicate, method) fit on a pool of `jobs` threads and
/// aggregates in replicate order.
pub fn run_study(scenario: &ScenarioSpec, config: &StudyConfig, jobs: usize) -> Result<StudyReport> {
    scenario.validate()?;
    if config.methods.is_empty() {
        return Err(Error::invalid("a study needs at least one method"));
    }
    Controls::new(config.iterations, config.burn_in, config.thin, 0).validate()?;
    let tasks: Vec<(usize, usize)> = (0..scenario.replicates)
        .flat_map(|r| (0..config.methods.len()).map(move |m| (r, m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let mut results: Vec<ReplicateResult> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(r, m)| run_replicate(scenario, config, r, m))
            .collect()
    });
    results.sort_by_key(|r| {
        (
            r.replicate,
            config.methods.iter().position(|m| *m == r.method).unwrap_or(0),
        )
    });
    Ok(aggregate(scenario, config, results))
}

pub fn aggregate(
    scenario: &ScenarioSpec,
    config: &StudyConfig,
    results: Vec<ReplicateResult>,
) -> StudyReport {
    let mut parameters = Vec::new();
    let mut ise = Vec::new();
    let mut failures = Vec::new();
    for &method in &config.methods {
        let ok: Vec<&ReplicateResult> = results
            .iter()
            .filter(|r| r.method == method && r.failure.is_none())
            .collect();
        let failed = results
            .iter()
            .filter(|r| r.method == method && r.failure.is_some())
            .count();
        failures.push((method, failed));
        if ok.is_empty() {
            continue;
        }
        for (k, name) in ScenarioSpec::covariate_names().iter().enumerate() {
            let Some(truth) = ok[0].estimates.get(k).and_then(|e| e.truth) else {
                continue;
            };
            let means: Vec<f64> = ok.iter().map(|r| r.estimates[k].mean).collect();
            let sds: Vec<f64> = ok.iter().map(|r| r.estimates[k].sd).collect();
            let covered = ok
                .iter()
                .filter(|r| r.estimates[k].covers() == Some(true))
                .count();
            parameters.push(ParameterAggregate {
                method,
                parameter: name.to_string(),
                truth,
                bias: mean(&means) - truth,
                mean_sd: mean(&sds),
                sd_mean: variance(&means).sqrt(),
                coverage: covered as f64 / ok.len() as f64,
                replicates: ok.len(),
            });
        }
        for (j, profile) in scenario.profiles().into_iter().enumerate() {
            let values: Vec<f64> = ok.iter().map(|r| r.ise[j].ise).collect();
            ise.push(IseAggregate {
                method,
                profile,
                mean: mean(&values),
                sd: variance(&values).sqrt(),
                replicates: values.len(),
            });
        }
    }
    let censoring: Vec<f64> = results
        .iter()
        .filter(|r| r.censoring_fraction.is_finite())
        .map(|r| r.censoring_fraction)
        .collect();
    StudyReport {
        scenario: scenario.clone(),
        config: config.clone(),
        results,
        parameters,
        ise,
        failures,
        mean_censoring: if censoring.is_empty() { f64::NAN } else { mean(&censoring) },
    }
}

impl StudyReport {
    pub fn ise_mean(&self, method: FrailtyLawKind, profile: [f64; 3]) -> Option<f64> {
        self.ise
            .iter()
            .find(|a| a.method == method && a.profile == profile)
            .map(|a| a.mean)
    }

    pub fn parameter(&self, method: FrailtyLawKind, name: &str) -> Option<&ParameterAggregate> {
        self.parameters
            .iter()
            .find(|a| a.method == method && a.parameter == name)
    }

    /// One row per (replicate, method, profile). Timings are left out so the
    /// table is reproducible.
    pub fn write_replicates<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["replicate", "method", "status", "censoring", "profile", "ise"]
            .map(String::from)
            .to_vec();
        for name in ScenarioSpec::covariate_names() {
            for stat in ["mean", "sd", "lower", "upper"] {
                header.push(format!("{name}_{stat}"));
            }
        }
        w.write_record(&header)?;
        for r in &self.results {
            let status = match &r.failure {
                None => "ok".to_string(),
                Some(msg) => format!("failed: {msg}"),
            };
            let profiles: Vec<(String, String)> = if r.ise.is_empty() {
                vec![(String::new(), String::new())]
            } else {
                r.ise
                    .iter()
                    .map(|p| (format_profile(&p.profile), p.ise.to_string()))
                    .collect()
            };
            for (profile, value) in profiles {
                let mut row = vec![
                    r.replicate.to_string(),
                    r.method.name().to_string(),
                    status.clone(),
                    r.censoring_fraction.to_string(),
                    profile,
                    value,
                ];
                for k in 0..3 {
                    match r.estimates.get(k) {
                        Some(e) => row.extend(
                            [e.mean, e.sd, e.lower, e.upper].iter().map(f64::to_string),
                        ),
                        None => row.extend(std::iter::repeat_n(String::new(), 4)),
                    }
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Coefficient table: truth, BIAS, MEAN-SD, SD-MEAN and CP per method.
    pub fn write_parameter_table<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "parameter", "truth", "bias", "mean_sd", "sd_mean", "cp", "replicates"])?;
        for a in &self.parameters {
            w.write_record([
                a.method.name().to_string(),
                a.parameter.clone(),
                a.truth.to_string(),
                a.bias.to_string(),
                a.mean_sd.to_string(),
                a.sd_mean.to_string(),
                a.coverage.to_string(),
                a.replicates.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// ISE table, values multiplied by 10³.
    pub fn write_ise_table<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "profile", "ise_mean_x1000", "ise_sd_x1000", "replicates"])?;
        for a in &self.ise {
            w.write_record([
                a.method.name().to_string(),
                format_profile(&a.profile),
                (a.mean * 1e3).to_string(),
                (a.sd * 1e3).to_string(),
                a.replicates.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn format_profile(p: &[f64; 3]) -> String {
    format!("({},{},{})", p[0], p[1], p[2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn alpha_at_one() {
        let spec = ScenarioSpec::new(Scenario::II);
        assert!((spec.alpha(1.0) - 1.0 / (1.0 + (-1f64).exp())).abs() < 1e-15);
        assert!((spec.alpha(1.0) - 0.731).abs() < 1e-3);
    }

    #[test]
    fn stable_index_is_checked() {
        let mut rng = stream(1, 0);
        assert!(sample_positive_stable(1.0, &mut rng).is_err());
        assert!(sample_positive_stable(0.0, &mut rng).is_err());
    }

    #[test]
    fn exact_fit_has_zero_ise() {
        let truth = TruthSurvival::Exponential { rate: 1.3 };
        let ise = weighted_ise(|t| Ok(t.iter().map(|&v| truth.survival(v)).collect()), &truth);
        assert!(ise.unwrap() < 1e-28);
    }

    #[test]
    fn increasing_curve_is_rejected() {
        let truth = TruthSurvival::Exponential { rate: 1.0 };
        let r = weighted_ise(|t| Ok(t.iter().map(|v| v / (1.0 + v)).collect()), &truth);
        assert!(r.is_err());
    }

    #[test]
    fn mixture_truth_inverts() {
        let spec = ScenarioSpec::new(Scenario::I);
        let truth = spec.truth(&[0.0, 1.0, 2.0]);
        for s in [0.9, 0.5, 0.01] {
            let t = truth.time_at(s);
            assert!((truth.survival(t) - s).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_replicates_is_empty() {
        let spec = ScenarioSpec::new(Scenario::I);
        let report = run_study(&spec, &StudyConfig::default(), 2).unwrap();
        assert!(report.results.is_empty() && report.ise.is_empty());
    }
}
