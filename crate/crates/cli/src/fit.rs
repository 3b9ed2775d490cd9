//! `fit`: one model, one or more chains, with summaries and model-comparison figures.

use crate::config::{default_jobs, read_toml, DataArgs, DataConfig, DataSection};
use crate::error::{CliError, CliResult};
use crate::manifest::{data_digest, tracked, Run, RunManifest};
use clap::Args;
use frailtree::chain::{Controls, LoglikFormat, PosteriorChain};
use frailtree::data::Dataset;
use frailtree::hazard::{dataset_quantile_cutpoints, expand_poisson, explicit_cutpoints, CutPoints};
use frailtree::inference::{compute_dic, compute_lpml, summarize_posterior, ComparisonReport};
use frailtree::ldtfp::{FrailtyLawKind, LawHyper, PrecisionPrior};
use frailtree::sampler::likelihood::ObservationModel;
use frailtree::sampler::{run_chain, ModelSpec, RegressionPrior};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Frailty law: ldtfp, gaussian or exchangeable [default: ldtfp].
    #[arg(long, value_name = "LAW")]
    pub frailty: Option<String>,
    /// Depth J of the partition tree (2^J finest sets) [default: 4].
    #[arg(long, value_name = "J")]
    pub depth: Option<usize>,
    /// Baseline cut-points: `quantile:K` or an increasing comma-separated list [default: quantile:10].
    #[arg(long, value_name = "SPEC")]
    pub cuts: Option<String>,
    /// Place quantile cut-points at event times only instead of all follow-up times.
    #[arg(long)]
    pub events_only: bool,
    /// Exponent r of the level weights ρ(j) = j^r [default: 2].
    #[arg(long, value_name = "R")]
    pub rho_power: Option<f64>,
    /// Shape τ₁ of the Gamma prior on θ⁻² [default: 1.001].
    #[arg(long, value_name = "X")]
    pub tau1: Option<f64>,
    /// Rate τ₂ of the Gamma prior on θ⁻² [default: 1.001].
    #[arg(long, value_name = "X")]
    pub tau2: Option<f64>,
    /// Prior variance of every log hazard height and regression coefficient [default: 1000].
    #[arg(long, value_name = "X")]
    pub gamma_variance: Option<f64>,
    /// Total MCMC iterations, burn-in included [default: 55000].
    #[arg(long, value_name = "N")]
    pub iters: Option<usize>,
    /// Burn-in iterations; proposal adaptation stops at its end [default: 5000].
    #[arg(long, value_name = "N")]
    pub burnin: Option<usize>,
    /// Keep every N-th post-burn-in iteration [default: 10].
    #[arg(long, value_name = "N")]
    pub thin: Option<usize>,
    /// Master seed; chain k uses random stream k [default: 1].
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Number of independent chains, pooled for summaries [default: 1].
    #[arg(long, value_name = "N")]
    pub chains: Option<usize>,
    /// Worker threads [default: available parallelism]. Does not change any output.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Storage of the per-observation log-likelihood matrix: csv or binary [default: binary].
    #[arg(long, value_name = "FORMAT")]
    pub loglik_format: Option<String>,
    /// Credibility level of reported intervals [default: 0.95].
    #[arg(long, value_name = "P")]
    pub level: Option<f64>,
    /// Also write the Poisson expansion as `expansion.csv`.
    #[arg(long)]
    pub dump_expansion: bool,
    /// Output directory [default: frailtree-fit].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// TOML file with [data], [model], [mcmc] and [output] sections.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitFile {
    #[serde(default)]
    data: DataSection,
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    mcmc: McmcSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    frailty: Option<String>,
    depth: Option<usize>,
    cuts: Option<String>,
    events_only: Option<bool>,
    rho_power: Option<f64>,
    tau1: Option<f64>,
    tau2: Option<f64>,
    precision_shape: Option<f64>,
    precision_rate: Option<f64>,
    fixed_precision: Option<f64>,
    gamma_variance: Option<f64>,
    n_scale: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct McmcSection {
    iterations: Option<usize>,
    burn_in: Option<usize>,
    thin: Option<usize>,
    seed: Option<u64>,
    chains: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
    loglik_format: Option<String>,
    level: Option<f64>,
    dump_expansion: Option<bool>,
}

/// Fully resolved fit settings; hashed into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub data: DataConfig,
    pub frailty: FrailtyLawKind,
    pub depth: usize,
    pub cuts: String,
    pub events_only: bool,
    pub rho_power: f64,
    pub law: LawHyper,
    pub gamma_variance: f64,
    pub n_scale: Option<f64>,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
    pub loglik_format: LoglikFormat,
    pub level: f64,
    pub dump_expansion: bool,
}

/// Parsed `--cuts`.
#[derive(Debug, Clone, PartialEq)]
pub enum CutSpec {
    Quantile(usize),
    Explicit(Vec<f64>),
}

impl std::str::FromStr for CutSpec {
    type Err = CliError;
    fn from_str(raw: &str) -> CliResult<Self> {
        let bad = |msg: String| CliError::Config(format!("cuts `{raw}`: {msg}"));
        if let Some(k) = raw.trim().strip_prefix("quantile:") {
            let k: usize = k.trim().parse().map_err(|_| bad("K must be a positive integer".into()))?;
            if k == 0 {
                return Err(bad("K must be at least 1".into()));
            }
            return Ok(CutSpec::Quantile(k));
        }
        let points = raw
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad(format!("`{}` is not a number", s.trim()))))
            .collect::<CliResult<Vec<f64>>>()?;
        Ok(CutSpec::Explicit(points))
    }
}

fn parse_loglik_format(raw: &str) -> CliResult<LoglikFormat> {
    match raw {
        "csv" => Ok(LoglikFormat::Csv),
        "binary" | "bin" => Ok(LoglikFormat::Binary),
        other => Err(CliError::Config(format!(
            "loglik format must be csv or binary, got `{other}`"
        ))),
    }
}

impl FitConfig {
    pub fn resolve(args: &FitArgs) -> CliResult<(Self, PathBuf, usize)> {
        let file: FitFile = read_toml(args.config.as_deref())?;
        let (m, c, o) = (&file.model, &file.mcmc, &file.output);
        let frailty: FrailtyLawKind = args
            .frailty
            .as_deref()
            .or(m.frailty.as_deref())
            .unwrap_or("ldtfp")
            .parse()
            .map_err(|e: frailtree::Error| CliError::Config(e.to_string()))?;
        let defaults = LawHyper::default();
        let precision_prior = match (m.fixed_precision, m.precision_shape, m.precision_rate) {
            (Some(v), None, None) => PrecisionPrior::Fixed(v),
            (Some(_), _, _) => {
                return Err(CliError::Config(
                    "model.fixed_precision cannot be combined with precision_shape/precision_rate".into(),
                ))
            }
            (None, shape, rate) => match defaults.precision_prior {
                PrecisionPrior::Gamma { shape: s0, rate: r0 } => PrecisionPrior::Gamma {
                    shape: shape.unwrap_or(s0),
                    rate: rate.unwrap_or(r0),
                },
                fixed => fixed,
            },
        };
        let law = LawHyper {
            tau1: args.tau1.or(m.tau1).unwrap_or(defaults.tau1),
            tau2: args.tau2.or(m.tau2).unwrap_or(defaults.tau2),
            precision_prior,
        };
        law.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let cuts = args
            .cuts
            .clone()
            .or_else(|| m.cuts.clone())
            .unwrap_or_else(|| "quantile:10".into());
        cuts.parse::<CutSpec>()?;
        let loglik_format = parse_loglik_format(
            args.loglik_format
                .as_deref()
                .or(o.loglik_format.as_deref())
                .unwrap_or("binary"),
        )?;
        let level = args.level.or(o.level).unwrap_or(0.95);
        if !(level > 0.0 && level < 1.0) {
            return Err(CliError::Config(format!("level must lie in (0, 1), got {level}")));
        }
        let chains = args.chains.or(c.chains).unwrap_or(1);
        if chains == 0 {
            return Err(CliError::Config("chains must be at least 1".into()));
        }
        let config = FitConfig {
            data: DataConfig::resolve(&args.data, &file.data)?,
            frailty,
            depth: args.depth.or(m.depth).unwrap_or(4),
            cuts,
            events_only: args.events_only || m.events_only.unwrap_or(false),
            rho_power: args.rho_power.or(m.rho_power).unwrap_or(2.0),
            law,
            gamma_variance: args.gamma_variance.or(m.gamma_variance).unwrap_or(1e3),
            n_scale: m.n_scale,
            iterations: args.iters.or(c.iterations).unwrap_or(55_000),
            burn_in: args.burnin.or(c.burn_in).unwrap_or(5_000),
            thin: args.thin.or(c.thin).unwrap_or(10),
            seed: args.seed.or(c.seed).unwrap_or(1),
            chains,
            loglik_format,
            level,
            dump_expansion: args.dump_expansion || o.dump_expansion.unwrap_or(false),
        };
        config.controls(0).validate().map_err(|e| CliError::Config(e.to_string()))?;
        let out = args
            .out
            .clone()
            .or_else(|| o.dir.clone())
            .unwrap_or_else(|| PathBuf::from("frailtree-fit"));
        let jobs = args.jobs.unwrap_or_else(default_jobs).max(1);
        Ok((config, out, jobs))
    }

    pub fn controls(&self, stream: u64) -> Controls {
        Controls {
            stream,
            ..Controls::new(self.iterations, self.burn_in, self.thin, self.seed)
        }
    }

    fn cut_points(&self, dataset: &Dataset) -> CliResult<(CutPoints, Option<String>)> {
        match self.cuts.parse::<CutSpec>()? {
            CutSpec::Quantile(k) => dataset_quantile_cutpoints(dataset, k, self.events_only)
                .map(|c| (c, None))
                .map_err(|e| CliError::Config(format!("cuts: {e}"))),
            CutSpec::Explicit(points) => explicit_cutpoints(points, dataset.max_time())
                .map_err(|e| CliError::Config(format!("cuts: {e}"))),
        }
    }

    pub fn model_spec(&self, dataset: Dataset) -> CliResult<ModelSpec> {
        let (cuts, _) = self.cut_points(&dataset)?;
        let mut spec = ModelSpec::new(dataset, cuts, self.frailty, self.depth);
        spec.hyper.law = self.law;
        spec.hyper.gamma = RegressionPrior::isotropic(spec.gamma_dim(), self.gamma_variance);
        spec.rho_power = self.rho_power;
        spec.n_scale = self.n_scale;
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }
}

/// Name of the directory holding chain `k` (1-based).
pub fn chain_dir(k: usize) -> String {
    format!("chain-{k}")
}

/// Model-comparison figures of one fit, written as `comparison.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitComparison {
    pub frailty: FrailtyLawKind,
    pub data_digest: String,
    pub draws: usize,
    #[serde(flatten)]
    pub report: ComparisonReport,
    pub warnings: Vec<String>,
}

pub const COMPARISON: &str = "comparison.json";
pub const SUMMARY: &str = "summary.csv";

fn write_with<F>(path: &Path, body: F) -> CliResult<()>
where
    F: FnOnce(BufWriter<File>) -> frailtree::Result<()>,
{
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    body(BufWriter::new(file)).map_err(CliError::from)
}

pub fn run(args: &FitArgs) -> CliResult<RunManifest> {
    let (config, out, jobs) = FitConfig::resolve(args)?;
    let run = Run::begin(&out, "fit", &config, Some(config.seed), Some(config.controls(0)), jobs)?;
    tracked(run, |run| fit(run, &config, jobs))
}

fn fit(run: &mut Run, config: &FitConfig, jobs: usize) -> CliResult<()> {
    let subjects = run.add_input(&config.data.subjects)?;
    let clusters = run.add_input(&config.data.clusters)?;
    let digest = data_digest(&subjects, &clusters);
    run.manifest.data_digest = Some(digest.clone());
    run.save()?;

    let dataset = config.data.load()?;
    log::info!(
        "{} subjects ({} events) in {} clusters",
        dataset.n_records(),
        dataset.n_events(),
        dataset.n_clusters()
    );
    let (_, cut_warning) = config.cut_points(&dataset)?;
    let spec = config.model_spec(dataset)?;
    if config.dump_expansion {
        let expansion = expand_poisson(&spec.dataset, &spec.cuts);
        write_with(&run.path("expansion.csv"), |w| expansion.dump(w))?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    let chains: Vec<PosteriorChain> = pool.install(|| {
        use rayon::prelude::*;
        (0..config.chains)
            .into_par_iter()
            .map(|k| run_chain(&spec, &config.controls(k as u64)))
            .collect::<frailtree::Result<Vec<_>>>()
    })?;

    let mut pooled: Option<PosteriorChain> = None;
    for (k, mut chain) in chains.into_iter().enumerate() {
        let d = &chain.meta.diagnostics;
        log::info!(
            "chain {}: acceptance γ {:.2}, frailties {:.2}, nodes {:.2}, θ {:.2}",
            k + 1,
            d.gamma_acceptance,
            d.frailty_acceptance_mean,
            d.node_acceptance_mean,
            d.theta_acceptance
        );
        run.manifest
            .timings
            .insert(format!("{}_seconds", chain_dir(k + 1)), d.seconds);
        chain.meta.diagnostics.seconds = 0.0;
        chain.write(&run.path(&chain_dir(k + 1)), config.loglik_format)?;
        match pooled.as_mut() {
            None => pooled = Some(chain),
            Some(p) => p.append(&chain)?,
        }
    }
    let pooled = pooled.expect("at least one chain");

    let summary = summarize_posterior(&pooled, config.level)?;
    write_with(&run.path(SUMMARY), |w| summary.write_csv(w))?;

    let (lpml, dic) = pool.install(|| {
        let model = ObservationModel::new(&expand_poisson(&spec.dataset, &spec.cuts));
        let lpml = compute_lpml(&pooled)?;
        let dic = compute_dic(&pooled, |g, e| Ok(model.loglik(g, e)))?;
        Ok::<_, frailtree::Error>((lpml, dic))
    })?;
    let mut warnings = lpml.warnings.clone();
    warnings.extend(cut_warning);
    let comparison = FitComparison {
        frailty: config.frailty,
        data_digest: digest,
        draws: pooled.n_draws(),
        report: ComparisonReport::new(&lpml, &dic),
        warnings,
    };
    let path = run.path(COMPARISON);
    let text = serde_json::to_string_pretty(&comparison).expect("report serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;

    println!(
        "{}: {} draws, LPML {:.3}, DIC {:.3} (pD {:.3}) -> {}",
        config.frailty.name(),
        pooled.n_draws(),
        lpml.lpml,
        dic.dic,
        dic.p_d,
        run.dir.display()
    );
    Ok(())
}

/// Reads and pools the chains of a completed fit directory.
pub fn load_chains(dir: &Path, manifest: &RunManifest) -> CliResult<PosteriorChain> {
    let config: FitConfig = serde_json::from_value(manifest.config.clone())
        .map_err(|e| CliError::Data(format!("{}: unreadable fit configuration: {e}", dir.display())))?;
    let mut pooled: Option<PosteriorChain> = None;
    for k in 1..=config.chains {
        let chain = PosteriorChain::read(&dir.join(chain_dir(k)))?;
        match pooled.as_mut() {
            None => pooled = Some(chain),
            Some(p) => p.append(&chain)?,
        }
    }
    pooled.ok_or_else(|| CliError::Data(format!("{}: no chains", dir.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cut_specs() {
        assert_eq!("quantile:10".parse::<CutSpec>().unwrap(), CutSpec::Quantile(10));
        assert_eq!(
            "1, 11,16".parse::<CutSpec>().unwrap(),
            CutSpec::Explicit(vec![1.0, 11.0, 16.0])
        );
        assert!("quantile:0".parse::<CutSpec>().is_err());
        assert!("1,x".parse::<CutSpec>().is_err());
    }
}
