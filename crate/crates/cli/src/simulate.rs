//! `simulate`: replicated simulation studies comparing frailty laws.

use crate::config::{default_jobs, read_toml, split_list};
use crate::error::{CliError, CliResult};
use crate::manifest::{tracked, Run, RunManifest};
use clap::Args;
use frailtree::ldtfp::{FrailtyLawKind, LawHyper};
use frailtree::simulate::{format_profile, run_study, Scenario, ScenarioSpec, StudyConfig};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Data-generating scenario: I (mixture frailty) or II (positive-stable frailty) [default: I].
    #[arg(long, value_name = "I|II")]
    pub scenario: Option<String>,
    /// Number of replicated data sets [default: 20].
    #[arg(long, value_name = "N")]
    pub replicates: Option<usize>,
    /// Master seed; replicate r draws from streams r·65536 + slot [default: 1].
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Clusters per data set [default: 100].
    #[arg(long, value_name = "N")]
    pub clusters: Option<usize>,
    /// Subjects per cluster [default: 10].
    #[arg(long, value_name = "N")]
    pub cluster_size: Option<usize>,
    /// Comma-separated frailty laws to fit [default: ldtfp,gaussian].
    #[arg(long, value_name = "LIST")]
    pub methods: Option<String>,
    /// Total MCMC iterations per fit [default: 55000].
    #[arg(long, value_name = "N")]
    pub iters: Option<usize>,
    /// Burn-in iterations per fit [default: 5000].
    #[arg(long, value_name = "N")]
    pub burnin: Option<usize>,
    /// Thinning interval [default: 10].
    #[arg(long, value_name = "N")]
    pub thin: Option<usize>,
    /// Partition tree depth J [default: 4].
    #[arg(long, value_name = "J")]
    pub depth: Option<usize>,
    /// Number of quantile baseline intervals K [default: 10].
    #[arg(long, value_name = "K")]
    pub intervals: Option<usize>,
    /// Worker threads [default: available parallelism]. Does not change any output.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    /// Output directory [default: frailtree-simulate].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// TOML file with a [scenario] section (generator settings) and a [study] section (fit settings).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateFile {
    scenario: Option<toml::Table>,
    #[serde(default)]
    study: StudySection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudySection {
    methods: Option<Vec<String>>,
    iterations: Option<usize>,
    burn_in: Option<usize>,
    thin: Option<usize>,
    depth: Option<usize>,
    n_intervals: Option<usize>,
    tau1: Option<f64>,
    tau2: Option<f64>,
    gamma_variance: Option<f64>,
    rho_power: Option<f64>,
    ise_draws: Option<usize>,
    quadrature_points: Option<usize>,
    level: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateConfig {
    pub scenario: ScenarioSpec,
    pub study: StudyConfig,
}

fn parse_methods(names: &[String]) -> CliResult<Vec<FrailtyLawKind>> {
    names
        .iter()
        .map(|n| n.parse().map_err(|e: frailtree::Error| CliError::Config(e.to_string())))
        .collect()
}

impl SimulateConfig {
    pub fn resolve(args: &SimulateArgs) -> CliResult<(Self, PathBuf, usize)> {
        let file: SimulateFile = read_toml(args.config.as_deref())?;
        let config_err = |e: frailtree::Error| CliError::Config(e.to_string());

        let mut table = file.scenario.clone().unwrap_or_default();
        if let Some(s) = &args.scenario {
            table.insert("scenario".into(), toml::Value::String(s.clone()));
        }
        let name = table
            .get("scenario")
            .and_then(|v| v.as_str())
            .unwrap_or("I")
            .to_string();
        let kind: Scenario = name.parse().map_err(config_err)?;
        let canonical = match kind {
            Scenario::I => "I",
            Scenario::II => "II",
        };
        table.insert("scenario".into(), toml::Value::String(canonical.into()));
        let mut scenario: ScenarioSpec = table
            .try_into()
            .map_err(|e| CliError::Config(format!("[scenario]: {e}")))?;
        if !file.scenario.as_ref().is_some_and(|t| t.contains_key("replicates")) {
            scenario.replicates = 20;
        }
        if !file.scenario.as_ref().is_some_and(|t| t.contains_key("seed")) {
            scenario.seed = 1;
        }
        if let Some(r) = args.replicates {
            scenario.replicates = r;
        }
        if let Some(s) = args.seed {
            scenario.seed = s;
        }
        if let Some(n) = args.clusters {
            scenario.n_clusters = n;
        }
        if let Some(n) = args.cluster_size {
            scenario.cluster_size = n;
        }
        scenario.validate().map_err(config_err)?;

        let s = &file.study;
        let defaults = StudyConfig::default();
        let methods = match (&args.methods, &s.methods) {
            (Some(raw), _) => parse_methods(&split_list(raw))?,
            (None, Some(list)) => parse_methods(list)?,
            (None, None) => defaults.methods.clone(),
        };
        let study = StudyConfig {
            methods,
            iterations: args.iters.or(s.iterations).unwrap_or(defaults.iterations),
            burn_in: args.burnin.or(s.burn_in).unwrap_or(defaults.burn_in),
            thin: args.thin.or(s.thin).unwrap_or(defaults.thin),
            depth: args.depth.or(s.depth).unwrap_or(defaults.depth),
            n_intervals: args.intervals.or(s.n_intervals).unwrap_or(defaults.n_intervals),
            law: LawHyper {
                tau1: s.tau1.unwrap_or(defaults.law.tau1),
                tau2: s.tau2.unwrap_or(defaults.law.tau2),
                ..defaults.law
            },
            gamma_variance: s.gamma_variance.unwrap_or(defaults.gamma_variance),
            rho_power: s.rho_power.unwrap_or(defaults.rho_power),
            ise_draws: s.ise_draws.unwrap_or(defaults.ise_draws),
            quadrature_points: s.quadrature_points.unwrap_or(defaults.quadrature_points),
            level: s.level.unwrap_or(defaults.level),
        };
        if study.methods.is_empty() {
            return Err(CliError::Config("no methods to fit".into()));
        }
        study.law.validate().map_err(config_err)?;
        frailtree::chain::Controls::new(study.iterations, study.burn_in, study.thin, 0)
            .validate()
            .map_err(config_err)?;
        let out = args
            .out
            .clone()
            .or(file.output.dir)
            .unwrap_or_else(|| PathBuf::from("frailtree-simulate"));
        let jobs = args.jobs.unwrap_or_else(default_jobs).max(1);
        Ok((SimulateConfig { scenario, study }, out, jobs))
    }
}

/// Aggregates written as `aggregate.json`.
#[derive(Debug, Serialize)]
struct Aggregate<'a> {
    scenario: &'a ScenarioSpec,
    study: &'a StudyConfig,
    mean_censoring: f64,
    failures: &'a [(FrailtyLawKind, usize)],
    parameters: &'a [frailtree::simulate::ParameterAggregate],
    ise: &'a [frailtree::simulate::IseAggregate],
}

pub fn run(args: &SimulateArgs) -> CliResult<RunManifest> {
    let (config, out, jobs) = SimulateConfig::resolve(args)?;
    let run = Run::begin(&out, "simulate", &config, Some(config.scenario.seed), None, jobs)?;
    tracked(run, |run| {
        let report = run_study(&config.scenario, &config.study, jobs)?;
        let total: f64 = report.results.iter().map(|r| r.seconds).sum();
        run.manifest.timings.insert("fit_seconds_total".into(), total);

        let write = |name: &str, f: &dyn Fn(BufWriter<File>) -> frailtree::Result<()>| {
            let path = run.path(name);
            let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
            f(BufWriter::new(file)).map_err(CliError::from)
        };
        write("replicates.csv", &|w| report.write_replicates(w))?;
        write("parameters.csv", &|w| report.write_parameter_table(w))?;
        write("ise.csv", &|w| report.write_ise_table(w))?;
        let aggregate = Aggregate {
            scenario: &report.scenario,
            study: &report.config,
            mean_censoring: report.mean_censoring,
            failures: &report.failures,
            parameters: &report.parameters,
            ise: &report.ise,
        };
        let path = run.path("aggregate.json");
        let text = serde_json::to_string_pretty(&aggregate).expect("aggregate serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;

        println!(
            "scenario {:?}: {} replicates, mean censoring {:.3}",
            config.scenario.scenario, config.scenario.replicates, report.mean_censoring
        );
        for a in &report.ise {
            println!(
                "  ISE x1000 {:<22} {:<14} {:.3} (sd {:.3}, n {})",
                a.method.name(),
                format_profile(&a.profile),
                a.mean * 1e3,
                a.sd * 1e3,
                a.replicates
            );
        }
        for a in &report.parameters {
            println!(
                "  {:<22} {:<4} bias {:+.4}  coverage {:.2}",
                a.method.name(),
                a.parameter,
                a.bias,
                a.coverage
            );
        }
        for (method, count) in &report.failures {
            if *count > 0 {
                log::warn!("{} failed on {count} replicates", method.name());
            }
        }
        Ok(())
    })
}
