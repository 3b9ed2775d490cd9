//! `summarize`: descriptive summary of an input data set.

use crate::config::{read_toml, DataArgs, DataConfig, DataSection};
use crate::error::{CliError, CliResult};
use crate::manifest::{data_digest, tracked, Run, RunManifest};
use clap::Args;
use frailtree::data::{goodman_kruskal_gamma, summarize, Dataset, DatasetSummary, GammaStatistic};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Args)]
pub struct SummarizeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Two covariates `a,b` whose ordinal association (Goodman–Kruskal γ) is reported.
    #[arg(long, value_name = "A,B")]
    pub association: Option<String>,
    /// Write `summary.json` and a manifest to this directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// TOML file with a [data] section.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SummarizeFile {
    #[serde(default)]
    data: DataSection,
}

#[derive(Debug, Serialize)]
struct Association {
    a: String,
    b: String,
    #[serde(flatten)]
    statistic: GammaStatistic,
}

#[derive(Debug, Serialize)]
struct Report {
    #[serde(flatten)]
    summary: DatasetSummary,
    association: Option<Association>,
}

fn column(dataset: &Dataset, name: &str) -> CliResult<Vec<f64>> {
    let names = dataset.covariate_names();
    let index = names.iter().position(|n| n == name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown covariate `{name}` (known: {})",
            names.join(", ")
        ))
    })?;
    Ok(dataset
        .records
        .iter()
        .map(|r| dataset.full_covariates(r)[index])
        .collect())
}

fn association(dataset: &Dataset, raw: &str) -> CliResult<Association> {
    let parts = crate::config::split_list(raw);
    let [a, b] = parts.as_slice() else {
        return Err(CliError::Config(format!("--association needs two covariates, got `{raw}`")));
    };
    let statistic = goodman_kruskal_gamma(&column(dataset, a)?, &column(dataset, b)?)
        .map_err(|e| CliError::Data(e.to_string()))?;
    Ok(Association {
        a: a.clone(),
        b: b.clone(),
        statistic,
    })
}

fn print(report: &Report) {
    let s = &report.summary;
    println!(
        "{} subjects in {} clusters; {} events, {} censored ({:.1}% events)",
        s.n_subjects,
        s.n_clusters,
        s.events,
        s.censored,
        100.0 * s.event_proportion
    );
    for c in &s.continuous {
        println!("  {:<20} min {:.4}  median {:.4}  max {:.4}", c.name, c.min, c.median, c.max);
    }
    for c in &s.categorical {
        println!("  {}", c.name);
        for l in &c.levels {
            println!("    {:<18} {:>8}  {:>6.1}%", l.level, l.count, 100.0 * l.proportion);
        }
    }
    if let Some(a) = &report.association {
        let g = &a.statistic;
        println!(
            "  gamma({}, {}) = {:.4} (95% CI {:.4} to {:.4})",
            a.a, a.b, g.gamma, g.ci95.0, g.ci95.1
        );
    }
}

pub fn run(args: &SummarizeArgs) -> CliResult<Option<RunManifest>> {
    let file: SummarizeFile = read_toml(args.config.as_deref())?;
    let mut data = DataConfig::resolve(&args.data, &file.data)?;
    // summaries are always on the raw scale
    data.standardize = false;
    let build = || -> CliResult<Report> {
        let dataset = data.load()?;
        let summary = summarize(&dataset).map_err(CliError::data)?;
        let association = args
            .association
            .as_deref()
            .map(|raw| association(&dataset, raw))
            .transpose()?;
        Ok(Report { summary, association })
    };
    let Some(out) = &args.out else {
        print(&build()?);
        return Ok(None);
    };
    #[derive(Serialize)]
    struct Config<'a> {
        data: &'a DataConfig,
        association: &'a Option<String>,
    }
    let config = Config {
        data: &data,
        association: &args.association,
    };
    let run = Run::begin(out, "summarize", &config, None, None, 1)?;
    tracked(run, |run| {
        let subjects = run.add_input(&data.subjects)?;
        let clusters = run.add_input(&data.clusters)?;
        run.manifest.data_digest = Some(data_digest(&subjects, &clusters));
        let report = build()?;
        print(&report);
        let path = run.path("summary.json");
        let text = serde_json::to_string_pretty(&report).expect("summary serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))
    })
    .map(Some)
}
