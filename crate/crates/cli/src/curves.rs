//! `curves`: predictive survival and frailty-density curves for covariate profiles.

use crate::error::{CliError, CliResult};
use crate::fit::load_chains;
use crate::manifest::{read_manifest, tracked, Run, RunManifest, RunStatus, MANIFEST};
use clap::Args;
use frailtree::chain::PosteriorChain;
use frailtree::inference::{
    predictive_frailty_density, predictive_survival, PredictiveCurve, SurvivalQuadrature,
};
use frailtree::numeric::quantile;
use serde::Serialize;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

#[derive(Debug, Clone, Args)]
pub struct CurvesArgs {
    /// Completed `fit` output directory.
    #[arg(value_name = "RUN")]
    pub run: PathBuf,
    /// Covariate profile `name=value,...` on the raw scale; repeat for several profiles.
    /// Unlisted covariates sit at 0 on the fitted scale (their mean when standardized).
    #[arg(long = "profile", value_name = "SPEC")]
    pub profiles: Vec<String>,
    /// Cluster covariate to set at its 5%, 50% and 95% sample quantiles, giving three
    /// profiles per --profile (or three profiles on their own).
    #[arg(long, value_name = "NAME")]
    pub quantiles: Option<String>,
    /// Also write the density of e + x'ξ_x, the frailty shifted by the cluster-covariate effect.
    #[arg(long)]
    pub shifted: bool,
    /// Number of survival grid points from 0.
    #[arg(long, value_name = "N", default_value_t = 101)]
    pub time_points: usize,
    /// Right end of the survival grid [default: last cut-point].
    #[arg(long, value_name = "T")]
    pub max_time: Option<f64>,
    /// Frailty grid as `lo,hi,n`.
    #[arg(long, value_name = "LO,HI,N", default_value = "-6,6,241")]
    pub frailty_grid: String,
    /// Credibility level of the pointwise bands.
    #[arg(long, value_name = "P", default_value_t = 0.95)]
    pub level: f64,
    /// Gauss–Legendre points per finest partition set in the survival integral.
    #[arg(long, value_name = "N", default_value_t = 16)]
    pub quadrature: usize,
    /// Output directory [default: RUN/curves].
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
struct CurvesConfig {
    run: PathBuf,
    profiles: Vec<Profile>,
    shifted: bool,
    time_grid: Vec<f64>,
    frailty_grid: Vec<f64>,
    level: f64,
    quadrature: usize,
}

/// A named point in covariate space; `raw` lists every covariate in design order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Profile {
    pub label: String,
    pub description: String,
    pub raw: Vec<f64>,
}

fn covariate_names(chain: &PosteriorChain) -> &[String] {
    &chain.meta.gamma_names[chain.meta.n_intervals()..]
}

/// Raw-scale value that maps to 0 on the fitted scale.
fn neutral(chain: &PosteriorChain) -> Vec<f64> {
    match &chain.meta.standardization {
        Some(s) => s.center.clone(),
        None => vec![0.0; covariate_names(chain).len()],
    }
}

fn fitted(chain: &PosteriorChain, raw: &[f64]) -> Vec<f64> {
    match &chain.meta.standardization {
        Some(s) => s.apply(raw),
        None => raw.to_vec(),
    }
}

fn parse_assignments(chain: &PosteriorChain, spec: &str) -> CliResult<Vec<(usize, f64)>> {
    let names = covariate_names(chain);
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (name, value) = item.split_once('=').ok_or_else(|| {
                CliError::Config(format!("profile entry `{item}` is not name=value"))
            })?;
            let (name, value) = (name.trim(), value.trim());
            let index = names.iter().position(|n| n == name).ok_or_else(|| {
                CliError::Config(format!(
                    "unknown covariate `{name}` in profile (known: {})",
                    names.join(", ")
                ))
            })?;
            let value: f64 = value.parse().map_err(|_| {
                CliError::Config(format!("profile value `{value}` for `{name}` is not a number"))
            })?;
            Ok((index, value))
        })
        .collect()
}

/// Expands the requested profiles, adding quantile variants when asked.
pub fn build_profiles(
    chain: &PosteriorChain,
    specs: &[String],
    quantile_of: Option<&str>,
) -> CliResult<Vec<Profile>> {
    let names = covariate_names(chain);
    let mut bases: Vec<(String, Vec<f64>)> = Vec::new();
    for spec in specs {
        let mut raw = neutral(chain);
        for (i, v) in parse_assignments(chain, spec)? {
            raw[i] = v;
        }
        bases.push((spec.trim().to_string(), raw));
    }
    let Some(name) = quantile_of else {
        return Ok(bases
            .into_iter()
            .enumerate()
            .map(|(i, (description, raw))| Profile {
                label: format!("profile-{}", i + 1),
                description,
                raw,
            })
            .collect());
    };
    let q = chain.meta.q;
    let cluster_names = &chain.meta.cluster_covariate_names;
    let j = cluster_names.iter().position(|n| n == name).ok_or_else(|| {
        CliError::Config(format!(
            "--quantiles needs a cluster covariate, got `{name}` (known: {})",
            cluster_names.join(", ")
        ))
    })?;
    let index = names.len() - q + j;
    let values: Vec<f64> = chain
        .meta
        .cluster_covariates
        .iter()
        .map(|x| match &chain.meta.standardization {
            Some(s) => x[j] * s.scale[index] + s.center[index],
            None => x[j],
        })
        .collect();
    if bases.is_empty() {
        bases.push((String::new(), neutral(chain)));
    }
    let mut out = Vec::new();
    for (description, raw) in bases {
        for (tag, p) in [("q05", 0.05), ("q50", 0.5), ("q95", 0.95)] {
            let mut raw = raw.clone();
            raw[index] = quantile(&values, p);
            let prefix = if description.is_empty() {
                String::new()
            } else {
                format!("{description};")
            };
            out.push(Profile {
                label: format!("profile-{}", out.len() + 1),
                description: format!("{prefix}{name}={tag}"),
                raw,
            });
        }
    }
    Ok(out)
}

fn parse_frailty_grid(raw: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    let bad = || CliError::Config(format!("frailty grid `{raw}` must be lo,hi,n with lo < hi and n >= 2"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if !(lo < hi) || n < 2 {
        return Err(bad());
    }
    Ok(linspace(lo, hi, n))
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn write_curve(run: &Run, name: &str, curve: &PredictiveCurve, grid_name: &str) -> CliResult<()> {
    let path = run.path(name);
    let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
    curve.write_csv(BufWriter::new(file), grid_name).map_err(CliError::from)
}

pub fn run(args: &CurvesArgs) -> CliResult<RunManifest> {
    let manifest = read_manifest(&args.run)?;
    if manifest.command != "fit" || manifest.status != RunStatus::Complete {
        return Err(CliError::Config(format!(
            "{} is not a completed fit run",
            args.run.display()
        )));
    }
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(CliError::Config(format!("level must lie in (0, 1), got {}", args.level)));
    }
    if args.quadrature == 0 || args.time_points < 2 {
        return Err(CliError::Config("need at least 1 quadrature point and 2 time points".into()));
    }
    let chain = load_chains(&args.run, &manifest)?;
    let profiles = build_profiles(&chain, &args.profiles, args.quantiles.as_deref())?;
    let max_time = args.max_time.unwrap_or(chain.meta.cuts.last());
    if !(max_time > 0.0) {
        return Err(CliError::Config(format!("max time must be positive, got {max_time}")));
    }
    let config = CurvesConfig {
        run: args.run.clone(),
        profiles,
        shifted: args.shifted,
        time_grid: linspace(0.0, max_time, args.time_points),
        frailty_grid: parse_frailty_grid(&args.frailty_grid)?,
        level: args.level,
        quadrature: args.quadrature,
    };
    let out = args.out.clone().unwrap_or_else(|| args.run.join("curves"));
    let mut run = Run::begin(&out, "curves", &config, None, None, 1)?;
    run.add_input(&args.run.join(MANIFEST))?;
    run.manifest.data_digest = manifest.data_digest.clone();
    tracked(run, |run| {
        if config.profiles.is_empty() {
            println!("no profiles requested");
            return Ok(());
        }
        let quad = SurvivalQuadrature::new(config.quadrature);
        let q = chain.meta.q;
        let names = covariate_names(&chain);
        let path = run.path("profiles.csv");
        let mut w = csv::Writer::from_path(&path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut header = vec!["label".to_string(), "description".into()];
        header.extend(names.iter().cloned());
        let csv_err = |e: csv::Error| CliError::Config(format!("{}: {e}", path.display()));
        w.write_record(&header).map_err(csv_err)?;
        for p in &config.profiles {
            let mut row = vec![p.label.clone(), p.description.clone()];
            row.extend(p.raw.iter().map(f64::to_string));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;

        for p in &config.profiles {
            let w = fitted(&chain, &p.raw);
            let x = &w[w.len() - q..];
            let survival = predictive_survival(&chain, &w, &config.time_grid, config.level, &quad)?;
            write_curve(run, &format!("survival-{}.csv", p.label), &survival, "time")?;
            let density =
                predictive_frailty_density(&chain, x, &config.frailty_grid, false, config.level)?;
            write_curve(run, &format!("density-{}.csv", p.label), &density, "frailty")?;
            if config.shifted {
                let shifted =
                    predictive_frailty_density(&chain, x, &config.frailty_grid, true, config.level)?;
                write_curve(run, &format!("density-shifted-{}.csv", p.label), &shifted, "frailty")?;
            }
            println!("{} ({}) -> {}", p.label, p.description, run.dir.display());
        }
        Ok(())
    })
}
