//! Settings shared by several commands and the TOML file layout.
//!
//! Every value resolves as: command-line flag, then config file, then default.

use crate::error::{CliError, CliResult};
use clap::Args;
use frailtree::data::{load_dataset, Dataset, Schema};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Reads a TOML file; unknown keys are errors naming the key.
pub fn read_toml<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn split_list(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

pub fn parse_delimiter(raw: &str) -> CliResult<u8> {
    match raw {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        s if s.len() == 1 => Ok(s.as_bytes()[0]),
        other => Err(CliError::Config(format!(
            "delimiter must be a single character or `tab`, got `{other}`"
        ))),
    }
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Input files and column roles.
#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    /// Subject-level file: one row per subject with time, event indicator and cluster key.
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    /// Cluster-level file: one row per cluster with its key and covariates.
    #[arg(long, value_name = "FILE")]
    pub clusters: Option<PathBuf>,
    /// Follow-up time column of the subject file [default: time].
    #[arg(long, value_name = "NAME")]
    pub time_col: Option<String>,
    /// Event indicator column (1 = event, 0 = censored) [default: event].
    #[arg(long, value_name = "NAME")]
    pub event_col: Option<String>,
    /// Cluster key column of the subject file [default: cluster].
    #[arg(long, value_name = "NAME")]
    pub cluster_col: Option<String>,
    /// Cluster key column of the cluster file [default: same as --cluster-col].
    #[arg(long, value_name = "NAME")]
    pub cluster_key: Option<String>,
    /// Comma-separated subject-level covariate columns.
    #[arg(long, value_name = "LIST")]
    pub subject_covariates: Option<String>,
    /// Comma-separated cluster-level covariate columns; they also index the frailty law.
    #[arg(long, value_name = "LIST")]
    pub cluster_covariates: Option<String>,
    /// Comma-separated covariates summarized as categories.
    #[arg(long, value_name = "LIST")]
    pub categorical: Option<String>,
    /// Field delimiter: one character, or `tab` [default: ,].
    #[arg(long, value_name = "CHAR")]
    pub delimiter: Option<String>,
    /// Center and scale covariates before fitting; raw-scale coefficients are also reported.
    #[arg(long)]
    pub standardize: bool,
}

/// `[data]` section of a config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub subjects: Option<PathBuf>,
    pub clusters: Option<PathBuf>,
    pub time: Option<String>,
    pub event: Option<String>,
    pub cluster: Option<String>,
    pub cluster_key: Option<String>,
    pub subject_covariates: Option<Vec<String>>,
    pub cluster_covariates: Option<Vec<String>>,
    pub categorical: Option<Vec<String>>,
    pub delimiter: Option<String>,
    pub standardize: Option<bool>,
}

/// Resolved data settings, embedded in manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub subjects: PathBuf,
    pub clusters: PathBuf,
    pub schema: Schema,
    pub standardize: bool,
}

impl DataConfig {
    pub fn resolve(args: &DataArgs, file: &DataSection) -> CliResult<Self> {
        let subjects = args
            .data
            .clone()
            .or_else(|| file.subjects.clone())
            .ok_or_else(|| CliError::Config("no subject file given (--data or data.subjects)".into()))?;
        let clusters = args
            .clusters
            .clone()
            .or_else(|| file.clusters.clone())
            .ok_or_else(|| CliError::Config("no cluster file given (--clusters or data.clusters)".into()))?;
        let defaults = Schema::default();
        let pick = |flag: &Option<String>, key: &Option<String>, default: String| {
            flag.clone().or_else(|| key.clone()).unwrap_or(default)
        };
        let list = |flag: &Option<String>, key: &Option<Vec<String>>| {
            flag.as_deref()
                .map(split_list)
                .or_else(|| key.clone())
                .unwrap_or_default()
        };
        let cluster = pick(&args.cluster_col, &file.cluster, defaults.cluster);
        let cluster_key = pick(&args.cluster_key, &file.cluster_key, cluster.clone());
        let delimiter = match args.delimiter.as_ref().or(file.delimiter.as_ref()) {
            Some(raw) => parse_delimiter(raw)?,
            None => defaults.delimiter,
        };
        Ok(DataConfig {
            subjects,
            clusters,
            schema: Schema {
                time: pick(&args.time_col, &file.time, defaults.time),
                event: pick(&args.event_col, &file.event, defaults.event),
                cluster,
                cluster_key,
                subject_covariates: list(&args.subject_covariates, &file.subject_covariates),
                cluster_covariates: list(&args.cluster_covariates, &file.cluster_covariates),
                categorical: list(&args.categorical, &file.categorical),
                delimiter,
            },
            standardize: args.standardize || file.standardize.unwrap_or(false),
        })
    }

    pub fn load(&self) -> CliResult<Dataset> {
        for path in [&self.subjects, &self.clusters] {
            if !path.is_file() {
                return Err(CliError::Data(format!("{}: no such file", path.display())));
            }
        }
        load_dataset(&self.subjects, &self.clusters, &self.schema, self.standardize).map_err(|e| {
            CliError::data(e)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file: DataSection = toml::from_str(
            "subjects = \"s.csv\"\nclusters = \"c.csv\"\ntime = \"t\"\ncluster_covariates = [\"a\", \"b\"]\n",
        )
        .unwrap();
        let args = DataArgs {
            time_col: Some("days".into()),
            cluster_col: Some("county".into()),
            ..DataArgs::default()
        };
        let cfg = DataConfig::resolve(&args, &file).unwrap();
        assert_eq!(cfg.schema.time, "days");
        assert_eq!(cfg.schema.cluster_key, "county");
        assert_eq!(cfg.schema.cluster_covariates, ["a", "b"]);
        assert_eq!(cfg.schema.event, "event");
        assert_eq!(cfg.subjects, PathBuf::from("s.csv"));
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = toml::from_str::<DataSection>("subjectz = \"s.csv\"").unwrap_err();
        assert!(err.to_string().contains("subjectz"));
    }

    #[test]
    fn delimiters() {
        assert_eq!(parse_delimiter("tab").unwrap(), b'\t');
        assert_eq!(parse_delimiter(";").unwrap(), b';');
        assert!(parse_delimiter("::").is_err());
    }
}
