//! Clustered right-censored survival data: ingestion, validation, and
//! descriptive statistics.

use crate::error::{Error, Result};
use crate::numeric::{median, std_normal_quantile};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::path::Path;

/// One subject's follow-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    /// Follow-up time, strictly positive.
    pub time: f64,
    /// `true` when the event was observed, `false` when right-censored.
    pub event: bool,
    pub subject_covariates: Vec<f64>,
    /// Index into [`Dataset::clusters`].
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub id: String,
    pub covariates: Vec<f64>,
}

/// Affine map applied to covariate columns: `standardized = (raw - center) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    /// One entry per column of the full design (subject columns, then cluster columns).
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardization {
    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(v, (c, s))| (v - c) / s)
            .collect()
    }

    /// Maps coefficients fitted on the standardized scale back to raw units.
    ///
    /// `gamma` is the stacked vector of log hazard heights followed by the
    /// regression coefficients.
    pub fn raw_gamma(&self, gamma: &[f64], n_intervals: usize) -> Vec<f64> {
        let (log_heights, xi) = gamma.split_at(n_intervals);
        let raw_xi: Vec<f64> = xi.iter().zip(&self.scale).map(|(b, s)| b / s).collect();
        let shift: f64 = raw_xi.iter().zip(&self.center).map(|(b, c)| b * c).sum();
        log_heights
            .iter()
            .map(|l| l - shift)
            .chain(raw_xi)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<SurvivalRecord>,
    pub clusters: Vec<ClusterInfo>,
    pub subject_covariate_names: Vec<String>,
    pub cluster_covariate_names: Vec<String>,
    /// Covariates summarized by level counts instead of order statistics.
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default)]
    pub standardization: Option<Standardization>,
}

impl Dataset {
    /// Builds and validates a dataset from in-memory parts.
    pub fn new(
        records: Vec<SurvivalRecord>,
        clusters: Vec<ClusterInfo>,
        subject_covariate_names: Vec<String>,
        cluster_covariate_names: Vec<String>,
    ) -> Result<Self> {
        let dataset = Dataset {
            records,
            clusters,
            subject_covariate_names,
            cluster_covariate_names,
            categorical: Vec::new(),
            standardization: None,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn validate(&self) -> Result<()> {
        let p_sub = self.subject_covariate_names.len();
        let q = self.cluster_covariate_names.len();
        for (row, cluster) in self.clusters.iter().enumerate() {
            if cluster.covariates.len() != q {
                return Err(Error::InvalidRow {
                    row,
                    message: format!(
                        "cluster `{}` has {} covariates, expected {q}",
                        cluster.id,
                        cluster.covariates.len()
                    ),
                });
            }
            if cluster.covariates.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidRow {
                    row,
                    message: format!("cluster `{}` has a non-finite covariate", cluster.id),
                });
            }
        }
        for (row, record) in self.records.iter().enumerate() {
            if !(record.time > 0.0) || !record.time.is_finite() {
                return Err(Error::InvalidRow {
                    row,
                    message: format!("follow-up time must be positive, got {}", record.time),
                });
            }
            if record.subject_covariates.len() != p_sub {
                return Err(Error::InvalidRow {
                    row,
                    message: format!(
                        "{} subject covariates, expected {p_sub}",
                        record.subject_covariates.len()
                    ),
                });
            }
            if record.subject_covariates.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidRow {
                    row,
                    message: "non-finite subject covariate".into(),
                });
            }
            if record.cluster >= self.clusters.len() {
                return Err(Error::UnknownCluster {
                    row,
                    cluster: record.cluster.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn n_records(&self) -> usize {
        self.records.len()
    }

    /// Dimension q of the cluster-level covariates.
    pub fn q(&self) -> usize {
        self.cluster_covariate_names.len()
    }

    /// Dimension p of the full design `w = (w̃', x')'`.
    pub fn p(&self) -> usize {
        self.subject_covariate_names.len() + self.q()
    }

    pub fn covariate_names(&self) -> Vec<String> {
        self.subject_covariate_names
            .iter()
            .chain(&self.cluster_covariate_names)
            .cloned()
            .collect()
    }

    /// Full covariate vector of a record: subject covariates then its cluster's.
    pub fn full_covariates(&self, record: &SurvivalRecord) -> Vec<f64> {
        record
            .subject_covariates
            .iter()
            .chain(&self.clusters[record.cluster].covariates)
            .copied()
            .collect()
    }

    pub fn max_time(&self) -> f64 {
        self.records.iter().map(|r| r.time).fold(0.0, f64::max)
    }

    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.time).collect()
    }

    pub fn n_events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    /// Standardizes every covariate column in place, recording the transform.
    /// Constant columns keep unit scale.
    pub fn standardize(&mut self) {
        if self.standardization.is_some() {
            return;
        }
        let p_sub = self.subject_covariate_names.len();
        let mut center = Vec::with_capacity(self.p());
        let mut scale = Vec::with_capacity(self.p());
        for k in 0..p_sub {
            let col: Vec<f64> = self
                .records
                .iter()
                .map(|r| r.subject_covariates[k])
                .collect();
            let (c, s) = center_scale(&col);
            center.push(c);
            scale.push(s);
        }
        for k in 0..self.q() {
            let col: Vec<f64> = self.clusters.iter().map(|c| c.covariates[k]).collect();
            let (c, s) = center_scale(&col);
            center.push(c);
            scale.push(s);
        }
        for r in &mut self.records {
            for k in 0..p_sub {
                r.subject_covariates[k] = (r.subject_covariates[k] - center[k]) / scale[k];
            }
        }
        for c in &mut self.clusters {
            for k in 0..c.covariates.len() {
                c.covariates[k] = (c.covariates[k] - center[p_sub + k]) / scale[p_sub + k];
            }
        }
        self.standardization = Some(Standardization { center, scale });
    }

    /// Indices of the records of each cluster, in record order.
    pub fn records_by_cluster(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.clusters.len()];
        for (j, r) in self.records.iter().enumerate() {
            out[r.cluster].push(j);
        }
        out
    }
}

fn center_scale(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 1.0);
    }
    let m = crate::numeric::mean(values);
    let s = crate::numeric::variance(values).sqrt();
    (m, if s > 0.0 { s } else { 1.0 })
}

/// Maps column names of the input files to their roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub time: String,
    pub event: String,
    /// Cluster key column in the subject file.
    pub cluster: String,
    /// Cluster key column in the cluster file.
    pub cluster_key: String,
    pub subject_covariates: Vec<String>,
    pub cluster_covariates: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: u8,
}

fn default_delimiter() -> u8 {
    b','
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            time: "time".into(),
            event: "event".into(),
            cluster: "cluster".into(),
            cluster_key: "cluster".into(),
            subject_covariates: Vec::new(),
            cluster_covariates: Vec::new(),
            categorical: Vec::new(),
            delimiter: b',',
        }
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path, delimiter: u8) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let header = reader.headers()?.iter().map(str::to_string).collect();
        let rows = reader.records().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Table { header, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }
}

fn parse_number(row: usize, column: &str, raw: &str) -> Result<f64> {
    if raw.is_empty() {
        return Err(Error::InvalidRow {
            row,
            message: format!("missing value in column `{column}`"),
        });
    }
    raw.parse::<f64>().map_err(|_| Error::InvalidRow {
        row,
        message: format!("column `{column}`: cannot parse `{raw}` as a number"),
    })
}

/// Reads a subject file and a cluster file and joins them on the cluster key.
///
/// Rows are numbered from 0, excluding the header.
pub fn load_dataset(
    subject_file: &Path,
    cluster_file: &Path,
    schema: &Schema,
    standardize: bool,
) -> Result<Dataset> {
    let clusters_table = Table::read(cluster_file, schema.delimiter)?;
    let key_col = clusters_table.column(&schema.cluster_key)?;
    let cov_cols = schema
        .cluster_covariates
        .iter()
        .map(|c| clusters_table.column(c))
        .collect::<Result<Vec<_>>>()?;
    let mut clusters = Vec::with_capacity(clusters_table.rows.len());
    let mut index = HashMap::new();
    for (row, rec) in clusters_table.rows.iter().enumerate() {
        let id = rec.get(key_col).unwrap_or("").to_string();
        if index.insert(id.clone(), row).is_some() {
            return Err(Error::InvalidRow {
                row,
                message: format!("duplicate cluster key `{id}`"),
            });
        }
        let covariates = cov_cols
            .iter()
            .zip(&schema.cluster_covariates)
            .map(|(&c, name)| parse_number(row, name, rec.get(c).unwrap_or("")))
            .collect::<Result<Vec<_>>>()?;
        clusters.push(ClusterInfo { id, covariates });
    }

    let subjects = Table::read(subject_file, schema.delimiter)?;
    let time_col = subjects.column(&schema.time)?;
    let event_col = subjects.column(&schema.event)?;
    let cluster_col = subjects.column(&schema.cluster)?;
    let sub_cols = schema
        .subject_covariates
        .iter()
        .map(|c| subjects.column(c))
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::with_capacity(subjects.rows.len());
    for (row, rec) in subjects.rows.iter().enumerate() {
        let time = parse_number(row, &schema.time, rec.get(time_col).unwrap_or(""))?;
        if !(time > 0.0) {
            return Err(Error::InvalidRow {
                row,
                message: format!("follow-up time must be positive, got {time}"),
            });
        }
        let event = match rec.get(event_col).unwrap_or("") {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::InvalidRow {
                    row,
                    message: format!("event indicator must be 0 or 1, got `{other}`"),
                })
            }
        };
        let key = rec.get(cluster_col).unwrap_or("");
        let cluster = *index.get(key).ok_or_else(|| Error::UnknownCluster {
            row,
            cluster: key.to_string(),
        })?;
        let subject_covariates = sub_cols
            .iter()
            .zip(&schema.subject_covariates)
            .map(|(&c, name)| parse_number(row, name, rec.get(c).unwrap_or("")))
            .collect::<Result<Vec<_>>>()?;
        records.push(SurvivalRecord {
            time,
            event,
            subject_covariates,
            cluster,
        });
    }

    // clusters without subjects carry no information and would only
    // contribute prior-only frailties
    let mut used = vec![false; clusters.len()];
    for r in &records {
        used[r.cluster] = true;
    }
    if used.iter().any(|u| !u) {
        let mut remap = vec![usize::MAX; clusters.len()];
        let mut kept = Vec::new();
        for (i, c) in clusters.into_iter().enumerate() {
            if used[i] {
                remap[i] = kept.len();
                kept.push(c);
            } else {
                log::warn!("cluster `{}` has no subjects and is dropped", c.id);
            }
        }
        for r in &mut records {
            r.cluster = remap[r.cluster];
        }
        clusters = kept;
    }

    let mut dataset = Dataset::new(
        records,
        clusters,
        schema.subject_covariates.clone(),
        schema.cluster_covariates.clone(),
    )?;
    dataset.categorical = schema.categorical.clone();
    if standardize {
        dataset.standardize();
    }
    Ok(dataset)
}

/// Goodman–Kruskal gamma with its asymptotic 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaStatistic {
    pub gamma: f64,
    pub ci95: (f64, f64),
    pub concordant: f64,
    pub discordant: f64,
}

/// Goodman–Kruskal gamma for two ordinal variables observed on the same units.
/// Pairs tied on either variable count as neither concordant nor discordant.
pub fn goodman_kruskal_gamma<T: PartialOrd + Copy>(
    row_var: &[T],
    col_var: &[T],
) -> Result<GammaStatistic> {
    if row_var.len() != col_var.len() {
        return Err(Error::DimensionMismatch {
            what: "goodman_kruskal_gamma column variable",
            expected: row_var.len(),
            got: col_var.len(),
        });
    }
    if row_var.len() < 2 {
        return Err(Error::invalid("gamma needs at least two observations"));
    }
    let row_levels = sorted_levels(row_var);
    let col_levels = sorted_levels(col_var);
    if row_levels.len() < 2 || col_levels.len() < 2 {
        return Err(Error::invalid(
            "each variable needs at least two distinct levels",
        ));
    }
    let level_of = |levels: &[T], v: T| {
        levels
            .iter()
            .position(|l| !(*l < v) && !(v < *l))
            .expect("level present")
    };
    let mut table = vec![vec![0u64; col_levels.len()]; row_levels.len()];
    for (r, c) in row_var.iter().zip(col_var) {
        table[level_of(&row_levels, *r)][level_of(&col_levels, *c)] += 1;
    }
    goodman_kruskal_gamma_table(&table)
}

fn sorted_levels<T: PartialOrd + Copy>(values: &[T]) -> Vec<T> {
    let mut levels: Vec<T> = Vec::new();
    for &v in values {
        if !levels.iter().any(|l| !(*l < v) && !(v < *l)) {
            levels.push(v);
        }
    }
    levels.sort_by(|a, b| a.partial_cmp(b).expect("ordinal levels must be comparable"));
    levels
}

/// Goodman–Kruskal gamma from an ordered contingency table of counts.
pub fn goodman_kruskal_gamma_table(table: &[Vec<u64>]) -> Result<GammaStatistic> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows < 2 || cols < 2 || table.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid(
            "contingency table must be rectangular with at least 2x2 cells",
        ));
    }
    let n = |i: usize, j: usize| table[i][j] as f64;
    // per-cell counts of agreeing (A) and disagreeing (D) partners
    let mut agree = vec![vec![0.0; cols]; rows];
    let mut disagree = vec![vec![0.0; cols]; rows];
    for i in 0..rows {
        for j in 0..cols {
            let mut a = 0.0;
            let mut d = 0.0;
            for k in 0..rows {
                for l in 0..cols {
                    if (k > i && l > j) || (k < i && l < j) {
                        a += n(k, l);
                    } else if (k > i && l < j) || (k < i && l > j) {
                        d += n(k, l);
                    }
                }
            }
            agree[i][j] = a;
            disagree[i][j] = d;
        }
    }
    let mut p = 0.0;
    let mut q = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            p += n(i, j) * agree[i][j];
            q += n(i, j) * disagree[i][j];
        }
    }
    // p and q count each unordered pair twice
    let concordant = p / 2.0;
    let discordant = q / 2.0;
    if p + q == 0.0 {
        return Ok(GammaStatistic {
            gamma: 0.0,
            ci95: (0.0, 0.0),
            concordant,
            discordant,
        });
    }
    let gamma = (p - q) / (p + q);
    let mut s = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            s += n(i, j) * (q * agree[i][j] - p * disagree[i][j]).powi(2);
        }
    }
    let ase = 4.0 / (p + q).powi(2) * s.sqrt();
    let z = std_normal_quantile(0.975);
    Ok(GammaStatistic {
        gamma,
        ci95: ((gamma - z * ase).max(-1.0), (gamma + z * ase).min(1.0)),
        concordant,
        discordant,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuousSummary {
    pub name: String,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelCount {
    pub level: String,
    pub count: usize,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoricalSummary {
    pub name: String,
    pub levels: Vec<LevelCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub n_subjects: usize,
    pub n_clusters: usize,
    pub events: usize,
    pub censored: usize,
    pub event_proportion: f64,
    pub continuous: Vec<ContinuousSummary>,
    pub categorical: Vec<CategoricalSummary>,
}

/// Order statistics of continuous variables and level counts of categorical
/// ones. Subject covariates are summarized over subjects, cluster covariates
/// over clusters, always on the raw scale.
pub fn summarize(dataset: &Dataset) -> Result<DatasetSummary> {
    if dataset.records.is_empty() {
        return Err(Error::invalid("cannot summarize an empty dataset"));
    }
    let n = dataset.records.len();
    let events = dataset.n_events();
    let p_sub = dataset.subject_covariate_names.len();
    let unstandardize = |k: usize, v: f64| match &dataset.standardization {
        Some(s) => v * s.scale[k] + s.center[k],
        None => v,
    };

    let mut continuous = vec![continuous_summary("time", &dataset.times())];
    let mut categorical = vec![CategoricalSummary {
        name: "status".into(),
        levels: vec![
            LevelCount {
                level: "event".into(),
                count: events,
                proportion: events as f64 / n as f64,
            },
            LevelCount {
                level: "censored".into(),
                count: n - events,
                proportion: (n - events) as f64 / n as f64,
            },
        ],
    }];

    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for (k, name) in dataset.subject_covariate_names.iter().enumerate() {
        let col = dataset
            .records
            .iter()
            .map(|r| unstandardize(k, r.subject_covariates[k]))
            .collect();
        columns.push((name.clone(), col));
    }
    for (k, name) in dataset.cluster_covariate_names.iter().enumerate() {
        let col = dataset
            .clusters
            .iter()
            .map(|c| unstandardize(p_sub + k, c.covariates[k]))
            .collect();
        columns.push((name.clone(), col));
    }
    for (name, col) in columns {
        if dataset.categorical.contains(&name) {
            categorical.push(categorical_summary(&name, &col));
        } else {
            continuous.push(continuous_summary(&name, &col));
        }
    }

    Ok(DatasetSummary {
        n_subjects: n,
        n_clusters: dataset.n_clusters(),
        events,
        censored: n - events,
        event_proportion: events as f64 / n as f64,
        continuous,
        categorical,
    })
}

fn continuous_summary(name: &str, values: &[f64]) -> ContinuousSummary {
    ContinuousSummary {
        name: name.to_string(),
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        median: median(values),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

fn categorical_summary(name: &str, values: &[f64]) -> CategoricalSummary {
    let mut counts: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for &v in values {
        // order levels numerically; the key is a monotone bit pattern of the value
        let key = ordered_key(v);
        counts.entry(key).or_insert((v, 0)).1 += 1;
    }
    let n = values.len() as f64;
    CategoricalSummary {
        name: name.to_string(),
        levels: counts
            .into_values()
            .map(|(v, count)| LevelCount {
                level: format!("{v}"),
                count,
                proportion: count as f64 / n,
            })
            .collect(),
    }
}

fn ordered_key(v: f64) -> u64 {
    let bits = v.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.join(name);
        std::fs::File::create(&path)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        path
    }

    fn schema() -> Schema {
        Schema {
            subject_covariates: vec!["age".into()],
            cluster_covariates: vec!["rucc".into()],
            ..Schema::default()
        }
    }

    #[test]
    fn loads_and_joins_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        let subj = write(
            dir.path(),
            "s.csv",
            "time,event,cluster,age\n1,1,a,60\n19,0,a,70\n47,1,a,80\n",
        );
        let clus = write(dir.path(), "c.csv", "cluster,rucc\na,3\n");
        let d = load_dataset(&subj, &clus, &schema(), false).unwrap();
        assert_eq!(d.n_clusters(), 1);
        assert_eq!(d.records_by_cluster()[0].len(), 3);
        assert_eq!(d.p(), 2);
        assert_eq!(d.full_covariates(&d.records[2]), vec![80.0, 3.0]);
    }

    #[test]
    fn rejects_zero_time_with_row_index() {
        let dir = tempfile::tempdir().unwrap();
        let subj = write(
            dir.path(),
            "s.csv",
            "time,event,cluster,age\n1,1,a,60\n0,0,a,70\n",
        );
        let clus = write(dir.path(), "c.csv", "cluster,rucc\na,3\n");
        match load_dataset(&subj, &clus, &schema(), false) {
            Err(Error::InvalidRow { row, .. }) => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_cluster_and_missing_column() {
        let dir = tempfile::tempdir().unwrap();
        let subj = write(dir.path(), "s.csv", "time,event,cluster,age\n1,1,999,60\n");
        let clus = write(dir.path(), "c.csv", "cluster,rucc\na,3\n");
        assert!(matches!(
            load_dataset(&subj, &clus, &schema(), false),
            Err(Error::UnknownCluster { cluster, .. }) if cluster == "999"
        ));
        let clus = write(dir.path(), "c2.csv", "cluster,income\na,3\n");
        assert!(matches!(
            load_dataset(&subj, &clus, &schema(), false),
            Err(Error::MissingColumn(c)) if c == "rucc"
        ));
    }

    #[test]
    fn tab_delimited_input_and_standardization_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let subj = write(
            dir.path(),
            "s.tsv",
            "time\tevent\tcluster\tage\n1\t1\ta\t60\n2\t0\tb\t70\n3\t1\tb\t80\n",
        );
        let clus = write(dir.path(), "c.tsv", "cluster\trucc\na\t2\nb\t6\n");
        let schema = Schema {
            delimiter: b'\t',
            ..schema()
        };
        let d = load_dataset(&subj, &clus, &schema, true).unwrap();
        let s = d.standardization.as_ref().unwrap();
        assert_eq!(s.center, vec![70.0, 4.0]);
        assert!((d.records[0].subject_covariates[0] + 1.0).abs() < 1e-12);
        // ξ_std = (1, 2) on standardized covariates equals ξ_raw = (0.1, 2/√8)
        let raw = s.raw_gamma(&[0.0, 1.0, 2.0], 1);
        let std_pred = 1.0 * (-1.0) + 2.0 * d.clusters[0].covariates[0];
        let raw_pred = raw[0] + raw[1] * 60.0 + raw[2] * 2.0;
        assert!((std_pred - raw_pred).abs() < 1e-12);
    }

    #[test]
    fn gamma_on_simple_tables() {
        let g = goodman_kruskal_gamma_table(&[vec![10, 0], vec![0, 10]]).unwrap();
        assert_eq!(g.gamma, 1.0);
        let g = goodman_kruskal_gamma_table(&[vec![5, 5], vec![5, 5]]).unwrap();
        assert_eq!(g.gamma, 0.0);
        assert!(g.ci95.0 < 0.0 && g.ci95.1 > 0.0);
    }

    #[test]
    fn gamma_errors() {
        assert!(goodman_kruskal_gamma(&[1, 2, 3], &[1, 2]).is_err());
        assert!(goodman_kruskal_gamma(&[1, 1, 1], &[1, 2, 3]).is_err());
    }

    #[test]
    fn summary_order_statistics_and_proportions() {
        let clusters = vec![ClusterInfo {
            id: "a".into(),
            covariates: vec![],
        }];
        let records = [(1.0, true), (19.0, true), (47.0, false)]
            .iter()
            .map(|&(time, event)| SurvivalRecord {
                time,
                event,
                subject_covariates: vec![],
                cluster: 0,
            })
            .collect();
        let d = Dataset::new(records, clusters, vec![], vec![]).unwrap();
        let s = summarize(&d).unwrap();
        assert_eq!(s.continuous[0].min, 1.0);
        assert_eq!(s.continuous[0].median, 19.0);
        assert_eq!(s.continuous[0].max, 47.0);
        assert!((s.event_proportion - 2.0 / 3.0).abs() < 1e-15);
    }
}
