//! Retained MCMC draws and their on-disk layout.
//!
//! A chain directory holds one delimited file per parameter block plus
//! `chain.json` with the metadata:
//!
//! ```text
//! gamma.csv      draw, log_lambda_1..K, covariate coefficients
//! frailties.csv  draw, one column per cluster id
//! hyper.csv      draw, theta, precision
//! forest.csv     draw, node, level, b0..b{d-1}    (long format)
//! loglik.csv     draw, one column per observation  (or loglik.bin)
//! ```
//!
//! `loglik.bin` is little-endian: two `u64` (rows, columns) followed by the
//! row-major `f64` matrix. Floats in text files use the shortest
//! representation that round-trips exactly.

use crate::data::Standardization;
use crate::error::{Error, Result};
use crate::hazard::CutPoints;
use crate::ldtfp::{node_location, FrailtyLawKind, PartitionTree, TailfreeForest};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Iteration counts and stream of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Controls {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Stream of the master seed driving this chain.
    #[serde(default)]
    pub stream: u64,
    /// Store `log f(D_ij | Ω)` for every retained draw.
    #[serde(default = "yes")]
    pub record_loglik: bool,
}

fn yes() -> bool {
    true
}

impl Controls {
    pub fn new(iterations: usize, burn_in: usize, thin: usize, seed: u64) -> Self {
        Controls {
            iterations,
            burn_in,
            thin,
            seed,
            stream: 0,
            record_loglik: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::invalid(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be at least 1"));
        }
        Ok(())
    }

    /// Number of draws kept: `(iterations - burn_in) / thin`.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    /// Whether sweep `t` (1-based) is kept.
    pub fn keeps(&self, t: usize) -> bool {
        t > self.burn_in && (t - self.burn_in) % self.thin == 0
    }
}

/// Acceptance rates after burn-in and proposal scales at the end of burn-in
/// and of the run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub gamma_acceptance: f64,
    pub frailty_acceptance_mean: f64,
    pub frailty_acceptance_min: f64,
    pub frailty_acceptance_max: f64,
    pub node_acceptance_mean: f64,
    pub theta_acceptance: f64,
    pub scales_at_burn_in: Vec<f64>,
    pub scales_at_end: Vec<f64>,
    pub seconds: f64,
}

impl Diagnostics {
    /// True when no proposal changed after adaptation stopped.
    pub fn adaptation_frozen(&self) -> bool {
        self.scales_at_burn_in == self.scales_at_end
    }
}

/// Everything needed to interpret a chain without the original spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub kind: FrailtyLawKind,
    pub depth: usize,
    pub q: usize,
    pub rho_power: f64,
    pub n_scale: f64,
    pub cuts: CutPoints,
    pub gamma_names: Vec<String>,
    pub cluster_ids: Vec<String>,
    pub cluster_covariates: Vec<Vec<f64>>,
    pub cluster_covariate_names: Vec<String>,
    pub observation_labels: Vec<String>,
    pub standardization: Option<Standardization>,
    pub controls: Controls,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

impl ChainMeta {
    pub fn n_intervals(&self) -> usize {
        self.cuts.len()
    }

    pub fn gamma_dim(&self) -> usize {
        self.gamma_names.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_ids.len()
    }

    pub fn n_obs(&self) -> usize {
        self.observation_labels.len()
    }

    pub fn coefficient_dim(&self) -> usize {
        self.kind.coefficient_dim(self.q)
    }

    pub fn n_coeffs(&self) -> usize {
        crate::ldtfp::n_nodes(self.depth) * self.coefficient_dim()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoglikFormat {
    Csv,
    Binary,
}

/// Retained draws, stored row-major per block.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorChain {
    pub meta: ChainMeta,
    pub gamma: Vec<f64>,
    pub frailties: Vec<f64>,
    pub theta: Vec<f64>,
    pub precision: Vec<f64>,
    pub coeffs: Vec<f64>,
    /// `draws × n_obs` matrix of `log f(D_ij | γ, e_i)`.
    pub loglik: Option<Vec<f64>>,
}

impl PosteriorChain {
    pub fn empty(meta: ChainMeta) -> Self {
        let loglik = meta.controls.record_loglik.then(Vec::new);
        PosteriorChain {
            meta,
            gamma: Vec::new(),
            frailties: Vec::new(),
            theta: Vec::new(),
            precision: Vec::new(),
            coeffs: Vec::new(),
            loglik,
        }
    }

    pub fn n_draws(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn push(
        &mut self,
        gamma: &[f64],
        frailties: &[f64],
        forest: &TailfreeForest,
        loglik: Option<&[f64]>,
    ) {
        self.gamma.extend_from_slice(gamma);
        self.frailties.extend_from_slice(frailties);
        self.theta.push(forest.theta());
        self.precision.push(forest.precision);
        self.coeffs.extend_from_slice(&forest.coeffs);
        if let (Some(store), Some(ll)) = (self.loglik.as_mut(), loglik) {
            store.extend_from_slice(ll);
        }
    }

    pub fn gamma_draw(&self, m: usize) -> &[f64] {
        let d = self.meta.gamma_dim();
        &self.gamma[m * d..(m + 1) * d]
    }

    pub fn frailty_draw(&self, m: usize) -> &[f64] {
        let n = self.meta.n_clusters();
        &self.frailties[m * n..(m + 1) * n]
    }

    pub fn coefficient_draw(&self, m: usize) -> &[f64] {
        let d = self.meta.n_coeffs();
        &self.coeffs[m * d..(m + 1) * d]
    }

    pub fn loglik_draw(&self, m: usize) -> Option<&[f64]> {
        let n = self.meta.n_obs();
        self.loglik.as_ref().map(|ll| &ll[m * n..(m + 1) * n])
    }

    /// The frailty law of draw `m`.
    pub fn forest_draw(&self, m: usize) -> Result<TailfreeForest> {
        let tree = PartitionTree::new(self.meta.depth, self.theta[m])?;
        let mut forest = TailfreeForest::centered(
            self.meta.kind,
            tree,
            self.meta.q,
            self.precision[m],
            self.meta.rho_power,
            self.meta.n_scale,
        );
        forest.coeffs.copy_from_slice(self.coefficient_draw(m));
        Ok(forest)
    }

    /// Values of one named γ component across draws.
    pub fn gamma_column(&self, index: usize) -> Vec<f64> {
        (0..self.n_draws()).map(|m| self.gamma_draw(m)[index]).collect()
    }

    /// Cluster-covariate part `ξ_x` of the regression coefficients of draw `m`.
    pub fn xi_x(&self, m: usize) -> &[f64] {
        let g = self.gamma_draw(m);
        &g[g.len() - self.meta.q..]
    }

    /// Keeps every `step`-th draw starting from the first.
    pub fn thinned(&self, step: usize) -> PosteriorChain {
        let step = step.max(1);
        let mut out = PosteriorChain::empty(self.meta.clone());
        if self.loglik.is_none() {
            out.loglik = None;
        }
        for m in (0..self.n_draws()).step_by(step) {
            out.gamma.extend_from_slice(self.gamma_draw(m));
            out.frailties.extend_from_slice(self.frailty_draw(m));
            out.theta.push(self.theta[m]);
            out.precision.push(self.precision[m]);
            out.coeffs.extend_from_slice(self.coefficient_draw(m));
            if let (Some(store), Some(ll)) = (out.loglik.as_mut(), self.loglik_draw(m)) {
                store.extend_from_slice(ll);
            }
        }
        out
    }

    /// Appends the draws of another chain fitted to the same model, e.g. a
    /// parallel chain on a different stream.
    pub fn append(&mut self, other: &PosteriorChain) -> Result<()> {
        let (a, b) = (&self.meta, &other.meta);
        if a.kind != b.kind
            || a.depth != b.depth
            || a.cuts != b.cuts
            || a.gamma_names != b.gamma_names
            || a.cluster_ids != b.cluster_ids
            || a.observation_labels != b.observation_labels
        {
            return Err(Error::invalid("chains describe different models"));
        }
        self.gamma.extend_from_slice(&other.gamma);
        self.frailties.extend_from_slice(&other.frailties);
        self.theta.extend_from_slice(&other.theta);
        self.precision.extend_from_slice(&other.precision);
        self.coeffs.extend_from_slice(&other.coeffs);
        match (self.loglik.as_mut(), &other.loglik) {
            (Some(store), Some(ll)) => store.extend_from_slice(ll),
            _ => self.loglik = None,
        }
        Ok(())
    }

    pub fn write(&self, dir: &Path, format: LoglikFormat) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let m = self.n_draws();

        let mut header = vec!["draw".to_string()];
        header.extend(self.meta.gamma_names.iter().cloned());
        write_block(&dir.join("gamma.csv"), &header, m, |i| self.gamma_draw(i).to_vec())?;

        let mut header = vec!["draw".to_string()];
        header.extend(self.meta.cluster_ids.iter().cloned());
        write_block(&dir.join("frailties.csv"), &header, m, |i| {
            self.frailty_draw(i).to_vec()
        })?;

        let header = ["draw", "theta", "precision"].map(String::from).to_vec();
        write_block(&dir.join("hyper.csv"), &header, m, |i| {
            vec![self.theta[i], self.precision[i]]
        })?;

        self.write_forest(&dir.join("forest.csv"))?;

        let _ = std::fs::remove_file(dir.join("loglik.csv"));
        let _ = std::fs::remove_file(dir.join("loglik.bin"));
        if let Some(ll) = &self.loglik {
            let n = self.meta.n_obs();
            match format {
                LoglikFormat::Csv => {
                    let mut header = vec!["draw".to_string()];
                    header.extend(self.meta.observation_labels.iter().cloned());
                    write_block(&dir.join("loglik.csv"), &header, m, |i| {
                        ll[i * n..(i + 1) * n].to_vec()
                    })?;
                }
                LoglikFormat::Binary => {
                    let mut w = BufWriter::new(File::create(dir.join("loglik.bin"))?);
                    w.write_all(&(m as u64).to_le_bytes())?;
                    w.write_all(&(n as u64).to_le_bytes())?;
                    for v in ll {
                        w.write_all(&v.to_le_bytes())?;
                    }
                    w.flush()?;
                }
            }
        }

        let meta = serde_json::to_string_pretty(&self.meta)?;
        std::fs::write(dir.join("chain.json"), meta + "\n")?;
        Ok(())
    }

    fn write_forest(&self, path: &Path) -> Result<()> {
        let d = self.meta.coefficient_dim();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["draw".to_string(), "node".into(), "level".into()];
        header.extend((0..d).map(|k| format!("b{k}")));
        w.write_record(&header)?;
        if d > 0 {
            let n_nodes = crate::ldtfp::n_nodes(self.meta.depth);
            for m in 0..self.n_draws() {
                let coeffs = self.coefficient_draw(m);
                for node in 0..n_nodes {
                    let mut row = vec![
                        m.to_string(),
                        TailfreeForest::node_path(node),
                        node_location(node).0.to_string(),
                    ];
                    row.extend(coeffs[node * d..(node + 1) * d].iter().map(f64::to_string));
                    w.write_record(&row)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("chain.json");
        let meta: ChainMeta = serde_json::from_reader(BufReader::new(File::open(&meta_path)?))?;
        let gamma = read_block(&dir.join("gamma.csv"), meta.gamma_dim())?;
        let frailties = read_block(&dir.join("frailties.csv"), meta.n_clusters())?;
        let hyper = read_block(&dir.join("hyper.csv"), 2)?;
        let theta = hyper.iter().step_by(2).copied().collect::<Vec<_>>();
        let precision = hyper.iter().skip(1).step_by(2).copied().collect::<Vec<_>>();
        let m = theta.len();
        let coeffs = read_forest(&dir.join("forest.csv"), &meta, m)?;

        let csv_path = dir.join("loglik.csv");
        let bin_path = dir.join("loglik.bin");
        let loglik = if csv_path.exists() {
            Some(read_block(&csv_path, meta.n_obs())?)
        } else if bin_path.exists() {
            Some(read_binary(&bin_path, m, meta.n_obs())?)
        } else {
            None
        };

        let chain = PosteriorChain {
            meta,
            gamma,
            frailties,
            theta,
            precision,
            coeffs,
            loglik,
        };
        let checks = [
            ("gamma.csv", chain.gamma.len(), chain.meta.gamma_dim()),
            ("frailties.csv", chain.frailties.len(), chain.meta.n_clusters()),
            ("loglik.csv", chain.loglik.as_ref().map_or(0, Vec::len), chain.meta.n_obs()),
        ];
        for (file, len, width) in checks {
            if file == "loglik.csv" && !csv_path.exists() {
                continue;
            }
            if len != m * width {
                return Err(format_error(
                    &dir.join(file),
                    format!("expected {m} draws, found {}", len / width.max(1)),
                ));
            }
        }
        Ok(chain)
    }
}

fn format_error(path: &Path, message: impl Into<String>) -> Error {
    Error::ChainFormat {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn write_block(
    path: &Path,
    header: &[String],
    rows: usize,
    row: impl Fn(usize) -> Vec<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for m in 0..rows {
        let mut record = vec![m.to_string()];
        record.extend(row(m).iter().map(f64::to_string));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn read_block(path: &Path, width: usize) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let columns = r.headers()?.len();
    if columns != width + 1 {
        return Err(format_error(
            path,
            format!("expected {} columns, found {columns}", width + 1),
        ));
    }
    let mut out = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| format_error(path, format!("row {i}: {e}")))?;
        if record.len() != width + 1 {
            return Err(format_error(path, format!("row {i} has {} fields", record.len())));
        }
        for field in record.iter().skip(1) {
            out.push(parse(path, i, field)?);
        }
    }
    Ok(out)
}

fn read_forest(path: &Path, meta: &ChainMeta, draws: usize) -> Result<Vec<f64>> {
    let d = meta.coefficient_dim();
    let mut out = Vec::with_capacity(draws * meta.n_coeffs());
    let mut r = csv::Reader::from_path(path)?;
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(|e| format_error(path, format!("row {i}: {e}")))?;
        if record.len() != d + 3 {
            return Err(format_error(path, format!("row {i} has {} fields", record.len())));
        }
        for field in record.iter().skip(3) {
            out.push(parse(path, i, field)?);
        }
    }
    if out.len() != draws * meta.n_coeffs() {
        return Err(format_error(path, "coefficient count does not match the draws"));
    }
    Ok(out)
}

fn read_binary(path: &Path, draws: usize, n_obs: usize) -> Result<Vec<f64>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 {
        return Err(format_error(path, "truncated header"));
    }
    let rows = u64::from_le_bytes(bytes[0..8].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    if rows != draws || cols != n_obs || bytes.len() != 16 + 8 * rows * cols {
        return Err(format_error(path, "matrix shape does not match the chain"));
    }
    Ok(bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

fn parse(path: &Path, row: usize, field: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| format_error(path, format!("row {row}: `{field}` is not a number")))
}
