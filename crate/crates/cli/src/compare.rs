//! `compare`: LPML/DIC grid and pseudo Bayes factors across fitted runs.

use crate::error::{CliError, CliResult};
use crate::fit::{FitComparison, COMPARISON};
use crate::manifest::{read_manifest, tracked, Run, RunManifest, RunStatus};
use clap::Args;
use frailtree::inference::pseudo_bayes_factor;
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Two or more completed `fit` output directories on the same data.
    #[arg(required = true, num_args = 2.., value_name = "RUN")]
    pub runs: Vec<PathBuf>,
    /// Also write `comparison.csv` and `pbf.csv` (with a manifest) to this directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
struct CompareConfig {
    runs: Vec<PathBuf>,
}

struct Entry {
    label: String,
    dir: PathBuf,
    comparison: FitComparison,
}

fn load(dir: &Path) -> CliResult<(RunManifest, FitComparison)> {
    let manifest = read_manifest(dir)?;
    if manifest.command != "fit" || manifest.status != RunStatus::Complete {
        return Err(CliError::Config(format!(
            "{} is not a completed fit run (command `{}`, status {:?})",
            dir.display(),
            manifest.command,
            manifest.status
        )));
    }
    let path = dir.join(COMPARISON);
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let comparison = serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok((manifest, comparison))
}

fn label_of(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

fn entries(runs: &[PathBuf]) -> CliResult<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    let mut reference: Option<(PathBuf, String)> = None;
    for dir in runs {
        let (manifest, comparison) = load(dir)?;
        let digest = manifest.data_digest.clone().unwrap_or_default();
        match &reference {
            None => reference = Some((dir.clone(), digest)),
            Some((first, d)) if *d != digest => {
                return Err(CliError::DigestMismatch(format!(
                    "{} and {} were fitted to different data ({} vs {})",
                    first.display(),
                    dir.display(),
                    &d[..d.len().min(12)],
                    &digest[..digest.len().min(12)]
                )))
            }
            Some(_) => {}
        }
        out.push(Entry {
            label: label_of(dir),
            dir: dir.clone(),
            comparison,
        });
    }
    Ok(out)
}

fn print_grid(entries: &[Entry]) {
    let width = entries.iter().map(|e| e.label.len()).max().unwrap_or(3).max(5);
    println!(
        "{:<width$}  {:<22}  {:>12}  {:>12}  {:>10}",
        "model", "frailty", "LPML", "DIC", "pD"
    );
    for e in entries {
        let r = &e.comparison.report;
        println!(
            "{:<width$}  {:<22}  {:>12.2}  {:>12.2}  {:>10.2}",
            e.label,
            e.comparison.frailty.name(),
            r.lpml,
            r.dic,
            r.p_d
        );
    }
    println!();
    println!("pseudo Bayes factors PBF(row, column) = exp(LPML_row - LPML_column)");
    print!("{:<width$}", "");
    for e in entries {
        print!("  {:>12}", e.label);
    }
    println!();
    for a in entries {
        print!("{:<width$}", a.label);
        for b in entries {
            let pbf = pseudo_bayes_factor(a.comparison.report.lpml, b.comparison.report.lpml);
            print!("  {:>12}", format_pbf(pbf));
        }
        println!();
    }
}

fn format_pbf(v: f64) -> String {
    if (1e-3..1e6).contains(&v) {
        format!("{v:.4}")
    } else {
        format!("{v:.3e}")
    }
}

fn write_tables(run: &Run, entries: &[Entry]) -> CliResult<()> {
    let csv_err = |p: &Path, e: csv::Error| CliError::Config(format!("{}: {e}", p.display()));
    let path = run.path("comparison.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["model", "frailty", "lpml", "dic", "p_d", "d_bar", "draws"])
        .map_err(|e| csv_err(&path, e))?;
    for e in entries {
        let r = &e.comparison.report;
        w.write_record([
            e.label.clone(),
            e.comparison.frailty.name().to_string(),
            r.lpml.to_string(),
            r.dic.to_string(),
            r.p_d.to_string(),
            r.d_bar.to_string(),
            e.comparison.draws.to_string(),
        ])
        .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;

    let path = run.path("pbf.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["model_a", "model_b", "log_pbf", "pbf"])
        .map_err(|e| csv_err(&path, e))?;
    for a in entries {
        for b in entries {
            let (la, lb) = (a.comparison.report.lpml, b.comparison.report.lpml);
            w.write_record([
                a.label.clone(),
                b.label.clone(),
                (la - lb).to_string(),
                pseudo_bayes_factor(la, lb).to_string(),
            ])
            .map_err(|e| csv_err(&path, e))?;
        }
    }
    w.flush().map_err(|e| CliError::io(&path, e))
}

pub fn run(args: &CompareArgs) -> CliResult<Option<RunManifest>> {
    let entries = entries(&args.runs)?;
    print_grid(&entries);
    let Some(out) = &args.out else {
        return Ok(None);
    };
    let config = CompareConfig {
        runs: args.runs.clone(),
    };
    let run = Run::begin(out, "compare", &config, None, None, 1)?;
    tracked(run, |run| {
        for e in &entries {
            run.add_input(&e.dir.join(COMPARISON))?;
        }
        run.manifest.data_digest = Some(entries[0].comparison.data_digest.clone());
        write_tables(run, &entries)
    })
    .map(Some)
}
