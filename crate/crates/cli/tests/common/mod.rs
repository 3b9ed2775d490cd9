#![allow(dead_code)]

use frailtree::rng::stream;
use frailtree::simulate::{generate, Scenario, ScenarioSpec};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_frailtree"));
    cmd.env_remove("RUST_LOG").arg("--log").arg("warn");
    cmd
}

pub fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes `subjects.csv` and `clusters.csv` from a small Scenario I draw.
pub fn write_data(dir: &Path, clusters: usize, size: usize, seed: u64) -> (PathBuf, PathBuf) {
    let mut spec = ScenarioSpec::new(Scenario::I);
    spec.n_clusters = clusters;
    spec.cluster_size = size;
    let ds = generate(&spec, &mut stream(seed, 0)).unwrap().dataset;
    let mut subjects = String::from("id,time,event,county,w1,w2\n");
    for (i, r) in ds.records.iter().enumerate() {
        subjects.push_str(&format!(
            "{i},{},{},{},{},{}\n",
            r.time,
            u8::from(r.event),
            ds.clusters[r.cluster].id,
            r.subject_covariates[0],
            r.subject_covariates[1]
        ));
    }
    let mut cluster_rows = String::from("county,x\n");
    for c in &ds.clusters {
        cluster_rows.push_str(&format!("{},{}\n", c.id, c.covariates[0]));
    }
    let (s, c) = (dir.join("subjects.csv"), dir.join("clusters.csv"));
    std::fs::write(&s, subjects).unwrap();
    std::fs::write(&c, cluster_rows).unwrap();
    (s, c)
}

pub const DATA_FLAGS: &[&str] = &[
    "--data",
    "subjects.csv",
    "--clusters",
    "clusters.csv",
    "--cluster-col",
    "county",
    "--subject-covariates",
    "w1,w2",
    "--cluster-covariates",
    "x",
];

pub const SHORT_CHAIN: &[&str] = &["--iters", "1200", "--burnin", "400", "--thin", "4", "--cuts", "quantile:5"];

pub fn fit(dir: &Path, out: &str, extra: &[&str]) -> Output {
    let mut args = vec!["fit"];
    args.extend_from_slice(DATA_FLAGS);
    args.extend_from_slice(SHORT_CHAIN);
    args.extend_from_slice(&["--out", out]);
    args.extend_from_slice(extra);
    run(&args, dir)
}

pub fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

pub fn outputs(dir: &Path) -> BTreeMap<String, String> {
    serde_json::from_value(manifest(dir)["outputs"].clone()).unwrap()
}
