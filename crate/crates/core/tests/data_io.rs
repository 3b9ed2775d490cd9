use frailtree::data::{
    goodman_kruskal_gamma, goodman_kruskal_gamma_table, load_dataset, summarize, Schema,
};
use proptest::prelude::*;
use std::io::Write;

/// Concordant and discordant pair counts by enumerating every pair of units.
fn brute_force_pairs(x: &[u32], y: &[u32]) -> (u64, u64) {
    let (mut c, mut d) = (0, 0);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let s = (x[i] as i64 - x[j] as i64).signum() * (y[i] as i64 - y[j] as i64).signum();
            match s {
                1 => c += 1,
                -1 => d += 1,
                _ => {}
            }
        }
    }
    (c, d)
}

fn units_from_table(table: &[Vec<u64>]) -> (Vec<u32>, Vec<u32>) {
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, row) in table.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            for _ in 0..n {
                x.push(i as u32);
                y.push(j as u32);
            }
        }
    }
    (x, y)
}

#[test]
fn three_by_three_table_matches_pair_enumeration() {
    let table = vec![vec![4, 2, 1], vec![2, 4, 2], vec![1, 2, 4]];
    let (x, y) = units_from_table(&table);
    let (c, d) = brute_force_pairs(&x, &y);
    let stat = goodman_kruskal_gamma_table(&table).unwrap();
    assert_eq!(stat.concordant, c as f64);
    assert_eq!(stat.discordant, d as f64);
    let expected = (c as f64 - d as f64) / (c as f64 + d as f64);
    assert!((stat.gamma - expected).abs() < 1e-15);
    assert!(stat.ci95.0 < stat.gamma && stat.gamma < stat.ci95.1);
    assert_eq!(goodman_kruskal_gamma(&x, &y).unwrap(), stat);
}

fn table_strategy() -> impl Strategy<Value = Vec<Vec<u64>>> {
    (2usize..=4, 2usize..=4).prop_flat_map(|(r, c)| {
        prop::collection::vec(prop::collection::vec(0u64..8, c), r)
    })
}

proptest! {
    #[test]
    fn gamma_matches_brute_force(table in table_strategy()) {
        let (x, y) = units_from_table(&table);
        let (c, d) = brute_force_pairs(&x, &y);
        match goodman_kruskal_gamma_table(&table) {
            Ok(stat) => {
                prop_assert_eq!(stat.concordant, c as f64);
                prop_assert_eq!(stat.discordant, d as f64);
                if c + d == 0 {
                    prop_assert_eq!(stat.gamma, 0.0);
                } else {
                    prop_assert!((stat.gamma - (c as f64 - d as f64) / (c + d) as f64).abs() < 1e-14);
                }
                prop_assert!((-1.0..=1.0).contains(&stat.gamma));
            }
            Err(e) => prop_assert!(false, "{e}"),
        }
    }

    #[test]
    fn gamma_reverses_sign_and_ignores_relabeling(table in table_strategy()) {
        let (x, y) = units_from_table(&table);
        prop_assume!(x.iter().any(|v| *v != x[0]) && y.iter().any(|v| *v != y[0]));
        let base = goodman_kruskal_gamma(&x, &y).unwrap().gamma;
        let reversed: Vec<u32> = y.iter().map(|v| 10 - v).collect();
        prop_assert_eq!(goodman_kruskal_gamma(&x, &reversed).unwrap().gamma, -base);
        let relabeled: Vec<f64> = x.iter().map(|v| (*v as f64).exp() * 3.0 - 7.0).collect();
        let yf: Vec<f64> = y.iter().map(|v| *v as f64).collect();
        prop_assert_eq!(goodman_kruskal_gamma(&relabeled, &yf).unwrap().gamma, base);
    }
}

fn write_file(dir: &std::path::Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::File::create(&path).unwrap().write_all(body.as_bytes()).unwrap();
    path
}

#[test]
fn summary_counts_match_input_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut subjects = String::from("id,time,event,county,stage\n");
    let stages = [0, 1, 1, 2, 0, 2, 2, 1, 0, 1, 2, 2];
    for (i, s) in stages.iter().enumerate() {
        subjects.push_str(&format!("{i},{},{},{},{s}\n", 1 + i * 3, i % 3 == 0, ["a", "b", "c"][i % 3]));
    }
    let subjects = subjects.replace("true", "1").replace("false", "0");
    let s_path = write_file(dir.path(), "subjects.csv", &subjects);
    let c_path = write_file(dir.path(), "clusters.csv", "county,rucc\na,1\nb,3\nc,3\n");
    let schema = Schema {
        cluster: "county".into(),
        cluster_key: "county".into(),
        subject_covariates: vec!["stage".into()],
        cluster_covariates: vec!["rucc".into()],
        categorical: vec!["stage".into(), "rucc".into()],
        ..Schema::default()
    };
    let ds = load_dataset(&s_path, &c_path, &schema, false).unwrap();
    let summary = summarize(&ds).unwrap();
    assert_eq!(summary.n_subjects, stages.len());
    assert_eq!(summary.events, 4);
    let stage = summary.categorical.iter().find(|c| c.name == "stage").unwrap();
    for level in &stage.levels {
        let v: u32 = level.level.parse().unwrap();
        assert_eq!(level.count, stages.iter().filter(|s| **s == v).count());
    }
    let rucc = summary.categorical.iter().find(|c| c.name == "rucc").unwrap();
    assert_eq!(
        rucc.levels.iter().map(|l| (l.level.as_str(), l.count)).collect::<Vec<_>>(),
        vec![("1", 1), ("3", 2)]
    );

    // standardization does not change the raw-scale summary
    let standardized = load_dataset(&s_path, &c_path, &schema, true).unwrap();
    let again = summarize(&standardized).unwrap();
    for (a, b) in summary.categorical.iter().zip(&again.categorical) {
        assert_eq!(a.name, b.name);
        assert_eq!(
            a.levels.iter().map(|l| l.count).collect::<Vec<_>>(),
            b.levels.iter().map(|l| l.count).collect::<Vec<_>>()
        );
    }
}

#[test]
fn event_proportion_of_an_iowa_sized_cohort() {
    let dir = tempfile::tempdir().unwrap();
    let mut subjects = String::from("time,event,cluster\n");
    for i in 0..1073 {
        subjects.push_str(&format!("{},{},{}\n", 1 + i % 60, u8::from(i < 488), i % 99));
    }
    let clusters: String = std::iter::once("cluster\n".to_string())
        .chain((0..99).map(|i| format!("{i}\n")))
        .collect();
    let ds = load_dataset(
        &write_file(dir.path(), "s.csv", &subjects),
        &write_file(dir.path(), "c.csv", &clusters),
        &Schema::default(),
        false,
    )
    .unwrap();
    let summary = summarize(&ds).unwrap();
    assert_eq!((summary.n_subjects, summary.events), (1073, 488));
    assert_eq!(format!("{:.1}", 100.0 * summary.event_proportion), "45.5");
}
