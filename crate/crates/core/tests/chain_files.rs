use frailtree::chain::{Controls, LoglikFormat, PosteriorChain};
use frailtree::data::Dataset;
use frailtree::hazard::quantile_cutpoints;
use frailtree::inference::{compute_lpml, summarize_posterior};
use frailtree::ldtfp::FrailtyLawKind;
use frailtree::rng::stream;
use frailtree::sampler::{run_chain, ModelSpec};
use frailtree::simulate::{generate, Scenario, ScenarioSpec};
use frailtree::Error;

fn small_chain(kind: FrailtyLawKind, standardize: bool) -> PosteriorChain {
    let mut scenario = ScenarioSpec::new(Scenario::I);
    scenario.n_clusters = 12;
    scenario.cluster_size = 5;
    let mut ds: Dataset = generate(&scenario, &mut stream(4, 0)).unwrap().dataset;
    if standardize {
        ds.standardize();
    }
    let cuts = quantile_cutpoints(&ds.times(), 4).unwrap();
    run_chain(&ModelSpec::new(ds, cuts, kind, 3), &Controls::new(300, 100, 5, 1)).unwrap()
}

#[test]
fn chains_round_trip_bit_for_bit() {
    for kind in [FrailtyLawKind::Ldtfp, FrailtyLawKind::Gaussian, FrailtyLawKind::ExchangeableTailfree] {
        for format in [LoglikFormat::Csv, LoglikFormat::Binary] {
            let chain = small_chain(kind, kind == FrailtyLawKind::Ldtfp);
            let dir = tempfile::tempdir().unwrap();
            chain.write(dir.path(), format).unwrap();
            let back = PosteriorChain::read(dir.path()).unwrap();
            assert_eq!(back, chain, "{kind:?} {format:?}");
            assert_eq!(compute_lpml(&back).unwrap(), compute_lpml(&chain).unwrap());
            assert_eq!(
                summarize_posterior(&back, 0.95).unwrap(),
                summarize_posterior(&chain, 0.95).unwrap()
            );
        }
    }
}

#[test]
fn chains_without_loglik_round_trip() {
    let mut chain = small_chain(FrailtyLawKind::Ldtfp, false);
    chain.loglik = None;
    let dir = tempfile::tempdir().unwrap();
    chain.write(dir.path(), LoglikFormat::Binary).unwrap();
    let back = PosteriorChain::read(dir.path()).unwrap();
    assert_eq!(back, chain);
    assert!(compute_lpml(&back).is_err());
}

#[test]
fn truncated_files_are_reported() {
    let chain = small_chain(FrailtyLawKind::Ldtfp, false);
    for (format, file) in [(LoglikFormat::Binary, "loglik.bin"), (LoglikFormat::Csv, "gamma.csv")] {
        let dir = tempfile::tempdir().unwrap();
        chain.write(dir.path(), format).unwrap();
        let path = dir.path().join(file);
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        match PosteriorChain::read(dir.path()) {
            Err(Error::ChainFormat { path: p, .. }) => assert!(p.ends_with(file)),
            other => panic!("expected a format error, got {other:?}"),
        }
    }
}

#[test]
fn appended_chains_pool_draws_in_order() {
    let a = small_chain(FrailtyLawKind::Ldtfp, false);
    let mut pooled = a.clone();
    pooled.append(&a).unwrap();
    let m = a.n_draws();
    assert_eq!(pooled.n_draws(), 2 * m);
    for i in 0..m {
        assert_eq!(pooled.gamma_draw(m + i), a.gamma_draw(i));
        assert_eq!(pooled.frailty_draw(m + i), a.frailty_draw(i));
        assert_eq!(pooled.loglik_draw(m + i), a.loglik_draw(i));
    }

    let mut without = a.clone();
    without.loglik = None;
    let mut mixed = a.clone();
    mixed.append(&without).unwrap();
    assert!(mixed.loglik.is_none());

    let other = small_chain(FrailtyLawKind::Gaussian, false);
    assert!(pooled.append(&other).is_err());
}
