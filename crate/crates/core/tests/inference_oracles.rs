use frailtree::chain::{Controls, PosteriorChain};
use frailtree::hazard::{cumulative_hazard, expand_poisson, quantile_cutpoints};
use frailtree::inference::{
    compute_dic, compute_lpml, draw_survival, lpml_from_loglik, predictive_frailty_density,
    predictive_survival, pseudo_bayes_factor, DicReport, SurvivalQuadrature,
};
use frailtree::ldtfp::FrailtyLawKind;
use frailtree::rng::stream;
use frailtree::sampler::likelihood::ObservationModel;
use frailtree::sampler::{run_chain, ModelSpec};
use frailtree::simulate::{generate, Scenario, ScenarioSpec};
use rand_distr::{Distribution, Exp, Gamma};
use std::sync::OnceLock;

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

fn fitted(kind: FrailtyLawKind) -> &'static PosteriorChain {
    static LDTFP: OnceLock<PosteriorChain> = OnceLock::new();
    static GAUSSIAN: OnceLock<PosteriorChain> = OnceLock::new();
    let cell = match kind {
        FrailtyLawKind::Ldtfp => &LDTFP,
        _ => &GAUSSIAN,
    };
    cell.get_or_init(|| {
        let mut scenario = ScenarioSpec::new(Scenario::I);
        scenario.n_clusters = 25;
        let sim = generate(&scenario, &mut stream(31, 0)).unwrap();
        let times: Vec<f64> = sim.dataset.records.iter().map(|r| r.time).collect();
        let cuts = quantile_cutpoints(&times, 5).unwrap();
        let spec = ModelSpec::new(sim.dataset, cuts, kind, 3);
        run_chain(&spec, &Controls::new(3_000, 1_000, 20, 6)).unwrap()
    })
}

#[test]
fn conjugate_cpo_matches_closed_form() {
    let start = std::time::Instant::now();
    let (a, b) = (2.0, 1.0);
    let mut rng = stream(77, 0);
    let y: Vec<f64> = (0..30).map(|_| Exp::new(1.3).unwrap().sample(&mut rng)).collect();
    let n = y.len();
    let total: f64 = y.iter().sum();
    let posterior = Gamma::new(a + n as f64, 1.0 / (b + total)).unwrap();
    let draws = 20_000;
    let mut loglik = Vec::with_capacity(draws * n);
    for _ in 0..draws {
        let lambda: f64 = posterior.sample(&mut rng);
        loglik.extend(y.iter().map(|yi| lambda.ln() - lambda * yi));
    }
    let report = lpml_from_loglik(&loglik, n, &[]).unwrap();
    let mut worst: f64 = 0.0;
    for (i, yi) in y.iter().enumerate() {
        // p(y_i | y_{-i}) for a Gamma(a', b') posterior on the rate
        let a_loo = a + n as f64 - 1.0;
        let b_loo = b + total - yi;
        let exact = (a_loo.ln() + a_loo * b_loo.ln() - (a_loo + 1.0) * (b_loo + yi).ln()).exp();
        worst = worst.max((report.cpo()[i] / exact - 1.0).abs());
    }
    println!("worst relative CPO error {worst:.4}");
    assert!(worst < 0.05);
    assert!(start.elapsed().as_secs_f64() < 60.0);
}

#[test]
fn pseudo_bayes_factor_of_four_log_units() {
    let pbf = pseudo_bayes_factor(-2222.0, -2226.0);
    assert_eq!(pbf, 4f64.exp());
    assert!((pbf - 54.6).abs() < 0.05);
}

fn survival_oracle(chain: &PosteriorChain, m: usize, profile: &[f64], t: f64) -> f64 {
    let k = chain.meta.n_intervals();
    let (heights, xi) = chain.gamma_draw(m).split_at(k);
    let lin: f64 = profile.iter().zip(xi).map(|(a, b)| a * b).sum();
    let a = cumulative_hazard(&chain.meta.cuts, heights, t) * lin.exp();
    let forest = chain.forest_draw(m).unwrap();
    let x = &profile[profile.len() - chain.meta.q..];
    let sd = forest.tree.sd();
    let mut edges = vec![-12.0 * sd];
    edges.extend(forest.tree.boundaries(forest.depth()));
    edges.push(12.0 * sd);
    edges
        .windows(2)
        .map(|w| {
            let inset = 1e-12 * (w[1] - w[0]);
            let f = |e: f64| (-a * e.exp()).exp() * forest.density(e, x);
            adaptive_simpson(&f, w[0] + inset, w[1] - inset, 1e-12)
        })
        .sum()
}

#[test]
fn per_draw_survival_matches_adaptive_quadrature() {
    let grid = [0.0, 0.05, 0.3, 1.0, 2.5, 6.0];
    let quad = SurvivalQuadrature::default();
    for kind in [FrailtyLawKind::Gaussian, FrailtyLawKind::Ldtfp] {
        let chain = fitted(kind);
        for m in [0, chain.n_draws() / 2, chain.n_draws() - 1] {
            for profile in [[0.0, 1.0, 2.0], [2.0, 1.0, -2.0], [-1.0, 0.0, 0.5]] {
                let curve = draw_survival(chain, m, &profile, &grid, &quad).unwrap();
                assert_eq!(curve[0], 1.0);
                for (t, s) in grid.iter().zip(&curve).skip(1) {
                    let oracle = survival_oracle(chain, m, &profile, *t);
                    assert!((s - oracle).abs() < 1e-8, "{kind:?} t={t}: {s} vs {oracle}");
                }
            }
        }
    }
}

#[test]
fn predictive_bands_are_ordered_and_monotone() {
    let chain = fitted(FrailtyLawKind::Ldtfp);
    let grid: Vec<f64> = (0..40).map(|i| i as f64 * 0.15).collect();
    let curve = predictive_survival(chain, &[0.0, 1.0, 2.0], &grid, 0.9, &SurvivalQuadrature::default()).unwrap();
    assert_eq!(curve.mean[0], 1.0);
    for g in 0..grid.len() {
        assert!(curve.lower[g] <= curve.upper[g]);
        assert!((0.0..=1.0).contains(&curve.lower[g]) && curve.upper[g] <= 1.0);
    }
    for band in [&curve.mean, &curve.lower, &curve.upper] {
        assert!(band.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn survival_decreases_in_a_positive_coefficient() {
    let chain = fitted(FrailtyLawKind::Gaussian);
    let grid = [0.2, 0.7, 1.5];
    let quad = SurvivalQuadrature::default();
    let k = chain.meta.n_intervals();
    for m in 0..chain.n_draws() {
        let xi_w1 = chain.gamma_draw(m)[k];
        let low = draw_survival(chain, m, &[0.0, 0.0, 0.0], &grid, &quad).unwrap();
        let high = draw_survival(chain, m, &[1.0, 0.0, 0.0], &grid, &quad).unwrap();
        for (l, h) in low.iter().zip(&high) {
            if xi_w1 > 0.0 {
                assert!(h <= l);
            } else {
                assert!(h >= l);
            }
        }
    }
}

/// A fine grid with extra points just either side of every draw's set
/// boundaries, so the trapezoid rule does not straddle a jump.
fn jump_aware_grid(chain: &PosteriorChain, x: f64, shifted: bool) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=50_000).map(|i| -25.0 + i as f64 * 0.001).collect();
    for m in 0..chain.n_draws() {
        let forest = chain.forest_draw(m).unwrap();
        let shift = if shifted { chain.xi_x(m)[0] * x } else { 0.0 };
        for b in forest.tree.boundaries(forest.depth()) {
            grid.extend([b + shift - 1e-9, b + shift + 1e-9]);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| *a - *b < 1e-12);
    grid
}

fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    grid.windows(2)
        .zip(values.windows(2))
        .map(|(g, v)| 0.5 * (v[0] + v[1]) * (g[1] - g[0]))
        .sum()
}

#[test]
fn predictive_frailty_density_integrates_to_one() {
    let chain = fitted(FrailtyLawKind::Ldtfp);
    for x in [-1.0, 0.5, 2.0] {
        for shifted in [false, true] {
            let grid = jump_aware_grid(chain, x, shifted);
            let curve = predictive_frailty_density(chain, &[x], &grid, shifted, 0.95).unwrap();
            let integral = trapezoid(&grid, &curve.mean);
            assert!((integral - 1.0).abs() < 1e-4, "x={x} shifted={shifted}: {integral}");
            if !shifted {
                // every draw has median zero
                let zero = grid.partition_point(|g| *g <= 0.0);
                let below = trapezoid(&grid[..zero], &curve.mean[..zero]);
                assert!((below - 0.5).abs() < 1e-4, "mass below zero {below}");
            }
        }
    }
}

fn dyadic_chain() -> PosteriorChain {
    let mut chain = fitted(FrailtyLawKind::Gaussian).thinned(1);
    let draws = 8;
    let gamma: Vec<f64> = (0..chain.meta.gamma_dim()).map(|i| -1.0 + 0.25 * i as f64).collect();
    let frailties: Vec<f64> = (0..chain.meta.n_clusters()).map(|i| 0.125 * (i % 5) as f64 - 0.25).collect();
    chain.gamma = gamma.repeat(draws);
    chain.frailties = frailties.repeat(draws);
    chain.theta = chain.theta[..draws].to_vec();
    chain.precision = chain.precision[..draws].to_vec();
    chain.coeffs = chain.coeffs[..draws * chain.meta.n_coeffs()].to_vec();
    chain.loglik = None;
    chain
}

fn model_loglik(model: &ObservationModel) -> impl Fn(&[f64], &[f64]) -> frailtree::Result<f64> + Sync + '_ {
    move |g: &[f64], e: &[f64]| Ok(model.loglik(g, e))
}

#[test]
fn dic_of_a_point_mass_chain_has_no_penalty() {
    let chain = dyadic_chain();
    let spec_data = {
        let mut scenario = ScenarioSpec::new(Scenario::I);
        scenario.n_clusters = 25;
        generate(&scenario, &mut stream(31, 0)).unwrap().dataset
    };
    let model = ObservationModel::new(&expand_poisson(&spec_data, &chain.meta.cuts));
    let dic = compute_dic(&chain, model_loglik(&model)).unwrap();
    assert_eq!(dic.p_d, 0.0);
    assert_eq!(dic.dic, dic.d_bar);
    assert_eq!(dic.d_bar, dic.d_at_mean);

    let report = DicReport::from_deviances(10.0, 7.5);
    assert_eq!((report.p_d, report.dic), (2.5, 12.5));
}

#[test]
fn duplicated_data_doubles_mean_deviance() {
    let chain = fitted(FrailtyLawKind::Gaussian);
    let mut scenario = ScenarioSpec::new(Scenario::I);
    scenario.n_clusters = 25;
    let ds = generate(&scenario, &mut stream(31, 0)).unwrap().dataset;
    let mut doubled = ds.clone();
    doubled.records.extend(ds.records.iter().cloned());
    let single = ObservationModel::new(&expand_poisson(&ds, &chain.meta.cuts));
    let double = ObservationModel::new(&expand_poisson(&doubled, &chain.meta.cuts));
    let a = compute_dic(chain, model_loglik(&single)).unwrap();
    let b = compute_dic(chain, model_loglik(&double)).unwrap();
    assert!((b.d_bar / a.d_bar - 2.0).abs() < 1e-12);
    assert!((b.d_at_mean / a.d_at_mean - 2.0).abs() < 1e-12);
}

#[test]
fn lpml_uses_every_retained_draw() {
    let chain = fitted(FrailtyLawKind::Ldtfp);
    let full = compute_lpml(chain).unwrap();
    assert_eq!(compute_lpml(&chain.thinned(1)).unwrap(), full);
    assert_eq!(full.log_cpo.len(), chain.meta.n_obs());
    assert!(full.warnings.is_empty());

    let half = chain.thinned(2);
    assert_eq!(half.n_draws(), chain.n_draws().div_ceil(2));
    let ll = chain.loglik.as_ref().unwrap();
    let n = chain.meta.n_obs();
    let every_other: Vec<f64> = (0..chain.n_draws())
        .step_by(2)
        .flat_map(|m| ll[m * n..(m + 1) * n].iter().copied())
        .collect();
    assert_eq!(compute_lpml(&half).unwrap(), lpml_from_loglik(&every_other, n, &chain.meta.observation_labels).unwrap());

    // each CPO is at most the largest per-draw likelihood
    for (o, v) in full.log_cpo.iter().enumerate() {
        let best = (0..chain.n_draws()).map(|m| ll[m * n + o]).fold(f64::NEG_INFINITY, f64::max);
        assert!(*v <= best + 1e-12);
    }
}

/// Conservative Monte Carlo SE of an LPML estimate: the sum over observations
/// of delta-method batch-means SEs of each `log CPO`.
fn lpml_standard_error(loglik: &[f64], n_obs: usize) -> f64 {
    let draws = loglik.len() / n_obs;
    let batches = 10;
    let per = draws / batches;
    (0..n_obs)
        .map(|o| {
            let column: Vec<f64> = (0..draws).map(|m| -loglik[m * n_obs + o]).collect();
            let shift = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let means: Vec<f64> = (0..batches)
                .map(|b| column[b * per..(b + 1) * per].iter().map(|v| (v - shift).exp()).sum::<f64>() / per as f64)
                .collect();
            let mean = frailtree::numeric::mean(&means);
            (frailtree::numeric::variance(&means) / batches as f64).sqrt() / mean
        })
        .sum()
}

#[test]
fn lpml_is_stable_under_thinning() {
    let mut scenario = ScenarioSpec::new(Scenario::I);
    scenario.n_clusters = 25;
    let sim = generate(&scenario, &mut stream(31, 0)).unwrap();
    let cuts = quantile_cutpoints(&sim.dataset.times(), 5).unwrap();
    let spec = ModelSpec::new(sim.dataset, cuts, FrailtyLawKind::Ldtfp, 3);
    let chain = run_chain(&spec, &Controls::new(12_000, 2_000, 5, 13)).unwrap();
    let full = compute_lpml(&chain).unwrap().lpml;
    let half = chain.thinned(2);
    let thinned = compute_lpml(&half).unwrap().lpml;
    let se = lpml_standard_error(half.loglik.as_ref().unwrap(), half.meta.n_obs());
    println!("LPML {full:.3}, thinned {thinned:.3}, se {se:.3}");
    assert!((full - thinned).abs() < 3.0 * se);
}

#[test]
fn pseudo_bayes_factor_is_antisymmetric() {
    for (a, b) in [(-10.0, -12.5), (3.0, 3.0), (-2222.0, -2226.0)] {
        let ab = pseudo_bayes_factor(a, b);
        assert!((ab * pseudo_bayes_factor(b, a) - 1.0).abs() < 1e-15);
    }
    assert_eq!(pseudo_bayes_factor(-7.0, -7.0), 1.0);
}

#[test]
fn ldtfp_dic_does_not_exceed_gaussian_under_mixture_truth() {
    let scenario = ScenarioSpec::new(Scenario::I);
    let sim = generate(&scenario, &mut stream(8, 0)).unwrap();
    let cuts = quantile_cutpoints(&sim.dataset.times(), 8).unwrap();
    let model = ObservationModel::new(&expand_poisson(&sim.dataset, &cuts));
    let dic = |kind| {
        let spec = ModelSpec::new(sim.dataset.clone(), cuts.clone(), kind, 4);
        let chain = run_chain(&spec, &Controls::new(12_000, 2_000, 10, 3)).unwrap();
        compute_dic(&chain, model_loglik(&model)).unwrap()
    };
    let (ldtfp, gaussian) = (dic(FrailtyLawKind::Ldtfp), dic(FrailtyLawKind::Gaussian));
    println!("DIC ldtfp {:.1} (pD {:.1}), gaussian {:.1} (pD {:.1})", ldtfp.dic, ldtfp.p_d, gaussian.dic, gaussian.p_d);
    assert!(ldtfp.dic <= gaussian.dic);
}
