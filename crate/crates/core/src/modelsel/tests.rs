use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::design::{assemble_predictors, Dataset, ModelSpec, PredictorSpec, TermDef};
use crate::families::tests::random_theta;
use crate::families::{Family, ParamVector, ALL_FAMILIES};
use crate::fitted::PredictionDesign;
use crate::quadrature::{integrate_positive_half_line, GaussLegendre, QuadOptions};
use crate::sampler::{PosteriorStore, SamplerConfig};
use crate::special::normal_cdf;

fn pv(v: &[f64]) -> ParamVector {
    ParamVector::new(v)
}

fn plug(fam: Family, theta: ParamVector) -> Predictive {
    Predictive::plug_in(fam, theta).unwrap()
}

#[test]
fn log_score_at_standard_lognormal() {
    let p = plug(Family::LogNormal, pv(&[0.0, 1.0]));
    assert!((score_log(&p, 1.0).unwrap() + 0.918_938_533_204_672_7).abs() < 1e-12);
}

#[test]
fn residual_at_median_is_zero_and_lognormal_residuals_are_standardized() {
    let theta = pv(&[0.3, 0.49]);
    let median = Family::LogNormal.quantile(0.5, &theta).unwrap();
    let set = PredictiveSet::plug_in(Family::LogNormal, vec![median], &[theta]).unwrap();
    assert!(quantile_residuals(&set).unwrap().residuals[0].abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let y: Vec<f64> = (0..200).map(|_| Family::LogNormal.sample(&theta, &mut rng).unwrap()).collect();
    let set = PredictiveSet::plug_in(Family::LogNormal, y.clone(), &vec![theta; 200]).unwrap();
    let r = quantile_residuals(&set).unwrap();
    for (ri, yi) in r.residuals.iter().zip(&y) {
        assert!((ri - (yi.ln() - 0.3) / 0.7).abs() < 1e-9);
    }
    for (ri, ui) in r.residuals.iter().zip(&r.pit) {
        assert!((normal_cdf(*ri) - ui).abs() < 1e-12);
    }
    assert_eq!(r.clamped, 0);
}

#[test]
fn extreme_pit_values_are_clamped() {
    let theta = pv(&[0.0, 0.01]);
    let set = PredictiveSet::plug_in(Family::LogNormal, vec![1e-30, 1e30], &[theta, theta]).unwrap();
    let r = quantile_residuals(&set).unwrap();
    assert_eq!(r.clamped, 2);
    assert!(r.residuals.iter().all(|v| v.is_finite()));
    let qq = qq_pairs(&[0.3, -1.0, 2.0]);
    assert_eq!(qq.iter().map(|p| p.1).collect::<Vec<_>>(), vec![-1.0, 0.3, 2.0]);
    assert!(qq[1].0.abs() < 1e-15);
}

#[test]
fn pit_is_uniform_under_the_true_model_and_not_under_a_wrong_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 10_000;
    let truth: Vec<ParamVector> = (0..n).map(|i| pv(&[1.0 + (i % 7) as f64 * 0.3, 2.5])).collect();
    let y: Vec<f64> = truth.iter().map(|t| Family::Gamma.sample(t, &mut rng).unwrap()).collect();
    let set = PredictiveSet::plug_in(Family::Gamma, y.clone(), &truth).unwrap();
    let ks = ks_uniform(&pit_values(&set).unwrap());
    assert!(ks < ks_critical(n, 0.01), "{ks}");
    // log-normal with matching mean and variance
    let wrong: Vec<ParamVector> = truth
        .iter()
        .map(|t| {
            let s2 = (1.0 + 1.0 / t[1]).ln();
            pv(&[t[0].ln() - s2 / 2.0, s2])
        })
        .collect();
    let set = PredictiveSet::plug_in(Family::LogNormal, y, &wrong).unwrap();
    assert!(ks_uniform(&pit_values(&set).unwrap()) > ks_critical(n, 0.01));
}

#[test]
fn closed_form_squared_densities_match_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = QuadOptions {
        rel_tol: 1e-12,
        ..QuadOptions::default()
    };
    for fam in [Family::LogNormal, Family::Gamma, Family::Dagum] {
        for _ in 0..20 {
            let t = random_theta(fam, &mut rng);
            let p = plug(fam, t);
            let closed = integrated_squared_density(&p).unwrap();
            let median = fam.quantile(0.5, &t).unwrap();
            let quad = integrate_positive_half_line(|y| fam.density(y, &t).unwrap_or(0.0).powi(2), median, opts).unwrap();
            assert!((closed / quad - 1.0).abs() < 1e-8, "{fam} {t:?}: {closed} vs {quad}");
        }
    }
    assert!(integrated_squared_density(&plug(Family::Gamma, pv(&[1.0, 0.4]))).is_err());
}

#[test]
fn squared_density_quadrature_is_resolution_stable() {
    let p = plug(Family::InverseGaussian, pv(&[1.5, 0.3]));
    let v = integrated_squared_density(&p).unwrap();
    let trap = |m: usize| {
        let hi = 40.0;
        let h = hi / m as f64;
        (1..m).map(|i| p.density(i as f64 * h).powi(2)).sum::<f64>() * h
    };
    let (coarse, fine) = (trap(200_000), trap(400_000));
    assert!((coarse - fine).abs() < 1e-8 * fine);
    assert!((v - fine).abs() < 1e-6 * fine);
    let sps = score_spherical(&p, 1.0).unwrap();
    assert!((sps - p.density(1.0) / fine.sqrt()).abs() < 1e-6 * sps);
}

fn expected_on_grid(truth: &Predictive, score: impl Fn(f64) -> f64) -> f64 {
    // midpoint grid over the bulk of the true density
    let (lo, hi) = (1e-6, truth.quantile(1.0 - 1e-10).unwrap());
    let m = 40_000;
    let h = (hi - lo) / m as f64;
    (0..m)
        .map(|i| {
            let y = lo + (i as f64 + 0.5) * h;
            truth.density(y) * score(y) * h
        })
        .sum()
}

#[test]
fn scores_are_proper_on_gamma_toys() {
    let p = plug(Family::Gamma, pv(&[2.0, 3.0]));
    let q = plug(Family::Gamma, pv(&[2.4, 2.0]));
    let qs_p = expected_on_grid(&p, |y| score_quadratic(&p, y).unwrap());
    let qs_q = expected_on_grid(&p, |y| score_quadratic(&q, y).unwrap());
    assert!(qs_p > qs_q);
    let ls_p = expected_on_grid(&p, |y| score_log(&p, y).unwrap());
    let ls_q = expected_on_grid(&p, |y| score_log(&q, y).unwrap());
    assert!(ls_p > ls_q);
    let sps_p = expected_on_grid(&p, |y| score_spherical(&p, y).unwrap());
    let sps_q = expected_on_grid(&p, |y| score_spherical(&q, y).unwrap());
    assert!(sps_p > sps_q);
    let crps = |pred: &Predictive| {
        let (lo, hi) = (1e-6, p.quantile(1.0 - 1e-8).unwrap());
        let m = 2_000;
        let h = (hi - lo) / m as f64;
        (0..m)
            .map(|i| {
                let y = lo + (i as f64 + 0.5) * h;
                p.density(y) * score_crps(pred, y).unwrap() * h
            })
            .sum::<f64>()
    };
    assert!(crps(&p) > crps(&q));
}

#[test]
fn crps_forms_agree_and_are_nonpositive() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rule = GaussLegendre::unit_interval(CRPS_NODES);
    for i in 0..100 {
        let fam = ALL_FAMILIES[i % 4];
        let t = random_theta(fam, &mut rng);
        let y = fam.sample(&t, &mut rng).unwrap();
        let p = plug(fam, t);
        let a = score_crps(&p, y).unwrap();
        let b = score_crps_quantile(&p, y, &rule).unwrap();
        assert!(a < 0.0);
        assert!((a - b).abs() <= 1e-4 * a.abs(), "{fam} {t:?} y={y}: {a} vs {b}");
    }
}

#[test]
fn crps_vanishes_for_concentrating_predictions() {
    let y = 2.5f64;
    let mut last = f64::NEG_INFINITY;
    for s2 in [1e-1, 1e-2, 1e-4, 1e-6] {
        let c = score_crps(&plug(Family::LogNormal, pv(&[y.ln(), s2])), y).unwrap();
        assert!(c < 0.0 && c > last);
        last = c;
    }
    assert!(last > -1e-2);
}

#[test]
fn single_component_mixture_equals_plug_in() {
    let t = pv(&[2.5, 1.2, 0.8]);
    let a = plug(Family::Dagum, t);
    let b = Predictive::mixture(Family::Dagum, vec![t]).unwrap();
    for y in [0.3, 1.0, 4.0] {
        assert_eq!(score_observation(&a, y).unwrap(), score_observation(&b, y).unwrap());
    }
    let m = Predictive::mixture(Family::Gamma, vec![pv(&[1.0, 2.0]), pv(&[3.0, 5.0])]).unwrap();
    let q = m.quantile(0.4).unwrap();
    assert!((m.cdf(q).unwrap() - 0.4).abs() < 1e-10);
    let i2 = integrated_squared_density(&m).unwrap();
    let direct = integrate_positive_half_line(|y| m.density(y).powi(2), 1.0, QuadOptions::default()).unwrap();
    assert!((i2 - direct).abs() < 1e-8 * direct);
}

#[test]
fn alpha_curve_integrates_to_average_crps() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rule = GaussLegendre::unit_interval(CRPS_NODES);
    let params: Vec<ParamVector> = (0..30).map(|_| random_theta(Family::Gamma, &mut rng)).collect();
    let y: Vec<f64> = params.iter().map(|t| Family::Gamma.sample(t, &mut rng).unwrap()).collect();
    let set = PredictiveSet::plug_in(Family::Gamma, y, &params).unwrap();
    let (per_obs, summary) = score_set(&set, &rule).unwrap();
    let curve_integral: f64 =
        summary.alpha_sums.iter().zip(&rule.weights).map(|(s, w)| s * w).sum::<f64>() / summary.n as f64;
    assert!((curve_integral - summary.crps).abs() < 1e-4 * summary.crps.abs());
    let mean_ls = per_obs.iter().map(|s| s.ls).sum::<f64>() / 30.0;
    assert!((mean_ls - summary.ls).abs() < 1e-14);
}

fn toy_model(n: usize, seed: u64) -> (Dataset, Vec<f64>, ModelSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&v| Family::Gamma.sample(&pv(&[(0.5 + v).exp(), 4.0]), &mut rng).unwrap())
        .collect();
    let data = Dataset::new().with_numeric("x", x).unwrap();
    let spec = ModelSpec::intercept_only(Family::Gamma)
        .with_predictor("mu", PredictorSpec::intercept_only().with_term(TermDef::Linear { column: "x".into() }));
    (data, y, spec)
}

#[test]
fn dic_with_identical_draws_has_no_effective_parameters() {
    let (data, y, spec) = toy_model(30, 6);
    let model = assemble_predictors(&spec, &data, None).unwrap();
    let row = [0.6, 0.9, 1.2];
    let coefs = Array2::from_shape_fn((5, 3), |(_, j)| row[j]);
    let store = PosteriorStore::from_draws(&model, coefs, Array2::zeros((5, 0)), vec![0.0; 5]).unwrap();
    let design = PredictionDesign::training(&model);
    let d = dic(&design, &store, &y).unwrap();
    assert!(d.pd.abs() < 1e-9);
    assert!((d.dic - d.deviance_at_mean).abs() < 1e-9);
    let one = store.select(&[0]);
    assert!(dic(&design, &one, &y).is_err());
}

#[test]
fn dic_by_hand_on_three_observations() {
    let data = Dataset::new().with_numeric("x", vec![0.0, 1.0, 2.0]).unwrap();
    let spec = ModelSpec::intercept_only(Family::LogNormal);
    let model = assemble_predictors(&spec, &data, None).unwrap();
    let y = [1.0, 2.0, 0.5];
    // draws of (mu, log sigma2)
    let coefs = ndarray::array![[0.0, 0.0], [0.4, (2.0f64).ln()]];
    let store = PosteriorStore::from_draws(&model, coefs, Array2::zeros((2, 0)), vec![0.0; 2]).unwrap();
    let d = dic(&PredictionDesign::training(&model), &store, &y).unwrap();
    let dev = |mu: f64, s2: f64| -> f64 {
        y.iter()
            .map(|v: &f64| {
                let l = v.ln();
                (2.0 * std::f64::consts::PI * s2).ln() + 2.0 * l + (l - mu).powi(2) / s2
            })
            .sum()
    };
    let d1 = dev(0.0, 1.0);
    let d2 = dev(0.4, 2.0);
    let at_mean = dev(0.2, (0.5 * (2.0f64).ln()).exp());
    assert!((d.mean_deviance - 0.5 * (d1 + d2)).abs() < 1e-12);
    assert!((d.deviance_at_mean - at_mean).abs() < 1e-12);
    assert!((d.dic - (d1 + d2 - at_mean)).abs() < 1e-12);
    let params = vec![pv(&[0.2, 1.5]); 3];
    let point = pointwise_deviance(Family::LogNormal, &y, &params).unwrap();
    assert_eq!(point.iter().sum::<f64>(), deviance(Family::LogNormal, &y, &params).unwrap());
}

#[test]
fn chain_deviance_matches_recomputation() {
    let (data, y, spec) = toy_model(60, 7);
    let model = assemble_predictors(&spec, &data, None).unwrap();
    let store = crate::sampler::run_chain(&model, &y, &SamplerConfig::short(200, 50, 5, 2)).unwrap();
    let design = PredictionDesign::training(&model);
    for t in 0..store.n_draws() {
        let d = deviance(Family::Gamma, &y, &design.draw_params(&store, t).unwrap()).unwrap();
        assert!((d - store.deviance()[t]).abs() < 1e-8 * d.abs());
    }
}

#[test]
fn fold_assignment_is_balanced_and_seeded() {
    let a = assign_folds(103, 10, 9).unwrap();
    let b = assign_folds(103, 10, 9).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, assign_folds(103, 10, 10).unwrap());
    let mut counts = [0; 10];
    a.iter().for_each(|&f| counts[f] += 1);
    assert!(counts.iter().all(|&c| c == 10 || c == 11));
    assert!(assign_folds(5, 6, 0).is_err());
    assert!(assign_folds(5, 1, 0).is_err());
}

#[test]
fn leave_one_out_reports_every_fold() {
    let (data, y, spec) = toy_model(20, 8);
    let opts = CvOptions {
        folds: 20,
        sampler: SamplerConfig::short(120, 20, 5, 3),
        seed: 4,
        workers: 1,
        mixture: false,
    };
    let report = cross_validate(&spec, &data, &y, None, &opts).unwrap();
    assert_eq!(report.folds.len(), 20);
    let scored: usize = report.folds.iter().map(|f| f.summary.n).sum();
    let excluded: usize = report.folds.iter().map(|f| f.excluded).sum();
    assert_eq!(scored + excluded, 20);
    let csv = report.to_csv();
    assert_eq!(csv.lines().count(), 1 + 20 + 2);
    assert!(csv.contains("\noverall,") && csv.contains("\npooled,"));
    assert_eq!(report.alpha_csv().lines().count(), 1 + CRPS_NODES);
}
