mod common;

use common::{batch_se, mean, pspline};
use distreg_core::design::{assemble_predictors, Dataset, ModelSpec, PredictorSpec};
use distreg_core::families::{Family, ParamVector};
use distreg_core::sampler::{run_chain, SamplerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(fam: Family, theta: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let t = ParamVector::new(theta);
    (0..n).map(|_| fam.sample(&t, rng).unwrap()).collect()
}

#[test]
fn lognormal_location_posterior_centres_on_mean_log() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let y = sample(Family::LogNormal, &[1.2, 0.5], 200, &mut rng);
    let data = Dataset::new().with_numeric("id", (0..200).map(f64::from).collect()).unwrap();
    let model = assemble_predictors(&ModelSpec::intercept_only(Family::LogNormal), &data, None).unwrap();
    let store = run_chain(&model, &y, &SamplerConfig::short(22_000, 2_000, 1, 5)).unwrap();
    let mu: Vec<f64> = store.coefs().column(0).to_vec();
    let target = mean(&y.iter().map(|v| v.ln()).collect::<Vec<_>>());
    let se = batch_se(&mu, 40);
    assert!((mean(&mu) - target).abs() < 3.0 * se, "{} vs {target} (se {se})", mean(&mu));
}

#[test]
fn same_seed_same_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let x: Vec<f64> = (0..150).map(|_| rng.random_range(0.0..1.0)).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&v| Family::Gamma.sample(&ParamVector::new(&[(1.0 + v).exp(), 3.0]), &mut rng).unwrap())
        .collect();
    let data = Dataset::new().with_numeric("x", x).unwrap();
    let spec = ModelSpec::intercept_only(Family::Gamma)
        .with_predictor("mu", PredictorSpec::intercept_only().with_term(pspline("x", 10)));
    let model = assemble_predictors(&spec, &data, None).unwrap();
    let a = run_chain(&model, &y, &SamplerConfig::short(600, 100, 5, 9)).unwrap();
    let b = run_chain(&model, &y, &SamplerConfig::short(600, 100, 5, 9)).unwrap();
    let c = run_chain(&model, &y, &SamplerConfig::short(600, 100, 5, 10)).unwrap();
    assert_eq!(a.n_draws(), 100);
    assert_eq!(a.coefs(), b.coefs());
    assert_eq!(a.variances(), b.variances());
    assert_ne!(a.coefs(), c.coefs());
}

#[test]
fn acceptance_rates_on_a_smooth_gamma_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let n = 800;
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = x
        .iter()
        .zip(&z)
        .map(|(&a, &b)| {
            let t = ParamVector::new(&[(0.5 + (2.0 * a).sin()).exp(), (1.0 + 0.5 * b).exp()]);
            Family::Gamma.sample(&t, &mut rng).unwrap()
        })
        .collect();
    let data = Dataset::new().with_numeric("x", x).unwrap().with_numeric("z", z).unwrap();
    let spec = ModelSpec::intercept_only(Family::Gamma)
        .with_predictor("mu", PredictorSpec::intercept_only().with_term(pspline("x", 12)))
        .with_predictor("sigma", PredictorSpec::intercept_only().with_term(pspline("z", 12)));
    let model = assemble_predictors(&spec, &data, None).unwrap();
    let store = run_chain(&model, &y, &SamplerConfig::short(3_000, 1_000, 5, 1)).unwrap();
    let report = store.report().unwrap();
    assert!(report.flagged_blocks().is_empty());
    for (label, stats) in &report.stats {
        let r = stats.acceptance_rate();
        assert!((0.3..=0.98).contains(&r) || r > 0.98, "{label}: {r}");
        assert!(r >= 0.3, "{label}: {r}");
    }
    assert!(report.max_audit_diff < 1e-8);
    assert!(report.audits >= 6);
}
