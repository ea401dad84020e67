use super::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pv(v: &[f64]) -> ParamVector {
    ParamVector::new(v)
}

// Independent adaptive Simpson used as the quadrature oracle here.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[test]
fn lognormal_density_at_unit() {
    let v = Family::LogNormal.log_density(1.0, &pv(&[0.0, 1.0])).unwrap();
    assert!((v - (-0.918_938_533_204_672_7)).abs() < 1e-12);
}

#[test]
fn gamma_reduces_to_exponential_at_unit_shape() {
    let v = Family::Gamma.log_density(2.0, &pv(&[2.0, 1.0])).unwrap();
    assert!((v - (0.5f64 * (-1.0f64).exp()).ln()).abs() < 1e-12);
    assert!((v - (-1.693_147_180_559_945)).abs() < 1e-12);
}

#[test]
fn dagum_density_matches_direct_formula() {
    let (a, b, c, y) = (2.0f64, 1.0f64, 3.0f64, 1.0f64);
    let direct = a * c * y.powf(a * c - 1.0) / (b.powf(a * c) * (1.0 + (y / b).powf(a)).powf(c + 1.0));
    let v = Family::Dagum.log_density(y, &pv(&[a, b, c])).unwrap();
    assert!((v - direct.ln()).abs() < 1e-13);
    assert!((v - (0.375f64).ln()).abs() < 1e-13);
    // a second point away from the scale
    let (y, b) = (3.7f64, 1.3f64);
    let direct = a * c * y.powf(a * c - 1.0) / (b.powf(a * c) * (1.0 + (y / b).powf(a)).powf(c + 1.0));
    let v = Family::Dagum.log_density(y, &pv(&[a, b, c])).unwrap();
    assert!((v - direct.ln()).abs() < 1e-12);
}

#[test]
fn rejects_bad_support_and_parameters() {
    assert!(Family::Gamma.log_density(0.0, &pv(&[1.0, 1.0])).is_err());
    assert!(Family::Gamma.log_density(-1.0, &pv(&[1.0, 1.0])).is_err());
    assert!(Family::Dagum.log_density(1.0, &pv(&[0.0, 1.0, 1.0])).is_err());
    assert!(Family::LogNormal.log_density(1.0, &pv(&[-3.0, 1.0])).is_ok());
    assert!(Family::LogNormal.log_density(1.0, &pv(&[0.0, 0.0])).is_err());
    assert!(Family::InverseGaussian.expected_weight(&pv(&[1.0, f64::INFINITY]), 0).is_err());
    assert!(Family::Gamma.quantile(1.0, &pv(&[1.0, 1.0])).is_err());
    assert!(Family::Gamma.quantile(0.0, &pv(&[1.0, 1.0])).is_err());
    assert!(Family::Gamma.score(1.0, &pv(&[1.0, 1.0]), 2).is_err());
}

#[test]
fn dagum_cdf_at_scale() {
    for &c in &[0.5, 1.0, 2.5] {
        let f = Family::Dagum.cdf(1.7, &pv(&[3.0, 1.7, c])).unwrap();
        assert!((f - 2f64.powf(-c)).abs() < 1e-15);
    }
    // quantile at 2^{-c} returns b
    let q = Family::Dagum.quantile(2f64.powf(-1.5), &pv(&[2.0, 4.0, 1.5])).unwrap();
    assert!((q - 4.0).abs() < 1e-12);
}

#[test]
fn lognormal_median() {
    let q = Family::LogNormal.quantile(0.5, &pv(&[1.0, 4.0])).unwrap();
    assert!((q - std::f64::consts::E).abs() < 1e-12);
}

#[test]
fn inverse_gaussian_cdf_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..25 {
        let mu = rng.random_range(0.3..4.0);
        let s2 = rng.random_range(0.05..2.0);
        let theta = pv(&[mu, s2]);
        let y = Family::InverseGaussian.sample(&theta, &mut rng).unwrap();
        let f = |t: f64| Family::InverseGaussian.density_or_zero(t, &theta);
        let numeric = simpson(&f, 0.0, y, 1e-13);
        let exact = Family::InverseGaussian.cdf(y, &theta).unwrap();
        assert!((numeric - exact).abs() < 1e-8, "mu={mu} s2={s2} y={y}: {numeric} vs {exact}");
    }
}

#[test]
fn cdf_quantile_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cases = [
        (Family::LogNormal, pv(&[0.3, 0.8])),
        (Family::InverseGaussian, pv(&[2.0, 0.4])),
        (Family::InverseGaussian, pv(&[0.5, 3.0])),
        (Family::Gamma, pv(&[3.0, 0.7])),
        (Family::Gamma, pv(&[0.2, 12.0])),
        (Family::Dagum, pv(&[3.0, 2.0, 0.6])),
    ];
    for (fam, theta) in cases {
        for _ in 0..200 {
            let p: f64 = rng.random_range(1e-6..1.0 - 1e-6);
            let y = fam.quantile(p, &theta).unwrap();
            let back = fam.quantile(fam.cdf(y, &theta).unwrap(), &theta).unwrap();
            assert!(((back - y) / y).abs() < 1e-8, "{fam} p={p}");
            assert!((fam.cdf(y, &theta).unwrap() - p).abs() < 1e-10);
        }
    }
}

#[test]
fn cdf_and_sf_are_complementary_and_monotone() {
    for fam in ALL_FAMILIES {
        let theta = match fam {
            Family::Dagum => pv(&[2.5, 1.5, 0.8]),
            Family::LogNormal => pv(&[0.2, 0.5]),
            _ => pv(&[1.5, 0.7]),
        };
        let mut prev = 0.0;
        for i in 1..400 {
            let y = 0.01 * i as f64;
            let f = fam.cdf(y, &theta).unwrap();
            let s = fam.sf(y, &theta).unwrap();
            assert!((f + s - 1.0).abs() < 1e-12, "{fam} y={y}");
            assert!(f >= prev);
            prev = f;
        }
    }
}

#[test]
fn lognormal_draws_have_correct_log_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let theta = pv(&[0.7, 2.0]);
    let n = 100_000;
    let mean = (0..n)
        .map(|_| Family::LogNormal.sample(&theta, &mut rng).unwrap().ln())
        .sum::<f64>()
        / n as f64;
    let se = (2.0f64 / n as f64).sqrt();
    assert!((mean - 0.7).abs() < 3.0 * se);
}

fn ks_statistic(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn sampler_draws_pass_ks() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let n = 10_000;
    let crit = 1.6276 / (n as f64).sqrt();
    let cases = [
        (Family::Gamma, pv(&[2.0, 0.6])),
        (Family::InverseGaussian, pv(&[1.3, 0.8])),
        (Family::Dagum, pv(&[3.0, 1.0, 1.5])),
        (Family::LogNormal, pv(&[-1.0, 0.3])),
    ];
    for (fam, theta) in cases {
        let draws: Vec<f64> = (0..n).map(|_| fam.sample(&theta, &mut rng).unwrap()).collect();
        let d = ks_statistic(draws, |y| fam.cdf(y, &theta).unwrap());
        assert!(d < crit, "{fam}: D = {d}");
    }
}

#[test]
fn lognormal_location_score_at_e() {
    let v = Family::LogNormal.score(std::f64::consts::E, &pv(&[0.0, 1.0]), 0).unwrap();
    assert!((v - 1.0).abs() < 1e-15);
}

#[test]
fn lognormal_weights_closed_form() {
    let theta = pv(&[0.4, 2.5]);
    assert!((Family::LogNormal.expected_weight(&theta, 0).unwrap() - 0.4).abs() < 1e-15);
    assert_eq!(Family::LogNormal.expected_weight(&theta, 1).unwrap(), 0.5);
}

fn log_density_at_eta(fam: Family, y: f64, eta: &[f64]) -> f64 {
    let (theta, _) = fam.params_from_eta(eta);
    fam.log_density_unchecked(y, &theta)
}

#[test]
fn score_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for fam in ALL_FAMILIES {
        for _ in 0..50 {
            let theta = random_theta(fam, &mut rng);
            let y = fam.sample(&theta, &mut rng).unwrap();
            let eta = fam.eta_from_params(&theta);
            for k in 0..fam.n_params() {
                let h = 1e-5 * (1.0 + eta[k].abs());
                let mut up = eta.clone();
                let mut dn = eta.clone();
                up[k] += h;
                dn[k] -= h;
                let fd = (log_density_at_eta(fam, y, &up) - log_density_at_eta(fam, y, &dn)) / (2.0 * h);
                let an = fam.score(y, &theta, k).unwrap();
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{fam} k={k}: {fd} vs {an}");
            }
        }
    }
}

pub(crate) fn random_theta<R: Rng>(fam: Family, rng: &mut R) -> ParamVector {
    match fam {
        Family::LogNormal => pv(&[rng.random_range(-2.0..2.0), rng.random_range(0.1..3.0)]),
        Family::InverseGaussian => pv(&[rng.random_range(0.2..5.0), rng.random_range(0.05..2.0)]),
        Family::Gamma => pv(&[rng.random_range(0.2..5.0), rng.random_range(0.5..10.0)]),
        Family::Dagum => pv(&[
            rng.random_range(1.5..6.0),
            rng.random_range(0.5..5.0),
            rng.random_range(0.3..3.0),
        ]),
    }
}

#[test]
fn score_has_zero_mean_and_weight_equals_its_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let n = 40_000;
    for fam in ALL_FAMILIES {
        for _ in 0..3 {
            let theta = random_theta(fam, &mut rng);
            for k in 0..fam.n_params() {
                let scores: Vec<f64> = (0..n)
                    .map(|_| {
                        let y = fam.sample(&theta, &mut rng).unwrap();
                        fam.score(y, &theta, k).unwrap()
                    })
                    .collect();
                let mean = scores.iter().sum::<f64>() / n as f64;
                let sq: Vec<f64> = scores.iter().map(|s| s * s).collect();
                let m2 = sq.iter().sum::<f64>() / n as f64;
                let sd = (m2 - mean * mean).sqrt();
                assert!(mean.abs() < 3.5 * sd / (n as f64).sqrt(), "{fam} k={k} mean {mean}");
                let sd2 = (sq.iter().map(|v| (v - m2).powi(2)).sum::<f64>() / n as f64).sqrt();
                let w = fam.expected_weight(&theta, k).unwrap();
                assert!(w > 0.0);
                assert!((m2 - w).abs() < 3.5 * sd2 / (n as f64).sqrt(), "{fam} k={k}: E[s²]={m2} w={w}");
            }
        }
    }
}

#[test]
fn densities_normalize() {
    use crate::quadrature::{integrate_positive_half_line, QuadOptions};
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for fam in ALL_FAMILIES {
        for _ in 0..10 {
            let theta = random_theta(fam, &mut rng);
            let split = fam.quantile(0.5, &theta).unwrap();
            let total = integrate_positive_half_line(|y| fam.density_or_zero(y, &theta), split, QuadOptions::default())
                .unwrap();
            assert!((total - 1.0).abs() < 1e-6, "{fam} {:?}: {total}", theta);
        }
    }
}

#[test]
fn response_clamps_extreme_predictors() {
    let (theta, clamps) = Family::Gamma.params_from_eta(&[40.0, -45.0]);
    assert_eq!(clamps, 2);
    assert_eq!(theta[0], 30f64.exp());
    let (theta, clamps) = Family::LogNormal.params_from_eta(&[40.0, 0.0]);
    assert_eq!(clamps, 0);
    assert_eq!(theta[0], 40.0);
}

#[test]
fn family_names_parse() {
    for fam in ALL_FAMILIES {
        assert_eq!(fam.name().parse::<Family>().unwrap(), fam);
    }
    assert!("weibull".parse::<Family>().is_err());
}
