#![allow(dead_code)]

use distreg_core::design::TermDef;

pub fn pspline(column: &str, knots: usize) -> TermDef {
    TermDef::Pspline {
        column: column.into(),
        degree: 3,
        knots,
        order: 2,
        label: None,
        a: None,
        b: None,
    }
}

pub fn linear(column: &str) -> TermDef {
    TermDef::Linear { column: column.into() }
}

pub fn random(column: &str) -> TermDef {
    TermDef::Random {
        column: column.into(),
        label: None,
        a: None,
        b: None,
    }
}

pub fn mrf(column: &str) -> TermDef {
    TermDef::Mrf {
        column: column.into(),
        label: None,
        a: None,
        b: None,
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Monte Carlo standard error of the mean from `batches` batch means.
pub fn batch_se(x: &[f64], batches: usize) -> f64 {
    let size = x.len() / batches;
    let means: Vec<f64> = x.chunks(size).take(batches).map(mean).collect();
    sd(&means) / (batches as f64).sqrt()
}

/// Kolmogorov–Smirnov distance of a sample to a continuous cdf.
pub fn ks<F: Fn(f64) -> f64>(x: &[f64], cdf: F) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let f = cdf(xi);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at the 1% level.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}
