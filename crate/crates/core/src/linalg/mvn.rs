use rand::Rng;
use rand_distr::StandardNormal;

use super::{cholesky, SparsePrecision};
use crate::special::LN_SQRT_2PI;
use crate::{Error, Result};

fn check_dim(p: &SparsePrecision, v: &[f64], what: &str) -> Result<()> {
    if p.dim() == v.len() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(format!(
            "{what} has length {}, precision is {}x{}",
            v.len(),
            p.dim(),
            p.dim()
        )))
    }
}

/// Draws from N(mean, P⁻¹).
pub fn sample_mvn_precision<R: Rng + ?Sized>(
    mean: &[f64],
    p: &SparsePrecision,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let z: Vec<f64> = (0..p.dim()).map(|_| rng.sample(StandardNormal)).collect();
    sample_mvn_precision_with_noise(mean, p, &z)
}

/// Deterministic variant taking the standard-normal vector explicitly;
/// `z = 0` returns `mean`.
pub fn sample_mvn_precision_with_noise(mean: &[f64], p: &SparsePrecision, z: &[f64]) -> Result<Vec<f64>> {
    check_dim(p, mean, "mean")?;
    check_dim(p, z, "noise")?;
    let f = cholesky(p)?;
    Ok(f.whiten_inverse(mean, z))
}

/// log N(x | mean, P⁻¹) = ½ log det P − (D/2) log 2π − ½ (x − mean)' P (x − mean).
pub fn mvn_logdensity(x: &[f64], mean: &[f64], p: &SparsePrecision) -> Result<f64> {
    check_dim(p, x, "x")?;
    check_dim(p, mean, "mean")?;
    let f = cholesky(p)?;
    Ok(0.5 * f.log_det() - x.len() as f64 * LN_SQRT_2PI - 0.5 * f.mahalanobis(x, mean))
}
