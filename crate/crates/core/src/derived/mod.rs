//! Derived distributional quantities: moments, Gini coefficients,
//! quantiles, posterior-mean densities and credible bands.

mod bands;
mod curves;
mod moments;

pub use bands::{pointwise_band, simultaneous_band, summarize_scalar, Band, CurveSamples, DerivedSummary};
pub use curves::{
    default_density_grid, derived_samples, effect_samples, posterior_mean_density, DensityCurve, DerivedQuantity,
    EffectSamples, DENSITY_GRID_POINTS,
};
pub use moments::{
    dagum_gini, dagum_moments, dagum_raw_moment, family_moments_gini, lorenz_gini_mc, DistributionSummary, MonteCarloGini,
};
