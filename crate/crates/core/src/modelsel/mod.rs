//! Model choice and predictive evaluation: DIC, quantile residuals, proper
//! scoring rules and k-fold cross-validation.

mod cv;
mod dic;
mod residuals;
mod scores;

pub use cv::{assign_folds, cross_validate, CvOptions, FoldScores, ScoreReport};
pub use dic::{deviance, dic, pointwise_deviance, DicResult};
pub use residuals::{
    ks_critical, ks_statistic, ks_uniform, pit_values, qq_pairs, quantile_residuals, QuantileResiduals, PIT_CLAMP,
};
pub use scores::{
    crps_alpha_contributions, integrated_squared_density, score_crps, score_crps_quantile, score_log,
    score_observation, score_quadratic, score_set, score_spherical, ObservationScores, Predictive, PredictiveSet,
    ScoreSummary, CRPS_NODES,
};

#[cfg(test)]
mod tests;
