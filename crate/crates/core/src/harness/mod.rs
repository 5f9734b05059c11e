//! Scoring, the five-model comparison and the lookback sweep.

mod experiment;
mod metric;
mod report;
mod trained;

pub use experiment::{
    cell_seed, compare_all, evaluate_model, evaluate_predictor, fit_model, lookback_sweep, prepare, sweep_argmin, write_sweep_csv,
    ExperimentConfig, ModelKind, Prepared,
};
pub use metric::{mean_std, relative_error, ZERO_FLOW_GUARD};
pub use report::{EvalReport, ModelScores, RunMetadata};
pub use trained::TrainedModel;
