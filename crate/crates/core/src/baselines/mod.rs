//! Classical comparison models trained on flattened lookback windows.

mod ensemble;
mod linear;
mod tree;

pub use ensemble::{gbr_fit, rf_fit, Ensemble, EnsembleKind, GbrParams, RfParams};
pub use linear::{ols_fit, LinearModel};
pub use tree::{tree_fit, tree_fit_with, Node, RegressionTree, TreeParams};

use crate::datapipe::Sample;
use crate::{Matrix, Result};

/// Row-major concatenation of a `days x features` window: day 1's features,
/// then day 2's, and so on.
pub fn flatten_window(x: &Matrix) -> Vec<f64> {
    x.data().to_vec()
}

/// Stacks flattened windows into an `n x (days * features)` design matrix
/// and returns it with the targets.
pub fn design_matrix(samples: &[Sample]) -> Result<(Matrix, Vec<f64>)> {
    let rows: Vec<Vec<f64>> = samples.iter().map(|s| flatten_window(&s.x)).collect();
    let y = samples.iter().map(|s| s.y).collect();
    Ok((Matrix::from_rows(&rows)?, y))
}
