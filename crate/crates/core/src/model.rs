//! Common surface of the two neural regressors.
//!
//! A model maps one lookback window (`Matrix`, days x features) to a scalar
//! flow prediction in normalized units. Training needs a forward pass that
//! records intermediates and a backward pass that turns an upstream
//! derivative into one gradient tensor per parameter tensor.

use crate::{Error, Matrix, Result};

pub trait NeuralRegressor: Clone + Send + Sync {
    /// Intermediate values recorded by [`forward_trace`](Self::forward_trace).
    type Trace;

    /// Short identifier written into model files (`cnn`, `lstm`).
    fn kind(&self) -> &'static str;

    fn predict(&self, x: &Matrix) -> Result<f64>;

    fn forward_trace(&self, x: &Matrix) -> Result<(f64, Self::Trace)>;

    /// Adds `upstream * d(prediction)/d(param)` into `grads`, which must be
    /// laid out like [`params`](Self::params).
    fn backward_into(&self, trace: &Self::Trace, upstream: f64, grads: &mut [Matrix]) -> Result<()>;

    /// Named parameter tensors in a fixed order.
    fn params(&self) -> Vec<(String, &Matrix)>;

    fn params_mut(&mut self) -> Vec<&mut Matrix>;

    fn zero_grads(&self) -> Vec<Matrix> {
        self.params().iter().map(|(_, m)| Matrix::zeros(m.rows(), m.cols())).collect()
    }

    fn backward(&self, trace: &Self::Trace, upstream: f64) -> Result<Vec<Matrix>> {
        let mut grads = self.zero_grads();
        self.backward_into(trace, upstream, &mut grads)?;
        Ok(grads)
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|(_, m)| m.len()).sum()
    }
}

/// One forward/backward round on a borrowed model. Calling
/// [`backward`](GradSession::backward) before a forward pass is a usage error.
pub struct GradSession<'m, M: NeuralRegressor> {
    model: &'m M,
    trace: Option<M::Trace>,
}

impl<'m, M: NeuralRegressor> GradSession<'m, M> {
    pub fn new(model: &'m M) -> Self {
        Self { model, trace: None }
    }

    pub fn forward(&mut self, x: &Matrix) -> Result<f64> {
        let (y, trace) = self.model.forward_trace(x)?;
        self.trace = Some(trace);
        Ok(y)
    }

    pub fn backward(&self, upstream: f64) -> Result<Vec<Matrix>> {
        let trace = self
            .trace
            .as_ref()
            .ok_or_else(|| Error::Usage("backward called before any forward pass".into()))?;
        self.model.backward(trace, upstream)
    }
}

/// Glorot-style uniform bound `sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
