//! Convolutional regressor over a lookback window.
//!
//! Each kernel spans the full feature width and slides along the day axis.
//! A bank groups all kernels of one height; with the default configuration
//! there are three banks (heights 3, 5, 7) of 100 channels each. Every
//! channel is ReLU-activated, max pooled, and the pooled values of all banks
//! are concatenated into one feature vector that feeds a linear head.

use crate::model::{glorot_bound, NeuralRegressor};
use crate::numcore::{axpy, dot};
use crate::{Error, Matrix, Result, SeededRng};

/// One convolution kernel: `weights` is `height x features`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvKernel {
    pub weights: Matrix,
    pub bias: f64,
}

impl ConvKernel {
    pub fn height(&self) -> usize {
        self.weights.rows()
    }
}

/// Number of full windows of `window` entries stepping by `stride` over
/// `len` entries; `None` if not even one fits.
pub fn window_count(len: usize, window: usize, stride: usize) -> Option<usize> {
    if stride == 0 || window == 0 || window > len {
        return None;
    }
    Some((len - window) / stride + 1)
}

/// Length of one pooled channel for an `n`-day input: convolution output
/// length `floor((n - h) / conv_stride) + 1`, then pooled length
/// `floor((len - pool_h) / pool_stride) + 1`. Trailing partial windows are
/// dropped at both stages.
pub fn pooled_len(n: usize, h: usize, conv_stride: usize, pool_h: usize, pool_stride: usize) -> Option<usize> {
    let conv = window_count(n, h, conv_stride)?;
    window_count(conv, pool_h, pool_stride)
}

#[inline]
fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// ReLU feature map of one kernel over `x`.
pub fn conv_forward(x: &Matrix, kernel: &ConvKernel, stride: usize) -> Result<Vec<f64>> {
    if stride == 0 {
        return Err(Error::argument("convolution stride must be at least 1"));
    }
    if kernel.weights.cols() != x.cols() {
        return Err(Error::shape(format!(
            "kernel width {} does not match input width {}",
            kernel.weights.cols(),
            x.cols()
        )));
    }
    let h = kernel.height();
    let positions = window_count(x.rows(), h, stride)
        .ok_or_else(|| Error::shape(format!("input has {} days, kernel height is {h}", x.rows())))?;
    Ok((0..positions)
        .map(|p| relu(dot(kernel.weights.data(), x.rows_slice(p * stride, h)) + kernel.bias))
        .collect())
}

/// Max over windows of `height` entries stepping by `stride`.
pub fn max_pool(c: &[f64], height: usize, stride: usize) -> Result<Vec<f64>> {
    Ok(max_pool_argmax(c, height, stride)?.into_iter().map(|(v, _)| v).collect())
}

/// Like [`max_pool`], also returning the index of each maximum (first on ties).
pub fn max_pool_argmax(c: &[f64], height: usize, stride: usize) -> Result<Vec<(f64, usize)>> {
    if stride == 0 || height == 0 {
        return Err(Error::argument("pooling height and stride must be at least 1"));
    }
    let n = window_count(c.len(), height, stride)
        .ok_or_else(|| Error::shape(format!("pool height {height} exceeds feature length {}", c.len())))?;
    Ok((0..n)
        .map(|i| {
            let start = i * stride;
            let mut best = (c[start], start);
            for (j, &v) in c.iter().enumerate().skip(start + 1).take(height - 1) {
                if v > best.0 {
                    best = (v, j);
                }
            }
            best
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pooling {
    /// One maximum per channel over the whole feature map.
    Global,
    Window { height: usize, stride: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CnnConfig {
    pub input_features: usize,
    pub kernel_heights: Vec<usize>,
    pub channels_per_height: usize,
    pub conv_stride: usize,
    pub pooling: Pooling,
    /// Days per input window. Only binding for windowed pooling, where it
    /// fixes the fully-connected width.
    pub lookback: usize,
}

impl CnnConfig {
    /// Heights 3/5/7, 100 channels each, stride 1, global max pooling.
    pub fn standard(input_features: usize, lookback: usize) -> Self {
        Self {
            input_features,
            kernel_heights: vec![3, 5, 7],
            channels_per_height: 100,
            conv_stride: 1,
            pooling: Pooling::Global,
            lookback,
        }
    }

    pub fn total_channels(&self) -> usize {
        self.kernel_heights.len() * self.channels_per_height
    }

    fn pooled_per_channel(&self, height: usize, days: usize) -> Option<usize> {
        let conv = window_count(days, height, self.conv_stride)?;
        match self.pooling {
            Pooling::Global => Some(1),
            Pooling::Window { height: ph, stride: ps } => window_count(conv, ph, ps),
        }
    }

    /// Width of the fused feature vector.
    pub fn feature_width(&self) -> Result<usize> {
        self.kernel_heights.iter().try_fold(0, |acc, &h| {
            self.pooled_per_channel(h, self.lookback)
                .map(|np| acc + np * self.channels_per_height)
                .ok_or_else(|| {
                    Error::shape(format!(
                        "kernel height {h} with {:?} does not fit a {}-day window",
                        self.pooling, self.lookback
                    ))
                })
        })
    }

    fn validate(&self) -> Result<()> {
        if self.input_features == 0 || self.channels_per_height == 0 || self.kernel_heights.is_empty() {
            return Err(Error::argument("CNN needs at least one feature, one kernel height and one channel"));
        }
        if self.conv_stride == 0 {
            return Err(Error::argument("convolution stride must be at least 1"));
        }
        if let Some(&h) = self.kernel_heights.iter().find(|&&h| h == 0 || h > self.lookback) {
            return Err(Error::argument(format!(
                "kernel height {h} must be between 1 and the lookback {}",
                self.lookback
            )));
        }
        self.feature_width().map(|_| ())
    }
}

/// All kernels of one height. Row `c` of `weights` is channel `c`'s kernel
/// flattened row-major (`height * features` values); `bias` is `channels x 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvBank {
    pub height: usize,
    pub weights: Matrix,
    pub bias: Matrix,
}

impl ConvBank {
    pub fn channels(&self) -> usize {
        self.weights.rows()
    }

    pub fn kernel(&self, channel: usize) -> ConvKernel {
        let features = self.weights.cols() / self.height;
        ConvKernel {
            weights: Matrix::new(self.height, features, self.weights.row(channel).to_vec())
                .expect("bank rows hold height*features values"),
            bias: self.bias.get(channel, 0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub banks: Vec<ConvBank>,
    /// `1 x feature_width`
    pub fc_weights: Matrix,
    /// `1 x 1`
    pub fc_bias: Matrix,
}

/// Forward intermediates for one window.
#[derive(Clone, Debug)]
pub struct CnnTrace {
    input: Matrix,
    /// Per bank, channel-major pre-activations (`channels * positions`).
    pre_activations: Vec<Vec<f64>>,
    positions: Vec<usize>,
    /// Fused feature vector and, for each entry, the conv position it came from.
    features: Vec<f64>,
    argmax: Vec<usize>,
}

impl CnnTrace {
    pub fn features(&self) -> &[f64] {
        &self.features
    }
}

impl CnnModel {
    /// All weights and biases zero.
    pub fn zeros(config: CnnConfig) -> Result<Self> {
        config.validate()?;
        let d = config.input_features;
        let banks = config
            .kernel_heights
            .iter()
            .map(|&h| ConvBank {
                height: h,
                weights: Matrix::zeros(config.channels_per_height, h * d),
                bias: Matrix::zeros(config.channels_per_height, 1),
            })
            .collect();
        let width = config.feature_width()?;
        Ok(Self { config, banks, fc_weights: Matrix::zeros(1, width), fc_bias: Matrix::zeros(1, 1) })
    }

    /// Uniform Glorot initialization of all weights; biases zero.
    pub fn init(config: CnnConfig, rng: &mut SeededRng) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let channels = model.config.channels_per_height;
        for bank in &mut model.banks {
            let fan_in = bank.weights.cols();
            bank.weights = Matrix::uniform(rng, channels, fan_in, glorot_bound(fan_in, channels))?;
        }
        let width = model.fc_weights.cols();
        model.fc_weights = Matrix::uniform(rng, 1, width, glorot_bound(width, 1))?;
        Ok(model)
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.config.input_features {
            return Err(Error::shape(format!(
                "input has {} features, model expects {}",
                x.cols(),
                self.config.input_features
            )));
        }
        if matches!(self.config.pooling, Pooling::Window { .. }) && x.rows() != self.config.lookback {
            return Err(Error::shape(format!(
                "windowed pooling was sized for {} days, input has {}",
                self.config.lookback,
                x.rows()
            )));
        }
        Ok(())
    }

    fn pool_params(&self, conv_len: usize) -> (usize, usize) {
        match self.config.pooling {
            Pooling::Global => (conv_len, 1),
            Pooling::Window { height, stride } => (height, stride),
        }
    }
}

impl NeuralRegressor for CnnModel {
    type Trace = CnnTrace;

    fn kind(&self) -> &'static str {
        "cnn"
    }

    fn predict(&self, x: &Matrix) -> Result<f64> {
        Ok(self.forward_trace(x)?.0)
    }

    fn forward_trace(&self, x: &Matrix) -> Result<(f64, CnnTrace)> {
        self.check_input(x)?;
        let stride = self.config.conv_stride;
        let mut pre_activations = Vec::with_capacity(self.banks.len());
        let mut positions = Vec::with_capacity(self.banks.len());
        let mut features = Vec::with_capacity(self.fc_weights.cols());
        let mut argmax = Vec::with_capacity(self.fc_weights.cols());
        let mut activated = Vec::new();
        for bank in &self.banks {
            let h = bank.height;
            let n_pos = window_count(x.rows(), h, stride)
                .ok_or_else(|| Error::shape(format!("input has {} days, kernel height is {h}", x.rows())))?;
            let (pool_h, pool_s) = self.pool_params(n_pos);
            let mut pre = Vec::with_capacity(bank.channels() * n_pos);
            for c in 0..bank.channels() {
                let w = bank.weights.row(c);
                let b = bank.bias.get(c, 0);
                let start = pre.len();
                pre.extend((0..n_pos).map(|p| dot(w, x.rows_slice(p * stride, h)) + b));
                activated.clear();
                activated.extend(pre[start..].iter().map(|&z| relu(z)));
                for (v, at) in max_pool_argmax(&activated, pool_h, pool_s)? {
                    features.push(v);
                    argmax.push(at);
                }
            }
            pre_activations.push(pre);
            positions.push(n_pos);
        }
        if features.len() != self.fc_weights.cols() {
            return Err(Error::shape(format!(
                "fused feature width {} does not match head width {}",
                features.len(),
                self.fc_weights.cols()
            )));
        }
        let y = dot(self.fc_weights.data(), &features) + self.fc_bias.get(0, 0);
        Ok((y, CnnTrace { input: x.clone(), pre_activations, positions, features, argmax }))
    }

    fn backward_into(&self, trace: &CnnTrace, upstream: f64, grads: &mut [Matrix]) -> Result<()> {
        let expected = 2 * self.banks.len() + 2;
        if grads.len() != expected {
            return Err(Error::shape(format!("expected {expected} gradient tensors, got {}", grads.len())));
        }
        if trace.features.len() != self.fc_weights.cols() {
            return Err(Error::Usage("trace was recorded by a different model".into()));
        }
        let (bank_grads, head_grads) = grads.split_at_mut(2 * self.banks.len());
        axpy(upstream, &trace.features, head_grads[0].data_mut());
        head_grads[1].data_mut()[0] += upstream;

        let stride = self.config.conv_stride;
        let x = &trace.input;
        let mut f = 0;
        for (b, bank) in self.banks.iter().enumerate() {
            let n_pos = trace.positions[b];
            let (pool_h, pool_s) = self.pool_params(n_pos);
            let per_channel = window_count(n_pos, pool_h, pool_s).unwrap_or(0);
            let pre = &trace.pre_activations[b];
            let (wg, bg) = bank_grads[2 * b..2 * b + 2].split_at_mut(1);
            for c in 0..bank.channels() {
                for _ in 0..per_channel {
                    let pos = trace.argmax[f];
                    let d_feature = upstream * self.fc_weights.data()[f];
                    f += 1;
                    // ReLU passes gradient only where the pre-activation was positive.
                    if pre[c * n_pos + pos] <= 0.0 || d_feature == 0.0 {
                        continue;
                    }
                    axpy(d_feature, x.rows_slice(pos * stride, bank.height), wg[0].row_mut(c));
                    bg[0].data_mut()[c] += d_feature;
                }
            }
        }
        Ok(())
    }

    fn params(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::with_capacity(2 * self.banks.len() + 2);
        for bank in &self.banks {
            out.push((format!("conv.h{}.weight", bank.height), &bank.weights));
            out.push((format!("conv.h{}.bias", bank.height), &bank.bias));
        }
        out.push(("fc.weight".to_string(), &self.fc_weights));
        out.push(("fc.bias".to_string(), &self.fc_bias));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::with_capacity(2 * self.banks.len() + 2);
        for bank in &mut self.banks {
            out.push(&mut bank.weights);
            out.push(&mut bank.bias);
        }
        out.push(&mut self.fc_weights);
        out.push(&mut self.fc_bias);
        out
    }
}
