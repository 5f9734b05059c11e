//! Stacked, optionally bidirectional LSTM regressor.
//!
//! Layer 1 reads the daily feature rows directly. Every deeper layer reads
//! the previous layer's per-day output through a transfer matrix and bias.
//! After the last layer each output coordinate is max pooled over time and
//! a linear head turns the pooled vector into the flow prediction.
//! Gradients come from backpropagation through time over all layers,
//! directions, transfer matrices and the head.

use crate::model::{glorot_bound, NeuralRegressor};
use crate::numcore::{axpy, dot};
use crate::{Error, Matrix, Result, SeededRng};

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Weights of one LSTM cell. Each gate weight is `hidden x (hidden + input)`
/// and multiplies the concatenation `[h_{t-1}, x_t]`; biases are `hidden x 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmCellParams {
    pub w_input: Matrix,
    pub w_forget: Matrix,
    pub w_cell: Matrix,
    pub w_output: Matrix,
    pub b_input: Matrix,
    pub b_forget: Matrix,
    pub b_cell: Matrix,
    pub b_output: Matrix,
}

impl LstmCellParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let w = || Matrix::zeros(hidden, hidden + input);
        let b = || Matrix::zeros(hidden, 1);
        Self {
            w_input: w(),
            w_forget: w(),
            w_cell: w(),
            w_output: w(),
            b_input: b(),
            b_forget: b(),
            b_cell: b(),
            b_output: b(),
        }
    }

    /// Glorot-uniform gate weights, zero biases except the forget gate at +1.
    pub fn init(input: usize, hidden: usize, rng: &mut SeededRng) -> Result<Self> {
        let bound = glorot_bound(hidden + input, hidden);
        let mut p = Self::zeros(input, hidden);
        for w in [&mut p.w_input, &mut p.w_forget, &mut p.w_cell, &mut p.w_output] {
            *w = Matrix::uniform(rng, hidden, hidden + input, bound)?;
        }
        p.b_forget.fill(1.0);
        Ok(p)
    }

    pub fn hidden(&self) -> usize {
        self.w_input.rows()
    }

    pub fn input(&self) -> usize {
        self.w_input.cols() - self.w_input.rows()
    }

    fn gates(&self) -> [(&Matrix, &Matrix); 4] {
        [
            (&self.w_input, &self.b_input),
            (&self.w_forget, &self.b_forget),
            (&self.w_cell, &self.b_cell),
            (&self.w_output, &self.b_output),
        ]
    }

    fn tensors(&self) -> [&Matrix; 8] {
        [
            &self.w_input,
            &self.w_forget,
            &self.w_cell,
            &self.w_output,
            &self.b_input,
            &self.b_forget,
            &self.b_cell,
            &self.b_output,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Matrix; 8] {
        [
            &mut self.w_input,
            &mut self.w_forget,
            &mut self.w_cell,
            &mut self.w_output,
            &mut self.b_input,
            &mut self.b_forget,
            &mut self.b_cell,
            &mut self.b_output,
        ]
    }
}

const CELL_TENSOR_NAMES: [&str; 8] =
    ["w_input", "w_forget", "w_cell", "w_output", "b_input", "b_forget", "b_cell", "b_output"];

#[derive(Clone, Debug, PartialEq)]
pub struct LstmState {
    pub cell: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self { cell: vec![0.0; hidden], hidden: vec![0.0; hidden] }
    }
}

/// Gate activations and states of one step, kept for the backward pass.
#[derive(Clone, Debug)]
struct StepCache {
    /// `[h_{t-1}, x_t]`
    joint: Vec<f64>,
    input_gate: Vec<f64>,
    forget_gate: Vec<f64>,
    candidate: Vec<f64>,
    output_gate: Vec<f64>,
    prev_cell: Vec<f64>,
    cell_tanh: Vec<f64>,
}

fn step_cached(params: &LstmCellParams, x_t: &[f64], prev: &LstmState) -> Result<(LstmState, StepCache)> {
    let hidden = params.hidden();
    if x_t.len() != params.input() {
        return Err(Error::shape(format!("step input has {} values, cell expects {}", x_t.len(), params.input())));
    }
    if prev.hidden.len() != hidden || prev.cell.len() != hidden {
        return Err(Error::shape(format!(
            "previous state has widths {}/{}, cell hidden size is {hidden}",
            prev.hidden.len(),
            prev.cell.len()
        )));
    }
    let mut joint = Vec::with_capacity(params.w_input.cols());
    joint.extend_from_slice(&prev.hidden);
    joint.extend_from_slice(x_t);

    let [(wi, bi), (wf, bf), (wc, bc), (wo, bo)] = params.gates();
    let affine = |w: &Matrix, b: &Matrix, k: usize| dot(w.row(k), &joint) + b.data()[k];
    let input_gate: Vec<f64> = (0..hidden).map(|k| sigmoid(affine(wi, bi, k))).collect();
    let forget_gate: Vec<f64> = (0..hidden).map(|k| sigmoid(affine(wf, bf, k))).collect();
    let candidate: Vec<f64> = (0..hidden).map(|k| affine(wc, bc, k).tanh()).collect();
    let output_gate: Vec<f64> = (0..hidden).map(|k| sigmoid(affine(wo, bo, k))).collect();

    let cell: Vec<f64> =
        (0..hidden).map(|k| forget_gate[k] * prev.cell[k] + input_gate[k] * candidate[k]).collect();
    let cell_tanh: Vec<f64> = cell.iter().map(|c| c.tanh()).collect();
    let h: Vec<f64> = (0..hidden).map(|k| output_gate[k] * cell_tanh[k]).collect();

    let cache = StepCache {
        joint,
        input_gate,
        forget_gate,
        candidate,
        output_gate,
        prev_cell: prev.cell.clone(),
        cell_tanh,
    };
    Ok((LstmState { cell, hidden: h }, cache))
}

/// One gated update: input, forget and output gates are sigmoids of an
/// affine map of `[h_{t-1}, x_t]`, the candidate is a tanh of another;
/// `C_t = F * C_{t-1} + I * candidate`, `h_t = O * tanh(C_t)`.
pub fn lstm_cell_step(params: &LstmCellParams, x_t: &[f64], prev: &LstmState) -> Result<LstmState> {
    step_cached(params, x_t, prev).map(|(s, _)| s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Ordered time indices visited by a direction.
fn visit_order(len: usize, direction: Direction) -> Box<dyn Iterator<Item = usize>> {
    match direction {
        Direction::Forward => Box::new(0..len),
        Direction::Backward => Box::new((0..len).rev()),
    }
}

fn layer_cached(
    params: &LstmCellParams,
    inputs: &[Vec<f64>],
    direction: Direction,
) -> Result<(Vec<Vec<f64>>, Vec<StepCache>)> {
    if inputs.is_empty() {
        return Err(Error::argument("LSTM layer needs a non-empty sequence"));
    }
    let mut state = LstmState::zeros(params.hidden());
    let mut outputs = vec![Vec::new(); inputs.len()];
    let mut caches: Vec<Option<StepCache>> = vec![None; inputs.len()];
    for t in visit_order(inputs.len(), direction) {
        let (next, cache) = step_cached(params, &inputs[t], &state)?;
        outputs[t] = next.hidden.clone();
        caches[t] = Some(cache);
        state = next;
    }
    Ok((outputs, caches.into_iter().map(|c| c.expect("every step visited")).collect()))
}

/// Runs a cell over the whole sequence from a zero state. Outputs stay
/// aligned with input positions: for [`Direction::Backward`], `out[t]` is the
/// hidden state after consuming `inputs[len-1..=t]`.
pub fn lstm_layer_forward(params: &LstmCellParams, inputs: &[Vec<f64>], direction: Direction) -> Result<Vec<Vec<f64>>> {
    layer_cached(params, inputs, direction).map(|(o, _)| o)
}

/// BPTT through one direction of one layer. `d_out[t]` is the loss gradient
/// w.r.t. `h_t`. Accumulates parameter gradients into `grads` (ordered like
/// [`LstmCellParams::tensors`]) and, if `d_inputs` is given, adds the input
/// gradients into it.
fn layer_backward(
    params: &LstmCellParams,
    caches: &[StepCache],
    d_out: &[Vec<f64>],
    direction: Direction,
    grads: &mut [Matrix],
    mut d_inputs: Option<&mut [Vec<f64>]>,
) {
    let hidden = params.hidden();
    let mut dh_next = vec![0.0; hidden];
    let mut dc_next = vec![0.0; hidden];
    let mut d_pre = [vec![0.0; hidden], vec![0.0; hidden], vec![0.0; hidden], vec![0.0; hidden]];
    let mut d_joint = vec![0.0; params.w_input.cols()];
    let weights = [&params.w_input, &params.w_forget, &params.w_cell, &params.w_output];

    // Reverse of the order the forward pass visited.
    let order: Vec<usize> = visit_order(caches.len(), direction).collect();
    for &t in order.iter().rev() {
        let c = &caches[t];
        for k in 0..hidden {
            let dh = d_out[t][k] + dh_next[k];
            let d_o = dh * c.cell_tanh[k];
            let dc = dh * c.output_gate[k] * (1.0 - c.cell_tanh[k] * c.cell_tanh[k]) + dc_next[k];
            let d_i = dc * c.candidate[k];
            let d_g = dc * c.input_gate[k];
            let d_f = dc * c.prev_cell[k];
            dc_next[k] = dc * c.forget_gate[k];
            d_pre[0][k] = d_i * c.input_gate[k] * (1.0 - c.input_gate[k]);
            d_pre[1][k] = d_f * c.forget_gate[k] * (1.0 - c.forget_gate[k]);
            d_pre[2][k] = d_g * (1.0 - c.candidate[k] * c.candidate[k]);
            d_pre[3][k] = d_o * c.output_gate[k] * (1.0 - c.output_gate[k]);
        }
        // Only the recurrent part of the joint gradient is needed when the
        // caller does not want input gradients.
        let needed = if d_inputs.is_some() { d_joint.len() } else { hidden };
        d_joint[..needed].fill(0.0);
        for (g, w) in weights.iter().enumerate() {
            let (wg, bg) = grads.split_at_mut(4);
            for k in 0..hidden {
                let d = d_pre[g][k];
                if d == 0.0 {
                    continue;
                }
                axpy(d, &c.joint, wg[g].row_mut(k));
                bg[g].data_mut()[k] += d;
                axpy(d, &w.row(k)[..needed], &mut d_joint[..needed]);
            }
        }
        dh_next.copy_from_slice(&d_joint[..hidden]);
        if let Some(d_in) = d_inputs.as_deref_mut() {
            axpy(1.0, &d_joint[hidden..], &mut d_in[t]);
        }
    }
}

/// Width of the recurrent state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HiddenSize {
    /// Fused per-day output width; split evenly across directions.
    Total(usize),
    PerDirection(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmConfig {
    pub input_features: usize,
    pub hidden: HiddenSize,
    pub bidirectional: bool,
    pub layers: usize,
}

impl LstmConfig {
    /// One bidirectional layer whose fused output is 300 wide (150 per
    /// direction), matching the CNN's 300-wide head.
    pub fn standard(input_features: usize) -> Self {
        Self { input_features, hidden: HiddenSize::Total(300), bidirectional: true, layers: 1 }
    }

    pub fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    pub fn hidden_per_direction(&self) -> Result<usize> {
        let h = match self.hidden {
            HiddenSize::PerDirection(h) => h,
            HiddenSize::Total(total) => {
                if total % self.directions() != 0 {
                    return Err(Error::argument(format!(
                        "total hidden size {total} does not split across {} directions",
                        self.directions()
                    )));
                }
                total / self.directions()
            }
        };
        if h == 0 {
            return Err(Error::argument("hidden size must be positive"));
        }
        Ok(h)
    }

    pub fn output_width(&self) -> Result<usize> {
        Ok(self.hidden_per_direction()? * self.directions())
    }

    fn validate(&self) -> Result<()> {
        if self.input_features == 0 || self.layers == 0 {
            return Err(Error::argument("LSTM needs at least one input feature and one layer"));
        }
        self.hidden_per_direction().map(|_| ())
    }
}

/// Affine map from the previous layer's per-day output into this layer's
/// input: `u_t = out_t . weight + bias`, with weight `prev_width x input`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transfer {
    pub weight: Matrix,
    pub bias: Matrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    /// `None` for the first layer.
    pub transfer: Option<Transfer>,
    pub forward: LstmCellParams,
    pub backward: Option<LstmCellParams>,
}

impl LstmLayer {
    fn cells(&self) -> impl Iterator<Item = (Direction, &LstmCellParams)> {
        std::iter::once((Direction::Forward, &self.forward))
            .chain(self.backward.as_ref().map(|b| (Direction::Backward, b)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LstmNetwork {
    pub config: LstmConfig,
    pub layers: Vec<LstmLayer>,
    /// `1 x output_width`
    pub head_weights: Matrix,
    /// `1 x 1`
    pub head_bias: Matrix,
}

struct LayerTrace {
    inputs: Vec<Vec<f64>>,
    caches: Vec<Vec<StepCache>>,
    outputs: Vec<Vec<f64>>,
}

pub struct LstmTrace {
    layers: Vec<LayerTrace>,
    pooled: Vec<f64>,
    argmax: Vec<usize>,
}

impl LstmNetwork {
    pub fn zeros(config: LstmConfig) -> Result<Self> {
        Self::build(config, None)
    }

    pub fn init(config: LstmConfig, rng: &mut SeededRng) -> Result<Self> {
        Self::build(config, Some(rng))
    }

    fn build(config: LstmConfig, mut rng: Option<&mut SeededRng>) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_per_direction()?;
        let width = config.output_width()?;
        let mut cell = |input: usize| -> Result<LstmCellParams> {
            match rng.as_deref_mut() {
                Some(r) => LstmCellParams::init(input, h, r),
                None => Ok(LstmCellParams::zeros(input, h)),
            }
        };
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let (transfer, input) = if l == 0 {
                (None, config.input_features)
            } else {
                (Some(Transfer { weight: Matrix::zeros(width, h), bias: Matrix::zeros(1, h) }), h)
            };
            let forward = cell(input)?;
            let backward = if config.bidirectional { Some(cell(input)?) } else { None };
            layers.push(LstmLayer { transfer, forward, backward });
        }
        let mut head_weights = Matrix::zeros(1, width);
        if let Some(r) = rng {
            for layer in &mut layers {
                if let Some(t) = &mut layer.transfer {
                    t.weight = Matrix::uniform(r, width, h, glorot_bound(width, h))?;
                }
            }
            head_weights = Matrix::uniform(r, 1, width, glorot_bound(width, 1))?;
        }
        Ok(Self { config, layers, head_weights, head_bias: Matrix::zeros(1, 1) })
    }

    fn rows_of(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        if x.cols() != self.config.input_features {
            return Err(Error::shape(format!(
                "layer 1 expects {} input features, got {}",
                self.config.input_features,
                x.cols()
            )));
        }
        Ok((0..x.rows()).map(|t| x.row(t).to_vec()).collect())
    }

    fn run(&self, x: &Matrix) -> Result<Vec<LayerTrace>> {
        let mut prev_out = self.rows_of(x)?;
        let mut traces = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let inputs = match &layer.transfer {
                None => prev_out,
                Some(t) => {
                    let width = prev_out[0].len();
                    if t.weight.rows() != width {
                        return Err(Error::shape(format!(
                            "layer {}: transfer expects {} inputs, previous layer emits {width}",
                            l + 1,
                            t.weight.rows()
                        )));
                    }
                    prev_out
                        .iter()
                        .map(|o| {
                            let mut u = t.bias.data().to_vec();
                            for (k, &v) in o.iter().enumerate() {
                                axpy(v, t.weight.row(k), &mut u);
                            }
                            u
                        })
                        .collect()
                }
            };
            if inputs[0].len() != layer.forward.input() {
                return Err(Error::shape(format!(
                    "layer {}: cell expects {} inputs, got {}",
                    l + 1,
                    layer.forward.input(),
                    inputs[0].len()
                )));
            }
            let mut outputs: Vec<Vec<f64>> = vec![Vec::new(); inputs.len()];
            let mut caches = Vec::with_capacity(2);
            for (dir, params) in layer.cells() {
                let (out, cache) = layer_cached(params, &inputs, dir)?;
                for (acc, o) in outputs.iter_mut().zip(out) {
                    acc.extend(o);
                }
                caches.push(cache);
            }
            prev_out = outputs.clone();
            traces.push(LayerTrace { inputs, caches, outputs });
        }
        Ok(traces)
    }

    /// Per-day output of the last layer (forward and backward hidden states
    /// concatenated when bidirectional).
    pub fn stacked_forward(&self, x: &Matrix) -> Result<Vec<Vec<f64>>> {
        let mut traces = self.run(x)?;
        Ok(traces.pop().expect("at least one layer").outputs)
    }
}

/// Coordinate-wise maximum over time with the (first) arg max of each.
pub fn temporal_max_pool(sequence: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    let width = sequence.first().map_or(0, Vec::len);
    let mut pooled = vec![f64::NEG_INFINITY; width];
    let mut argmax = vec![0; width];
    for (t, row) in sequence.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            if v > pooled[k] {
                pooled[k] = v;
                argmax[k] = t;
            }
        }
    }
    (pooled, argmax)
}

impl NeuralRegressor for LstmNetwork {
    type Trace = LstmTrace;

    fn kind(&self) -> &'static str {
        "lstm"
    }

    fn predict(&self, x: &Matrix) -> Result<f64> {
        Ok(self.forward_trace(x)?.0)
    }

    fn forward_trace(&self, x: &Matrix) -> Result<(f64, LstmTrace)> {
        let layers = self.run(x)?;
        let (pooled, argmax) = temporal_max_pool(&layers.last().expect("at least one layer").outputs);
        if pooled.len() != self.head_weights.cols() {
            return Err(Error::shape(format!(
                "pooled width {} does not match head width {}",
                pooled.len(),
                self.head_weights.cols()
            )));
        }
        let y = dot(self.head_weights.data(), &pooled) + self.head_bias.get(0, 0);
        Ok((y, LstmTrace { layers, pooled, argmax }))
    }

    fn backward_into(&self, trace: &LstmTrace, upstream: f64, grads: &mut [Matrix]) -> Result<()> {
        let expected = self.params().len();
        if grads.len() != expected {
            return Err(Error::shape(format!("expected {expected} gradient tensors, got {}", grads.len())));
        }
        if trace.layers.len() != self.layers.len() || trace.pooled.len() != self.head_weights.cols() {
            return Err(Error::Usage("trace was recorded by a different network".into()));
        }
        let n_head = grads.len() - 2;
        let (layer_grads, head_grads) = grads.split_at_mut(n_head);
        axpy(upstream, &trace.pooled, head_grads[0].data_mut());
        head_grads[1].data_mut()[0] += upstream;

        let steps = trace.layers[0].inputs.len();
        let width = self.head_weights.cols();
        // Gradient w.r.t. the last layer's per-day output: only arg max days.
        let mut d_out = vec![vec![0.0; width]; steps];
        for k in 0..width {
            d_out[trace.argmax[k]][k] += upstream * self.head_weights.data()[k];
        }

        let h = self.config.hidden_per_direction()?;
        let offsets = self.layer_grad_offsets();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let lt = &trace.layers[l];
            let want_inputs = l > 0;
            let mut d_inputs = vec![vec![0.0; layer.forward.input()]; steps];
            let mut g = offsets[l];
            if layer.transfer.is_some() {
                g += 2;
            }
            for (dir_idx, (dir, params)) in layer.cells().enumerate() {
                let d_dir: Vec<Vec<f64>> = d_out.iter().map(|d| d[dir_idx * h..(dir_idx + 1) * h].to_vec()).collect();
                layer_backward(
                    params,
                    &lt.caches[dir_idx],
                    &d_dir,
                    dir,
                    &mut layer_grads[g..g + 8],
                    want_inputs.then_some(d_inputs.as_mut_slice()),
                );
                g += 8;
            }
            if let Some(t) = &layer.transfer {
                let prev_out = &trace.layers[l - 1].outputs;
                let (tw, tb) = layer_grads[offsets[l]..offsets[l] + 2].split_at_mut(1);
                let mut d_prev = vec![vec![0.0; t.weight.rows()]; steps];
                for step in 0..steps {
                    let du = &d_inputs[step];
                    axpy(1.0, du, tb[0].data_mut());
                    for (k, &o) in prev_out[step].iter().enumerate() {
                        axpy(o, du, tw[0].row_mut(k));
                        d_prev[step][k] = dot(t.weight.row(k), du);
                    }
                }
                d_out = d_prev;
            }
        }
        Ok(())
    }

    fn params(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            if let Some(t) = &layer.transfer {
                out.push((format!("lstm.l{}.transfer.weight", l + 1), &t.weight));
                out.push((format!("lstm.l{}.transfer.bias", l + 1), &t.bias));
            }
            for (dir, params) in layer.cells() {
                let tag = match dir {
                    Direction::Forward => "fwd",
                    Direction::Backward => "bwd",
                };
                for (name, m) in CELL_TENSOR_NAMES.iter().zip(params.tensors()) {
                    out.push((format!("lstm.l{}.{tag}.{name}", l + 1), m));
                }
            }
        }
        out.push(("head.weight".to_string(), &self.head_weights));
        out.push(("head.bias".to_string(), &self.head_bias));
        out
    }

    fn params_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            if let Some(t) = &mut layer.transfer {
                out.push(&mut t.weight);
                out.push(&mut t.bias);
            }
            out.extend(layer.forward.tensors_mut());
            if let Some(b) = &mut layer.backward {
                out.extend(b.tensors_mut());
            }
        }
        out.push(&mut self.head_weights);
        out.push(&mut self.head_bias);
        out
    }
}

impl LstmNetwork {
    /// Index of each layer's first tensor in [`NeuralRegressor::params`].
    fn layer_grad_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut at = 0;
        for layer in &self.layers {
            offsets.push(at);
            at += if layer.transfer.is_some() { 2 } else { 0 } + 8 * layer.cells().count();
        }
        offsets
    }
}
