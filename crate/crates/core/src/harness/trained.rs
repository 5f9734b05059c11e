use super::experiment::ModelKind;
use super::metric::relative_error;
use crate::baselines::{flatten_window, Ensemble, EnsembleKind, LinearModel};
use crate::convnet::{CnnConfig, CnnModel, Pooling};
use crate::datapipe::{make_windows, normalize_apply, DailyRecord, NormStats, Split, SplitMode};
use crate::model::NeuralRegressor;
use crate::modelfile::ModelFile;
use crate::recurrent::{HiddenSize, LstmConfig, LstmNetwork};
use crate::{Error, Matrix, Result};

fn row(values: &[f64]) -> Matrix {
    Matrix::row_vector(values).expect("fitted vectors are non-empty")
}

/// A fitted model of any kind. Inputs and outputs are normalized.
#[derive(Clone, Debug, PartialEq)]
pub enum TrainedModel {
    Linear(LinearModel),
    Ensemble(Ensemble),
    Cnn(CnnModel),
    Lstm(LstmNetwork),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Linear(_) => ModelKind::Lr,
            TrainedModel::Ensemble(e) => match e.kind {
                EnsembleKind::Gbr { .. } => ModelKind::Gbr,
                EnsembleKind::Rf => ModelKind::Rf,
            },
            TrainedModel::Cnn(_) => ModelKind::Cnn,
            TrainedModel::Lstm(_) => ModelKind::Lstm,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<f64> {
        match self {
            TrainedModel::Linear(m) => {
                let row = flatten_window(x);
                if row.len() != m.weights.len() {
                    return Err(Error::shape(format!("model expects {} inputs, got {}", m.weights.len(), row.len())));
                }
                Ok(m.predict(&row))
            }
            TrainedModel::Ensemble(e) => Ok(e.predict(&flatten_window(x))),
            TrainedModel::Cnn(m) => m.predict(x),
            TrainedModel::Lstm(m) => m.predict(x),
        }
    }

    /// Test relative error on `split` of `records`, normalized with stored
    /// statistics rather than refitted ones.
    pub fn score(&self, stats: &NormStats, records: &[DailyRecord], lookback: usize, split: &Split) -> Result<f64> {
        let raw = make_windows(records, lookback)?;
        if let Some(&bad) = split.test.iter().find(|&&i| i >= raw.len()) {
            return Err(Error::argument(format!("split index {bad} is out of range for {} windows", raw.len())));
        }
        let windows = make_windows(&normalize_apply(records, stats)?, lookback)?;
        let scale = stats.target_scale();
        let pred = split
            .test
            .iter()
            .map(|&i| self.predict(&windows.samples[i].x).map(|y| scale.restore(y)))
            .collect::<Result<Vec<_>>>()?;
        let real: Vec<f64> = split.test.iter().map(|&i| raw.samples[i].y).collect();
        relative_error(&pred, &real)
    }

    /// Model file holding the parameters, the normalization statistics and
    /// enough metadata to rebuild the windows.
    pub fn to_file(&self, stats: &NormStats, lookback: usize, seed: u64, split_mode: SplitMode) -> ModelFile {
        let mut file = ModelFile::default()
            .with_meta("kind", self.kind().name())
            .with_meta("lookback", lookback)
            .with_meta("seed", seed)
            .with_meta("split_mode", split_mode.as_str());
        match self {
            TrainedModel::Linear(m) => {
                file = file.with_meta("ridge_damped", m.ridge_damped);
                file.push_tensor("linear.weight", row(&m.weights));
                file.push_tensor("linear.intercept", Matrix::filled(1, 1, m.intercept));
            }
            TrainedModel::Ensemble(e) => file.ensemble = Some(e.to_text()),
            TrainedModel::Cnn(m) => {
                let c = &m.config;
                let heights: Vec<String> = c.kernel_heights.iter().map(|h| h.to_string()).collect();
                let pooling = match c.pooling {
                    Pooling::Global => "global".to_string(),
                    Pooling::Window { height, stride } => format!("window:{height}:{stride}"),
                };
                file = file
                    .with_meta("cnn.input_features", c.input_features)
                    .with_meta("cnn.kernel_heights", heights.join(","))
                    .with_meta("cnn.channels", c.channels_per_height)
                    .with_meta("cnn.conv_stride", c.conv_stride)
                    .with_meta("cnn.pooling", pooling)
                    .with_meta("cnn.lookback", c.lookback);
                file.push_params(m);
            }
            TrainedModel::Lstm(m) => {
                let c = &m.config;
                let per_direction = c.hidden_per_direction().expect("validated at construction");
                file = file
                    .with_meta("lstm.input_features", c.input_features)
                    .with_meta("lstm.hidden_per_direction", per_direction)
                    .with_meta("lstm.bidirectional", c.bidirectional)
                    .with_meta("lstm.layers", c.layers);
                file.push_params(m);
            }
        }
        file.push_tensor("norm.feature_mean", row(&stats.feature_mean));
        file.push_tensor("norm.feature_std", row(&stats.feature_std));
        file.push_tensor("norm.target", row(&[stats.target_mean, stats.target_std]));
        file
    }

    pub fn from_file(file: &ModelFile) -> Result<(Self, NormStats)> {
        let kind = ModelKind::parse(file.require_meta("kind")?).map_err(|e| Error::Parse(e.to_string()))?;
        let model = match kind {
            ModelKind::Lr => TrainedModel::Linear(LinearModel {
                weights: file.tensor("linear.weight")?.data().to_vec(),
                intercept: file.tensor("linear.intercept")?.data()[0],
                ridge_damped: file.meta_parsed("ridge_damped")?,
            }),
            ModelKind::Gbr | ModelKind::Rf => {
                let text = file.ensemble.as_deref().ok_or_else(|| Error::Parse("model file has no ensemble".into()))?;
                let e = Ensemble::from_text(text)?;
                let parsed = TrainedModel::Ensemble(e);
                if parsed.kind() != kind {
                    return Err(Error::Parse(format!("`@kind = {}` but the ensemble is {:?}", kind.name(), parsed.kind())));
                }
                parsed
            }
            ModelKind::Cnn => {
                let heights = file
                    .require_meta("cnn.kernel_heights")?
                    .split(',')
                    .map(|h| h.trim().parse().map_err(|_| Error::Parse(format!("bad kernel height `{h}`"))))
                    .collect::<Result<Vec<usize>>>()?;
                let pooling_text = file.require_meta("cnn.pooling")?;
                let pooling = match pooling_text.split(':').collect::<Vec<_>>()[..] {
                    ["global"] => Pooling::Global,
                    ["window", h, s] => match (h.parse(), s.parse()) {
                        (Ok(height), Ok(stride)) => Pooling::Window { height, stride },
                        _ => return Err(Error::Parse(format!("bad pooling `{pooling_text}`"))),
                    },
                    _ => return Err(Error::Parse(format!("bad pooling `{pooling_text}`"))),
                };
                let config = CnnConfig {
                    input_features: file.meta_parsed("cnn.input_features")?,
                    kernel_heights: heights,
                    channels_per_height: file.meta_parsed("cnn.channels")?,
                    conv_stride: file.meta_parsed("cnn.conv_stride")?,
                    pooling,
                    lookback: file.meta_parsed("cnn.lookback")?,
                };
                let mut m = CnnModel::zeros(config)?;
                file.load_params(&mut m)?;
                TrainedModel::Cnn(m)
            }
            ModelKind::Lstm => {
                let config = LstmConfig {
                    input_features: file.meta_parsed("lstm.input_features")?,
                    hidden: HiddenSize::PerDirection(file.meta_parsed("lstm.hidden_per_direction")?),
                    bidirectional: file.meta_parsed("lstm.bidirectional")?,
                    layers: file.meta_parsed("lstm.layers")?,
                };
                let mut m = LstmNetwork::zeros(config)?;
                file.load_params(&mut m)?;
                TrainedModel::Lstm(m)
            }
        };
        let target = file.tensor("norm.target")?.data();
        if target.len() != 2 {
            return Err(Error::Parse("`norm.target` must hold mean and std".into()));
        }
        let stats = NormStats {
            feature_mean: file.tensor("norm.feature_mean")?.data().to_vec(),
            feature_std: file.tensor("norm.feature_std")?.data().to_vec(),
            target_mean: target[0],
            target_std: target[1],
        };
        Ok((model, stats))
    }
}
