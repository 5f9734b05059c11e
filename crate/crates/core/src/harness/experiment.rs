use std::io::Write;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::metric::{mean_std, relative_error};
use super::report::{EvalReport, ModelScores, RunMetadata};
use super::trained::TrainedModel;
use crate::baselines::{design_matrix, gbr_fit, ols_fit, rf_fit, GbrParams, RfParams};
use crate::convnet::{CnnConfig, CnnModel};
use crate::datapipe::{
    make_windows, normalize_apply, normalize_fit, repeated_splits, window_rows, DailyRecord, NormStats, Sample, Split,
    SplitMode,
};
use crate::kv;
use crate::numcore::derive_seed;
use crate::recurrent::{HiddenSize, LstmConfig, LstmNetwork};
use crate::training::{fit, EpochRecord, TrainConfig};
use crate::{Error, Matrix, Result, SeededRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Lr,
    Gbr,
    Rf,
    Cnn,
    Lstm,
}

impl ModelKind {
    /// Report row order.
    pub const ALL: [ModelKind; 5] = [ModelKind::Lr, ModelKind::Gbr, ModelKind::Rf, ModelKind::Cnn, ModelKind::Lstm];

    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Lr => "LR",
            ModelKind::Gbr => "GBR",
            ModelKind::Rf => "RF",
            ModelKind::Cnn => "CNN",
            ModelKind::Lstm => "LSTM",
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Gbr => "gbr",
            ModelKind::Rf => "rf",
            ModelKind::Cnn => "cnn",
            ModelKind::Lstm => "lstm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::argument(format!("unknown model `{s}` (expected cnn, lstm, lr, gbr or rf)")))
    }

    pub fn is_neural(&self) -> bool {
        matches!(self, ModelKind::Cnn | ModelKind::Lstm)
    }

    fn index(&self) -> u64 {
        Self::ALL.iter().position(|k| k == self).expect("listed") as u64
    }
}

/// Everything besides the data and the master seed that determines a run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub lookback: usize,
    pub split_mode: SplitMode,
    /// Batch size, epochs, patience and optimizer for CNN and LSTM. The
    /// seed field is ignored; every run derives its own.
    pub train: TrainConfig,
    pub cnn_kernel_heights: Vec<usize>,
    pub cnn_channels: usize,
    pub lstm_hidden: HiddenSize,
    pub lstm_layers: usize,
    pub lstm_bidirectional: bool,
    pub gbr: GbrParams,
    /// The seed field is ignored; every run derives its own.
    pub rf: RfParams,
}

impl ExperimentConfig {
    pub fn standard(lookback: usize) -> Self {
        let cnn = CnnConfig::standard(1, lookback);
        let lstm = LstmConfig::standard(1);
        Self {
            lookback,
            split_mode: SplitMode::Shuffled,
            train: TrainConfig::default(),
            cnn_kernel_heights: cnn.kernel_heights,
            cnn_channels: cnn.channels_per_height,
            lstm_hidden: lstm.hidden,
            lstm_layers: lstm.layers,
            lstm_bidirectional: lstm.bidirectional,
            gbr: GbrParams::default(),
            rf: RfParams::default(),
        }
    }

    /// CNN architecture for `features` inputs. Kernel heights longer than
    /// the lookback are dropped; if none is left a single kernel spans the
    /// whole window.
    pub fn cnn_config(&self, features: usize) -> CnnConfig {
        let mut heights: Vec<usize> = self.cnn_kernel_heights.iter().copied().filter(|&h| h <= self.lookback).collect();
        if heights.is_empty() {
            heights.push(self.lookback);
        }
        CnnConfig {
            kernel_heights: heights,
            channels_per_height: self.cnn_channels,
            ..CnnConfig::standard(features, self.lookback)
        }
    }

    pub fn lstm_config(&self, features: usize) -> LstmConfig {
        LstmConfig {
            input_features: features,
            hidden: self.lstm_hidden,
            bidirectional: self.lstm_bidirectional,
            layers: self.lstm_layers,
        }
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let opt = |v: Option<usize>| v.map_or("none".to_string(), |n| n.to_string());
        let hidden = match self.lstm_hidden {
            HiddenSize::Total(n) => format!("total:{n}"),
            HiddenSize::PerDirection(n) => format!("per_direction:{n}"),
        };
        let heights: Vec<String> = self.cnn_kernel_heights.iter().map(|h| h.to_string()).collect();
        [
            ("lookback", self.lookback.to_string()),
            ("split_mode", self.split_mode.as_str().to_string()),
            ("batch_size", self.train.batch_size.to_string()),
            ("max_epochs", self.train.max_epochs.to_string()),
            ("patience", self.train.patience.to_string()),
            ("adadelta.rho", self.train.optimizer.rho.to_string()),
            ("adadelta.epsilon", self.train.optimizer.epsilon.to_string()),
            ("adadelta.lr_scale", self.train.optimizer.lr_scale.to_string()),
            ("cnn.kernel_heights", heights.join(",")),
            ("cnn.channels", self.cnn_channels.to_string()),
            ("lstm.hidden", hidden),
            ("lstm.layers", self.lstm_layers.to_string()),
            ("lstm.bidirectional", self.lstm_bidirectional.to_string()),
            ("gbr.trees", self.gbr.n_trees.to_string()),
            ("gbr.learning_rate", self.gbr.learning_rate.to_string()),
            ("gbr.max_depth", self.gbr.max_depth.to_string()),
            ("gbr.min_samples_leaf", self.gbr.min_samples_leaf.to_string()),
            ("rf.trees", self.rf.n_trees.to_string()),
            ("rf.max_features", opt(self.rf.max_features)),
            ("rf.bootstrap", self.rf.bootstrap.to_string()),
            ("rf.max_depth", opt(self.rf.max_depth)),
            ("rf.min_samples_leaf", self.rf.min_samples_leaf.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Starts from [`ExperimentConfig::standard`] and applies every pair.
    /// Unknown keys are rejected.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::argument(format!("config `{key}`: cannot parse `{v}`")))
        }
        fn opt(key: &str, v: &str) -> Result<Option<usize>> {
            if v == "none" || v == "all" {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        let mut c = Self::standard(7);
        for (k, v) in pairs {
            let v = v.as_str();
            match k.as_str() {
                "lookback" => c.lookback = num(k, v)?,
                "split_mode" => c.split_mode = SplitMode::parse(v)?,
                "batch_size" => c.train.batch_size = num(k, v)?,
                "max_epochs" => c.train.max_epochs = num(k, v)?,
                "patience" => c.train.patience = num(k, v)?,
                "adadelta.rho" => c.train.optimizer.rho = num(k, v)?,
                "adadelta.epsilon" => c.train.optimizer.epsilon = num(k, v)?,
                "adadelta.lr_scale" => c.train.optimizer.lr_scale = num(k, v)?,
                "cnn.kernel_heights" => {
                    c.cnn_kernel_heights = v.split(',').map(|h| num(k, h.trim())).collect::<Result<_>>()?
                }
                "cnn.channels" => c.cnn_channels = num(k, v)?,
                "lstm.hidden" => {
                    c.lstm_hidden = match v.split_once(':') {
                        Some(("total", n)) => HiddenSize::Total(num(k, n)?),
                        Some(("per_direction", n)) => HiddenSize::PerDirection(num(k, n)?),
                        _ => HiddenSize::Total(num(k, v)?),
                    }
                }
                "lstm.layers" => c.lstm_layers = num(k, v)?,
                "lstm.bidirectional" => c.lstm_bidirectional = num(k, v)?,
                "gbr.trees" => c.gbr.n_trees = num(k, v)?,
                "gbr.learning_rate" => c.gbr.learning_rate = num(k, v)?,
                "gbr.max_depth" => c.gbr.max_depth = num(k, v)?,
                "gbr.min_samples_leaf" => c.gbr.min_samples_leaf = num(k, v)?,
                "rf.trees" => c.rf.n_trees = num(k, v)?,
                "rf.max_features" => c.rf.max_features = opt(k, v)?,
                "rf.bootstrap" => c.rf.bootstrap = num(k, v)?,
                "rf.max_depth" => c.rf.max_depth = opt(k, v)?,
                "rf.min_samples_leaf" => c.rf.min_samples_leaf = num(k, v)?,
                other => return Err(Error::argument(format!("unknown config key `{other}`"))),
            }
        }
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&kv::parse(text)?)
    }

    /// First 16 hex digits of the SHA-256 of the canonical text form.
    pub fn hash(&self) -> String {
        hex16(&Sha256::digest(self.to_text().as_bytes()))
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::standard(7)
    }
}

pub(crate) fn hex16(digest: &[u8]) -> String {
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of a series: dates, features and flows, bit for bit.
pub(crate) fn dataset_hash(records: &[DailyRecord]) -> String {
    let mut h = Sha256::new();
    for r in records {
        h.update(r.date.to_string().as_bytes());
        for v in &r.features {
            h.update(v.to_bits().to_le_bytes());
        }
        h.update(r.flow.to_bits().to_le_bytes());
    }
    hex16(&h.finalize())
}

/// Normalized train/validation/test samples for one split.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub stats: NormStats,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
    /// Observed test flows in original units.
    pub test_real: Vec<f64>,
}

impl Prepared {
    pub fn features(&self) -> usize {
        self.train.first().map_or(0, |s| s.x.cols())
    }
}

/// Windows `records`, fits z-scores on the rows of the training windows,
/// and normalizes. `split` indexes windows.
pub fn prepare(records: &[DailyRecord], lookback: usize, split: &Split) -> Result<Prepared> {
    let raw = make_windows(records, lookback)?;
    let n = raw.len();
    if let Some(&bad) = split.train.iter().chain(&split.val).chain(&split.test).find(|&&i| i >= n) {
        return Err(Error::argument(format!("split index {bad} is out of range for {n} windows")));
    }
    let stats = normalize_fit(records, &window_rows(&split.train, lookback))?;
    let windows = make_windows(&normalize_apply(records, &stats)?, lookback)?;
    Ok(Prepared {
        test_real: split.test.iter().map(|&i| raw.samples[i].y).collect(),
        train: windows.select(&split.train),
        val: windows.select(&split.val),
        test: windows.select(&split.test),
        stats,
    })
}

/// Relative error on the test set of a predictor that maps a normalized
/// window to a normalized flow.
pub fn evaluate_predictor(prepared: &Prepared, predict: impl Fn(&Matrix) -> Result<f64>) -> Result<f64> {
    let scale = prepared.stats.target_scale();
    let pred = prepared.test.iter().map(|s| predict(&s.x).map(|y| scale.restore(y))).collect::<Result<Vec<_>>>()?;
    relative_error(&pred, &prepared.test_real)
}

/// Fits one model. Deep models select their best epoch on the validation
/// set; the classical ones see the training set only. `seed` drives
/// initialization, shuffling and bootstrap draws.
pub fn fit_model(
    kind: ModelKind,
    prepared: &Prepared,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(TrainedModel, Vec<EpochRecord>)> {
    let features = prepared.features();
    let train_config = TrainConfig {
        seed: derive_seed(seed, 1),
        batch_size: config.train.batch_size.min(prepared.train.len()),
        ..config.train.clone()
    };
    let scale = prepared.stats.target_scale();
    let mut init_rng = SeededRng::new(derive_seed(seed, 0));
    Ok(match kind {
        ModelKind::Lr => {
            let (x, y) = design_matrix(&prepared.train)?;
            (TrainedModel::Linear(ols_fit(&x, &y)?), Vec::new())
        }
        ModelKind::Gbr => {
            let (x, y) = design_matrix(&prepared.train)?;
            (TrainedModel::Ensemble(gbr_fit(&x, &y, config.gbr)?), Vec::new())
        }
        ModelKind::Rf => {
            let (x, y) = design_matrix(&prepared.train)?;
            let params = RfParams { seed: derive_seed(seed, 2), ..config.rf };
            (TrainedModel::Ensemble(rf_fit(&x, &y, params)?), Vec::new())
        }
        ModelKind::Cnn => {
            let model = CnnModel::init(config.cnn_config(features), &mut init_rng)?;
            let report = fit(model, &prepared.train, &prepared.val, scale, &train_config)?;
            (TrainedModel::Cnn(report.best), report.history)
        }
        ModelKind::Lstm => {
            let model = LstmNetwork::init(config.lstm_config(features), &mut init_rng)?;
            let report = fit(model, &prepared.train, &prepared.val, scale, &train_config)?;
            (TrainedModel::Lstm(report.best), report.history)
        }
    })
}

/// Seed of one (model, repeat) cell of a comparison.
pub fn cell_seed(master: u64, repeat: usize, kind: ModelKind) -> u64 {
    derive_seed(derive_seed(master, repeat as u64), 100 + kind.index())
}

/// Fits `kind` on the split's training part and returns its test relative
/// error (a fraction, not a percentage).
pub fn evaluate_model(
    kind: ModelKind,
    records: &[DailyRecord],
    split: &Split,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<f64> {
    let prepared = prepare(records, config.lookback, split)?;
    let (model, _) = fit_model(kind, &prepared, config, seed)?;
    evaluate_predictor(&prepared, |x| model.predict(x))
}

fn window_total(records: &[DailyRecord], lookback: usize) -> Result<usize> {
    if lookback == 0 || records.len() <= lookback {
        return Err(Error::argument(format!(
            "lookback {lookback} needs between 1 and {} days",
            records.len().saturating_sub(1)
        )));
    }
    Ok(records.len() - lookback)
}

/// All five models over the same `repeats` splits of the windowed series.
/// Cells run in parallel; the report lists models in [`ModelKind::ALL`]
/// order with per-repeat errors in percent.
pub fn compare_all(
    records: &[DailyRecord],
    config: &ExperimentConfig,
    repeats: usize,
    seed: u64,
    dataset_id: &str,
) -> Result<EvalReport> {
    let n = window_total(records, config.lookback)?;
    let splits = repeated_splits(n, repeats, seed, config.split_mode)?;
    let prepared = splits.par_iter().map(|s| prepare(records, config.lookback, s)).collect::<Result<Vec<_>>>()?;

    let cells: Vec<(ModelKind, usize)> =
        ModelKind::ALL.iter().flat_map(|&k| (0..repeats).map(move |r| (k, r))).collect();
    let results: Vec<Result<f64>> = cells
        .par_iter()
        .map(|&(kind, r)| {
            let (model, _) = fit_model(kind, &prepared[r], config, cell_seed(seed, r, kind))?;
            evaluate_predictor(&prepared[r], |x| model.predict(x))
        })
        .collect();

    let mut rows = Vec::with_capacity(ModelKind::ALL.len());
    let mut results = cells.iter().zip(results);
    for kind in ModelKind::ALL {
        let mut per_repeat = Vec::with_capacity(repeats);
        for ((k, _), res) in results.by_ref().take(repeats) {
            debug_assert_eq!(*k, kind);
            let err = res.map_err(|e| Error::Model { model: kind.label().to_string(), source: Box::new(e) })?;
            per_repeat.push(100.0 * err);
        }
        let (mean, std) = mean_std(&per_repeat);
        rows.push(ModelScores {
            kind,
            per_repeat,
            split_fingerprints: splits.iter().map(Split::fingerprint).collect(),
            mean,
            std,
        });
    }
    Ok(EvalReport {
        metadata: RunMetadata {
            seed,
            lookback: config.lookback,
            repeats,
            dataset_id: dataset_id.to_string(),
            dataset_hash: dataset_hash(records),
            config_hash: config.hash(),
            config: config.clone(),
        },
        rows,
    })
}

/// Mean test relative error (percent) of `kind` over `repeats` splits for
/// each lookback in `grid`, in grid order. Every lookback uses the same
/// master seed.
pub fn lookback_sweep(
    records: &[DailyRecord],
    grid: &[usize],
    kind: ModelKind,
    config: &ExperimentConfig,
    repeats: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    if grid.is_empty() {
        return Err(Error::argument("lookback grid is empty"));
    }
    for &l in grid {
        let n = window_total(records, l)?;
        if n < 10 {
            return Err(Error::argument(format!(
                "lookback {l} leaves {n} windows of {} days; at least 10 are needed",
                records.len()
            )));
        }
    }
    grid.iter()
        .map(|&l| {
            let cfg = ExperimentConfig { lookback: l, ..config.clone() };
            let splits = repeated_splits(records.len() - l, repeats, seed, cfg.split_mode)?;
            let errors = splits
                .par_iter()
                .enumerate()
                .map(|(r, s)| evaluate_model(kind, records, s, &cfg, cell_seed(seed, r, kind)).map(|e| 100.0 * e))
                .collect::<Result<Vec<_>>>()?;
            Ok((l, mean_std(&errors).0))
        })
        .collect()
}

/// Lookback with the lowest error; the first one wins ties.
pub fn sweep_argmin(series: &[(usize, f64)]) -> Option<usize> {
    series.iter().fold(None, |best: Option<(usize, f64)>, &(l, e)| match best {
        Some((_, b)) if b <= e => best,
        _ => Some((l, e)),
    })
    .map(|(l, _)| l)
}

pub fn write_sweep_csv<W: Write>(series: &[(usize, f64)], mut out: W) -> Result<()> {
    writeln!(out, "lookback,mean_relative_error_pct")?;
    for (l, e) in series {
        writeln!(out, "{l},{e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapipe::{split_712, synth_generate};
    use crate::training::AdaDeltaConfig;

    fn small_config() -> ExperimentConfig {
        let mut c = ExperimentConfig::standard(5);
        c.train.max_epochs = 2;
        c.train.patience = 2;
        c.cnn_channels = 2;
        c.lstm_hidden = HiddenSize::PerDirection(2);
        c.gbr.n_trees = 5;
        c.rf.n_trees = 3;
        c.rf.max_depth = Some(4);
        c
    }

    #[test]
    fn model_names() {
        for k in ModelKind::ALL {
            assert_eq!(ModelKind::parse(k.name()).unwrap(), k);
        }
        assert_eq!(ModelKind::parse("LSTM").unwrap(), ModelKind::Lstm);
        assert!(matches!(ModelKind::parse("svm"), Err(Error::Argument(_))));
    }

    #[test]
    fn config_text_round_trip() {
        let mut c = small_config();
        c.rf.max_features = Some(3);
        c.split_mode = SplitMode::Chronological;
        c.train.optimizer = AdaDeltaConfig { rho: 0.9, epsilon: 1e-8, lr_scale: 0.5 };
        let back = ExperimentConfig::parse(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_ne!(ExperimentConfig::standard(7).hash(), c.hash());
        assert!(matches!(ExperimentConfig::parse("colour = red"), Err(Error::Argument(_))));
    }

    #[test]
    fn short_lookback_trims_kernels() {
        let c = ExperimentConfig::standard(4);
        assert_eq!(c.cnn_config(3).kernel_heights, vec![3]);
        assert_eq!(ExperimentConfig::standard(2).cnn_config(3).kernel_heights, vec![2]);
        assert_eq!(ExperimentConfig::standard(7).cnn_config(3).kernel_heights, vec![3, 5, 7]);
    }

    #[test]
    fn oracle_predictor_scores_zero() {
        let records = synth_generate(120, 3, 4).unwrap();
        let split = split_712(records.len() - 5, &mut SeededRng::new(1)).unwrap();
        let prepared = prepare(&records, 5, &split).unwrap();
        // Look the normalized target up by window contents.
        let err = evaluate_predictor(&prepared, |x| {
            Ok(prepared.test.iter().find(|s| &s.x == x).expect("test window").y)
        })
        .unwrap();
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn constant_mean_predictor_matches_closed_form() {
        let records = synth_generate(150, 2, 9).unwrap();
        let lookback = 4;
        let split = split_712(records.len() - lookback, &mut SeededRng::new(3)).unwrap();
        let prepared = prepare(&records, lookback, &split).unwrap();
        let got = evaluate_predictor(&prepared, |_| Ok(0.0)).unwrap();

        // Independent oracle: mean flow over the rows the training windows touch.
        let rows = window_rows(&split.train, lookback);
        let mean = rows.iter().map(|&i| records[i].flow).sum::<f64>() / rows.len() as f64;
        let expect = split
            .test
            .iter()
            .map(|&i| {
                let real = records[i + lookback].flow;
                (mean - real).abs() / real
            })
            .sum::<f64>()
            / split.test.len() as f64;
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn evaluation_is_deterministic() {
        let records = synth_generate(160, 2, 5).unwrap();
        let split = split_712(records.len() - 5, &mut SeededRng::new(8)).unwrap();
        let cfg = small_config();
        for kind in ModelKind::ALL {
            let a = evaluate_model(kind, &records, &split, &cfg, 77).unwrap();
            let b = evaluate_model(kind, &records, &split, &cfg, 77).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "{kind:?}");
            assert!(a.is_finite() && a > 0.0);
        }
    }

    #[test]
    fn compare_report_shape_and_pairing() {
        let records = synth_generate(150, 2, 6).unwrap();
        let cfg = small_config();
        let report = compare_all(&records, &cfg, 3, 11, "synthetic").unwrap();
        let labels: Vec<&str> = report.rows.iter().map(|r| r.kind.label()).collect();
        assert_eq!(labels, ["LR", "GBR", "RF", "CNN", "LSTM"]);
        for row in &report.rows {
            assert_eq!(row.per_repeat.len(), 3);
            assert_eq!(row.split_fingerprints, report.rows[0].split_fingerprints);
            let (m, s) = mean_std(&row.per_repeat);
            assert!((m - row.mean).abs() <= 1e-12 && (s - row.std).abs() <= 1e-12);
        }
        let again = compare_all(&records, &cfg, 3, 11, "synthetic").unwrap();
        assert_eq!(again, report);
    }

    #[test]
    fn failing_model_is_named() {
        let records = synth_generate(150, 2, 6).unwrap();
        let mut cfg = small_config();
        cfg.train.optimizer.rho = 1.5;
        match compare_all(&records, &cfg, 1, 0, "x") {
            Err(Error::Model { model, .. }) => assert_eq!(model, "CNN"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sweep_shape_and_errors() {
        let records = synth_generate(120, 2, 2).unwrap();
        let cfg = small_config();
        let series = lookback_sweep(&records, &[3, 1, 2], ModelKind::Lr, &cfg, 2, 4).unwrap();
        assert_eq!(series.iter().map(|p| p.0).collect::<Vec<_>>(), [3, 1, 2]);
        assert_eq!(lookback_sweep(&records, &[2], ModelKind::Lr, &cfg, 1, 4).unwrap().len(), 1);
        assert!(matches!(lookback_sweep(&records, &[2, 120], ModelKind::Lr, &cfg, 1, 4), Err(Error::Argument(_))));
        assert!(matches!(lookback_sweep(&records, &[115], ModelKind::Lr, &cfg, 1, 4), Err(Error::Argument(_))));
    }

    #[test]
    fn argmin_and_csv() {
        assert_eq!(sweep_argmin(&[(1, 3.0), (2, 1.0), (3, 1.0)]), Some(2));
        assert_eq!(sweep_argmin(&[]), None);
        let mut out = Vec::new();
        write_sweep_csv(&[(1, 2.5), (7, 1.25)], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "lookback,mean_relative_error_pct\n1,2.5\n7,1.25\n");
    }
}
