use super::experiment::{ExperimentConfig, ModelKind};
use super::metric::mean_std;
use crate::kv;
use crate::{Error, Result};

/// What is needed, besides the data itself, to rerun a comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetadata {
    pub seed: u64,
    pub lookback: usize,
    pub repeats: usize,
    pub dataset_id: String,
    /// Content hash of the series the run saw.
    pub dataset_hash: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelScores {
    pub kind: ModelKind,
    /// Test relative error of each repeat, in percent.
    pub per_repeat: Vec<f64>,
    pub split_fingerprints: Vec<String>,
    pub mean: f64,
    /// Sample standard deviation over repeats.
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub metadata: RunMetadata,
    pub rows: Vec<ModelScores>,
}

const HEADER: [&str; 3] = ["Model", "Mean Relative Error (%)", "Standard Deviation"];

impl EvalReport {
    pub fn row(&self, kind: ModelKind) -> Option<&ModelScores> {
        self.rows.iter().find(|r| r.kind == kind)
    }

    /// Pipe-separated table, one row per model, four decimals.
    pub fn to_table(&self) -> String {
        let w0 = HEADER[0].len().max(4);
        let (w1, w2) = (HEADER[1].len(), HEADER[2].len());
        let mut out = format!("{:<w0$} | {} | {}\n", HEADER[0], HEADER[1], HEADER[2]);
        for r in &self.rows {
            out.push_str(&format!("{:<w0$} | {:>w1$.4} | {:>w2$.4}\n", r.kind.label(), r.mean, r.std));
        }
        out
    }

    pub fn to_kv(&self) -> String {
        let m = &self.metadata;
        let mut out = String::new();
        let mut put = |k: &str, v: &dyn std::fmt::Display| out.push_str(&format!("{k} = {v}\n"));
        put("seed", &m.seed);
        put("lookback", &m.lookback);
        put("repeats", &m.repeats);
        put("dataset_id", &m.dataset_id);
        put("dataset_hash", &m.dataset_hash);
        put("config_hash", &m.config_hash);
        for (k, v) in m.config.to_pairs() {
            put(&format!("config.{k}"), &v);
        }
        for r in &self.rows {
            let l = r.kind.label();
            put(&format!("model.{l}.mean"), &r.mean);
            put(&format!("model.{l}.std"), &r.std);
            for (i, (v, f)) in r.per_repeat.iter().zip(&r.split_fingerprints).enumerate() {
                put(&format!("model.{l}.repeat.{i}"), v);
                put(&format!("model.{l}.split.{i}"), f);
            }
        }
        out
    }

    /// Inverse of [`EvalReport::to_kv`]. Mean and standard deviation are
    /// checked against the per-repeat values.
    pub fn from_kv(text: &str) -> Result<Self> {
        let pairs = kv::parse(text)?;
        let config_pairs: Vec<(String, String)> = pairs
            .iter()
            .filter_map(|(k, v)| k.strip_prefix("config.").map(|k| (k.to_string(), v.clone())))
            .collect();
        let config = ExperimentConfig::from_pairs(&config_pairs)?;
        let repeats: usize = kv::require_parsed(&pairs, "repeats")?;
        let metadata = RunMetadata {
            seed: kv::require_parsed(&pairs, "seed")?,
            lookback: kv::require_parsed(&pairs, "lookback")?,
            repeats,
            dataset_id: kv::require(&pairs, "dataset_id")?.to_string(),
            dataset_hash: kv::require(&pairs, "dataset_hash")?.to_string(),
            config_hash: kv::require(&pairs, "config_hash")?.to_string(),
            config,
        };
        let mut rows = Vec::new();
        for kind in ModelKind::ALL {
            let l = kind.label();
            if kv::lookup(&pairs, &format!("model.{l}.mean")).is_none() {
                continue;
            }
            let per_repeat = (0..repeats)
                .map(|i| kv::require_parsed(&pairs, &format!("model.{l}.repeat.{i}")))
                .collect::<Result<Vec<f64>>>()?;
            let split_fingerprints = (0..repeats)
                .map(|i| kv::require(&pairs, &format!("model.{l}.split.{i}")).map(str::to_string))
                .collect::<Result<Vec<_>>>()?;
            let mean: f64 = kv::require_parsed(&pairs, &format!("model.{l}.mean"))?;
            let std: f64 = kv::require_parsed(&pairs, &format!("model.{l}.std"))?;
            let (m, s) = mean_std(&per_repeat);
            if (m - mean).abs() > 1e-12 || (s - std).abs() > 1e-12 {
                return Err(Error::Parse(format!("{l}: stored mean/std disagree with the per-repeat values")));
            }
            rows.push(ModelScores { kind, per_repeat, split_fingerprints, mean, std });
        }
        Ok(Self { metadata, rows })
    }
}
