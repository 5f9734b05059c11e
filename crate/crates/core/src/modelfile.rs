//! Plain-text model files.
//!
//! ```text
//! # comment
//! @kind = cnn                      metadata, one `@key = value` per line
//! conv.h3.weight 100 12 0.1 -0.2 … one tensor per line: name rows cols values
//! %ensemble                        optional; the rest of the file is an
//! ensemble gbr                     ensemble in its own text form
//! …
//! ```
//!
//! Values are written with Rust's shortest round-trip formatting, so a file
//! reloads bit-identically. CNN and LSTM parameters, linear weights and
//! normalization statistics all use the tensor records.

use std::path::Path;

use crate::model::NeuralRegressor;
use crate::{Error, Matrix, Result};

const ENSEMBLE_MARKER: &str = "%ensemble";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelFile {
    pub meta: Vec<(String, String)>,
    pub tensors: Vec<(String, Matrix)>,
    pub ensemble: Option<String>,
}

pub fn tensor_line(name: &str, m: &Matrix) -> String {
    let mut line = format!("{name} {} {}", m.rows(), m.cols());
    for v in m.data() {
        line.push(' ');
        line.push_str(&v.to_string());
    }
    line
}

pub fn parse_tensor_line(line: &str) -> Result<(String, Matrix)> {
    let mut parts = line.split_whitespace();
    let bad = |what: &str| Error::Parse(format!("tensor record: {what} in `{}`", truncate(line)));
    let name = parts.next().ok_or_else(|| bad("missing name"))?;
    let rows: usize = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad row count"))?;
    let cols: usize = parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| bad("bad column count"))?;
    let data = parts.map(|v| v.parse::<f64>().map_err(|_| bad("bad value"))).collect::<Result<Vec<_>>>()?;
    let m = Matrix::new(rows, cols, data).map_err(|e| bad(&e.to_string()))?;
    Ok((name.to_string(), m))
}

fn truncate(line: &str) -> &str {
    match line.char_indices().nth(60) {
        Some((i, _)) => &line[..i],
        None => line,
    }
}

impl ModelFile {
    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push_tensor(&mut self, name: impl Into<String>, m: Matrix) {
        self.tensors.push((name.into(), m));
    }

    pub fn push_params<M: NeuralRegressor>(&mut self, model: &M) {
        for (name, m) in model.params() {
            self.tensors.push((name, m.clone()));
        }
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require_meta(&self, key: &str) -> Result<&str> {
        self.meta(key).ok_or_else(|| Error::Parse(format!("model file has no `@{key}` entry")))
    }

    pub fn meta_parsed<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require_meta(key)?;
        raw.parse().map_err(|_| Error::Parse(format!("`@{key}`: cannot parse `{raw}`")))
    }

    pub fn tensor(&self, name: &str) -> Result<&Matrix> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| Error::Parse(format!("model file has no tensor `{name}`")))
    }

    /// Copies every parameter of `model` from the tensor of the same name.
    pub fn load_params<M: NeuralRegressor>(&self, model: &mut M) -> Result<()> {
        let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
        for (name, slot) in names.iter().zip(model.params_mut()) {
            let stored = self.tensor(name)?;
            if stored.shape() != slot.shape() {
                return Err(Error::shape(format!(
                    "tensor `{name}` is {:?} in the file but {:?} in the model",
                    stored.shape(),
                    slot.shape()
                )));
            }
            *slot = stored.clone();
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# streamflow model file\n");
        for (k, v) in &self.meta {
            out.push_str(&format!("@{k} = {v}\n"));
        }
        for (name, m) in &self.tensors {
            out.push_str(&tensor_line(name, m));
            out.push('\n');
        }
        if let Some(e) = &self.ensemble {
            out.push_str(ENSEMBLE_MARKER);
            out.push('\n');
            out.push_str(e);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut file = ModelFile::default();
        let mut lines = text.lines();
        while let Some(line) = lines.next() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == ENSEMBLE_MARKER {
                file.ensemble = Some(lines.by_ref().map(|l| format!("{l}\n")).collect());
                break;
            }
            if let Some(meta) = line.strip_prefix('@') {
                let (k, v) = meta
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("metadata line without `=`: `{line}`")))?;
                file.meta.push((k.trim().to_string(), v.trim().to_string()));
            } else {
                file.tensors.push(parse_tensor_line(line)?);
            }
        }
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("cannot read model file {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convnet::{CnnConfig, CnnModel};
    use crate::recurrent::{HiddenSize, LstmConfig, LstmNetwork};
    use crate::SeededRng;
    use proptest::prelude::*;

    #[test]
    fn cnn_and_lstm_reload_bit_identically() {
        let mut rng = SeededRng::new(1);
        let cnn = CnnModel::init(CnnConfig { channels_per_height: 3, ..CnnConfig::standard(4, 7) }, &mut rng).unwrap();
        let cfg = LstmConfig { input_features: 4, hidden: HiddenSize::PerDirection(3), bidirectional: true, layers: 2 };
        let lstm = LstmNetwork::init(cfg.clone(), &mut rng).unwrap();

        let mut file = ModelFile::default().with_meta("kind", "both");
        file.push_params(&cnn);
        file.push_params(&lstm);
        let back = ModelFile::parse(&file.to_text()).unwrap();
        assert_eq!(back, file);

        let mut cnn2 = CnnModel::zeros(cnn.config.clone()).unwrap();
        back.load_params(&mut cnn2).unwrap();
        assert_eq!(cnn2, cnn);
        let mut lstm2 = LstmNetwork::zeros(cfg).unwrap();
        back.load_params(&mut lstm2).unwrap();
        assert_eq!(lstm2, lstm);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let cnn = CnnModel::zeros(CnnConfig { channels_per_height: 2, ..CnnConfig::standard(3, 7) }).unwrap();
        let mut file = ModelFile::default();
        file.push_params(&cnn);
        let mut wider = CnnModel::zeros(CnnConfig { channels_per_height: 3, ..CnnConfig::standard(3, 7) }).unwrap();
        assert!(matches!(file.load_params(&mut wider), Err(Error::Shape(_))));
    }

    #[test]
    fn ensemble_section_is_kept_verbatim() {
        let mut file = ModelFile::default().with_meta("kind", "rf");
        file.ensemble = Some("ensemble rf\ntrees 0\n".into());
        assert_eq!(ModelFile::parse(&file.to_text()).unwrap().ensemble, file.ensemble);
    }

    #[test]
    fn malformed_records() {
        assert!(matches!(parse_tensor_line("w 2 2 1 2 3"), Err(Error::Parse(_))));
        assert!(matches!(parse_tensor_line("w two 2"), Err(Error::Parse(_))));
        assert!(matches!(ModelFile::parse("@kind cnn"), Err(Error::Parse(_))));
    }

    proptest! {
        #[test]
        fn tensor_records_round_trip(values in prop::collection::vec(-1e12f64..1e12, 1..20)) {
            let m = Matrix::new(1, values.len(), values).unwrap();
            let (name, back) = parse_tensor_line(&tensor_line("x.y", &m)).unwrap();
            prop_assert_eq!(name, "x.y");
            prop_assert_eq!(back, m);
        }
    }
}
