use super::DailyRecord;
use crate::training::TargetScale;
use crate::{Error, Result};

/// Z-score statistics (population standard deviation) for every feature
/// column and the target, fitted on training rows only.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats {
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

impl NormStats {
    pub fn target_scale(&self) -> TargetScale {
        TargetScale { mean: self.target_mean, std: self.target_std }
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone, n: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

pub fn normalize_fit(records: &[DailyRecord], train_rows: &[usize]) -> Result<NormStats> {
    if train_rows.is_empty() {
        return Err(Error::argument("normalization needs at least one training row"));
    }
    if let Some(&bad) = train_rows.iter().find(|&&i| i >= records.len()) {
        return Err(Error::argument(format!("training row {bad} is out of range for {} records", records.len())));
    }
    let n = train_rows.len();
    let width = records[train_rows[0]].features.len();
    let mut feature_mean = Vec::with_capacity(width);
    let mut feature_std = Vec::with_capacity(width);
    for j in 0..width {
        let (m, s) = mean_std(train_rows.iter().map(|&i| records[i].features[j]), n);
        if !(s > 0.0) {
            return Err(Error::Data(format!("feature column {j} has zero variance on the training rows")));
        }
        feature_mean.push(m);
        feature_std.push(s);
    }
    let (target_mean, target_std) = mean_std(train_rows.iter().map(|&i| records[i].flow), n);
    if !(target_std > 0.0) {
        return Err(Error::Data("target column has zero variance on the training rows".into()));
    }
    Ok(NormStats { feature_mean, feature_std, target_mean, target_std })
}

pub fn normalize_apply(records: &[DailyRecord], stats: &NormStats) -> Result<Vec<DailyRecord>> {
    records
        .iter()
        .map(|r| {
            if r.features.len() != stats.feature_mean.len() {
                return Err(Error::shape(format!(
                    "record {} has {} features, statistics cover {}",
                    r.date,
                    r.features.len(),
                    stats.feature_mean.len()
                )));
            }
            let features = r
                .features
                .iter()
                .zip(stats.feature_mean.iter().zip(&stats.feature_std))
                .map(|(v, (m, s))| (v - m) / s)
                .collect();
            Ok(DailyRecord { date: r.date, features, flow: (r.flow - stats.target_mean) / stats.target_std })
        })
        .collect()
}

/// Maps normalized flow values back to original units.
pub fn denormalize_target(values: &[f64], stats: &NormStats) -> Vec<f64> {
    let scale = stats.target_scale();
    values.iter().map(|&v| scale.restore(v)).collect()
}
