use std::f64::consts::TAU;

use chrono::NaiveDate;

use super::{DailyRecord, Schema};
use crate::{Error, Result, SeededRng};

/// Unit-hydrograph weights applied to the mean precipitation of the
/// previous five days.
const RESPONSE: [f64; 5] = [0.9, 0.6, 0.35, 0.2, 0.1];
const BASEFLOW: f64 = 6.0;
const TEMP_COEF: f64 = 0.15;
const TEMP_MEAN: f64 = 20.0;

/// Synthetic basin: per station one precipitation column (mm/day) and one
/// temperature column (°C), features interleaved `precip_1, temp_1,
/// precip_2, ...`. Flow is a lagged linear response to precipitation plus a
/// temperature-driven baseflow term, times `1 + flow_noise * N(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_days: usize,
    pub features: usize,
    pub seed: u64,
    /// Relative flow noise; 0 gives an exactly linear target.
    pub flow_noise: f64,
    pub start: NaiveDate,
}

impl SynthConfig {
    pub fn new(n_days: usize, features: usize, seed: u64) -> Self {
        Self {
            n_days,
            features,
            seed,
            flow_noise: 0.02,
            start: NaiveDate::from_ymd_opt(1983, 1, 1).expect("valid date"),
        }
    }

    pub fn noise_free(self) -> Self {
        Self { flow_noise: 0.0, ..self }
    }

    pub fn feature_names(&self) -> Vec<String> {
        (0..self.features)
            .map(|j| if j % 2 == 0 { format!("precip_{}", j / 2 + 1) } else { format!("temp_{}", j / 2 + 1) })
            .collect()
    }

    pub fn schema(&self) -> Schema {
        Schema { date: "date".into(), features: self.feature_names(), target: "flow".into() }
    }

    pub fn generate(&self) -> Result<Vec<DailyRecord>> {
        if self.n_days < 30 {
            return Err(Error::argument(format!("synthetic series needs at least 30 days, got {}", self.n_days)));
        }
        if self.features == 0 {
            return Err(Error::argument("synthetic series needs at least one feature"));
        }
        if !(self.flow_noise >= 0.0 && self.flow_noise < 0.25) {
            return Err(Error::argument(format!("flow noise must lie in [0, 0.25), got {}", self.flow_noise)));
        }
        let mut rng = SeededRng::new(self.seed);
        let precip_cols: Vec<usize> = (0..self.features).step_by(2).collect();
        let temp_cols: Vec<usize> = (1..self.features).step_by(2).collect();
        let station_offset: Vec<f64> = (0..self.features).map(|_| rng.uniform(-2.0, 2.0)).collect();

        let mut features = Vec::with_capacity(self.n_days);
        for day in 0..self.n_days {
            let season = (TAU * (day as f64 - 110.0) / 365.25).sin();
            let wet_chance = 0.25 + 0.15 * season;
            let row: Vec<f64> = (0..self.features)
                .map(|j| {
                    if j % 2 == 0 {
                        if rng.unit() < wet_chance {
                            -8.0 * (1.0 - rng.unit()).ln()
                        } else {
                            0.0
                        }
                    } else {
                        TEMP_MEAN + 10.0 * season + station_offset[j] + 2.0 * rng.normal()
                    }
                })
                .collect();
            features.push(row);
        }

        let mean_of = |row: &[f64], cols: &[usize]| {
            if cols.is_empty() {
                TEMP_MEAN
            } else {
                cols.iter().map(|&c| row[c]).sum::<f64>() / cols.len() as f64
            }
        };
        let mut records = Vec::with_capacity(self.n_days);
        for (day, row) in features.iter().enumerate() {
            let mut flow = BASEFLOW;
            for (k, w) in RESPONSE.iter().enumerate() {
                if let Some(past) = day.checked_sub(k + 1) {
                    flow += w * mean_of(&features[past], &precip_cols);
                }
            }
            if let Some(prev) = day.checked_sub(1) {
                flow += TEMP_COEF * (mean_of(&features[prev], &temp_cols) - TEMP_MEAN);
            }
            let noise = 1.0 + self.flow_noise * rng.normal().clamp(-4.0, 4.0);
            records.push(DailyRecord {
                date: self.start + chrono::Days::new(day as u64),
                features: row.clone(),
                flow: flow.max(0.5) * noise,
            });
        }
        Ok(records)
    }
}

pub fn synth_generate(n_days: usize, features: usize, seed: u64) -> Result<Vec<DailyRecord>> {
    SynthConfig::new(n_days, features, seed).generate()
}
