use std::collections::BTreeSet;

use super::DailyRecord;
use crate::{Error, Matrix, Result};

/// One lookback window and the flow of the following day.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// `lookback x features`, oldest day first.
    pub x: Matrix,
    pub y: f64,
    /// Record index of the predicted day.
    pub target_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowedDataset {
    pub lookback: usize,
    pub samples: Vec<Sample>,
}

impl WindowedDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn select(&self, indices: &[usize]) -> Vec<Sample> {
        indices.iter().map(|&i| self.samples[i].clone()).collect()
    }

    pub fn features(&self) -> usize {
        self.samples.first().map_or(0, |s| s.x.cols())
    }
}

/// Overlapping windows with stride one: sample `i` covers records
/// `i..i+lookback` and predicts the flow of record `i + lookback`.
pub fn make_windows(records: &[DailyRecord], lookback: usize) -> Result<WindowedDataset> {
    if lookback == 0 {
        return Err(Error::argument("lookback must be at least one day"));
    }
    if records.len() <= lookback {
        return Err(Error::argument(format!(
            "{} records are too few for a {lookback}-day lookback",
            records.len()
        )));
    }
    let width = records[0].features.len();
    if width == 0 || records.iter().any(|r| r.features.len() != width) {
        return Err(Error::shape("records must share a non-zero feature count"));
    }
    let samples = (0..records.len() - lookback)
        .map(|i| {
            let data = records[i..i + lookback].iter().flat_map(|r| r.features.iter().copied()).collect();
            Sample {
                x: Matrix::new(lookback, width, data).expect("window shape"),
                y: records[i + lookback].flow,
                target_index: i + lookback,
            }
        })
        .collect();
    Ok(WindowedDataset { lookback, samples })
}

/// Every record index touched by the given windows, target day included.
pub fn window_rows(windows: &[usize], lookback: usize) -> Vec<usize> {
    let rows: BTreeSet<usize> = windows.iter().flat_map(|&w| w..=w + lookback).collect();
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn series(n: usize) -> Vec<DailyRecord> {
        let start = NaiveDate::from_ymd_opt(1990, 3, 1).unwrap();
        (0..n)
            .map(|i| DailyRecord {
                date: start + chrono::Days::new(i as u64),
                features: vec![i as f64, -(i as f64)],
                flow: 100.0 + i as f64,
            })
            .collect()
    }

    #[test]
    fn ten_records_seven_days() {
        let ds = make_windows(&series(10), 7).unwrap();
        assert_eq!(ds.len(), 3);
        let first = &ds.samples[0];
        assert_eq!(first.x.shape(), (7, 2));
        for t in 0..7 {
            assert_eq!(first.x.row(t), &[t as f64, -(t as f64)]);
        }
        assert_eq!(first.y, 107.0);
        assert_eq!(first.target_index, 7);
    }

    #[test]
    fn one_day_lookback() {
        let ds = make_windows(&series(5), 1).unwrap();
        assert_eq!(ds.len(), 4);
        for (i, s) in ds.samples.iter().enumerate() {
            assert_eq!(s.x.row(0)[0], i as f64);
            assert_eq!(s.y, 101.0 + i as f64);
        }
    }

    #[test]
    fn too_few_records() {
        assert!(matches!(make_windows(&series(7), 7), Err(Error::Argument(_))));
        assert!(matches!(make_windows(&series(7), 0), Err(Error::Argument(_))));
    }

    #[test]
    fn count_law_holds_for_every_lookback() {
        let rs = series(40);
        for l in 1..40 {
            assert_eq!(make_windows(&rs, l).unwrap().len(), 40 - l);
        }
    }

    #[test]
    fn rows_include_targets() {
        assert_eq!(window_rows(&[0, 5], 2), vec![0, 1, 2, 5, 6, 7]);
    }
}
