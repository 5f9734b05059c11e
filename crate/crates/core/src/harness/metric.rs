use crate::{Error, Result};

/// Observed flows at or below this magnitude make the relative error undefined.
pub const ZERO_FLOW_GUARD: f64 = 1e-6;

/// Mean of `|predict - real| / real`, both in original units.
pub fn relative_error(predict: &[f64], real: &[f64]) -> Result<f64> {
    if predict.len() != real.len() {
        return Err(Error::shape(format!("{} predictions for {} observations", predict.len(), real.len())));
    }
    if real.is_empty() {
        return Err(Error::argument("relative error of an empty set"));
    }
    let near_zero: Vec<String> =
        real.iter().enumerate().filter(|(_, r)| r.abs() <= ZERO_FLOW_GUARD).map(|(i, _)| i.to_string()).collect();
    if !near_zero.is_empty() {
        return Err(Error::Data(format!(
            "observed flow is within {ZERO_FLOW_GUARD} of zero at indices {}",
            near_zero.join(", ")
        )));
    }
    let total: f64 = predict.iter().zip(real).map(|(p, r)| (p - r).abs() / r).sum();
    Ok(total / real.len() as f64)
}

/// Mean and sample standard deviation (`n - 1` denominator, 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}
