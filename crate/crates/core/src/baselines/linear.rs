use crate::numcore::dot;
use crate::{Error, Matrix, Result};

const RIDGE: f64 = 1e-8;

/// Least-squares linear regression with intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// The normal equations were singular and were solved with ridge damping.
    pub ridge_damped: bool,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.intercept
    }
}

/// In-place Cholesky factorization; `None` if `a` is not numerically
/// positive definite.
fn cholesky(a: &mut [f64], p: usize) -> Option<()> {
    let scale = (0..p).map(|i| a[i * p + i].abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if !(d > 1e-12 * scale) {
            return None;
        }
        let d = d.sqrt();
        a[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / d;
        }
    }
    Some(())
}

fn cholesky_solve(l: &[f64], p: usize, b: &mut [f64]) {
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * p + k] * b[k];
        }
        b[i] = s / l[i * p + i];
    }
    for i in (0..p).rev() {
        let mut s = b[i];
        for k in i + 1..p {
            s -= l[k * p + i] * b[k];
        }
        b[i] = s / l[i * p + i];
    }
}

/// Solves the centred normal equations `(Xc' Xc) w = Xc' yc`; the intercept
/// is `mean(y) - w . mean(x)`. A singular system is retried with `1e-8` added
/// to the diagonal and the result flagged.
pub fn ols_fit(x: &Matrix, y: &[f64]) -> Result<LinearModel> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::shape(format!("{n} design rows but {} targets", y.len())));
    }
    if n < 2 {
        return Err(Error::argument("least squares needs at least two samples"));
    }
    let x_mean: Vec<f64> = (0..p).map(|j| (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64).collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;

    let mut gram = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    let mut centred = vec![0.0; p];
    for i in 0..n {
        for (c, (v, m)) in centred.iter_mut().zip(x.row(i).iter().zip(&x_mean)) {
            *c = v - m;
        }
        let yc = y[i] - y_mean;
        for a in 0..p {
            rhs[a] += centred[a] * yc;
            let ca = centred[a];
            for b in 0..=a {
                gram[a * p + b] += ca * centred[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[b * p + a] = gram[a * p + b];
        }
    }

    let mut factor = gram.clone();
    let ridge_damped = if cholesky(&mut factor, p).is_some() {
        false
    } else {
        factor = gram;
        for i in 0..p {
            factor[i * p + i] += RIDGE;
        }
        cholesky(&mut factor, p).ok_or_else(|| Error::Data("normal equations are singular even with ridge damping".into()))?;
        true
    };
    let mut weights = rhs;
    cholesky_solve(&factor, p, &mut weights);
    let intercept = y_mean - dot(&weights, &x_mean);
    Ok(LinearModel { weights, intercept, ridge_damped })
}
