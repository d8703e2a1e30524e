//! Fit metrics.

use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Explained-variance ratio `sum (yhat - ybar)^2 / sum (y - ybar)^2`.
pub fn r_squared(pred: &[f64], y: &[f64]) -> Result<f64> {
    let (num, den) = sums(pred, y)?;
    Ok(num / den)
}

/// Conventional coefficient of determination `1 - SS_res / SS_tot`.
pub fn r_squared_conventional(pred: &[f64], y: &[f64]) -> Result<f64> {
    sums(pred, y)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = pred.iter().zip(y).map(|(p, t)| (p - t).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|t| (t - mean).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

fn sums(pred: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if pred.len() != y.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", pred.len(), y.len())));
    }
    if y.len() < 2 {
        return Err(Error::Degenerate);
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let den: f64 = y.iter().map(|t| (t - mean).powi(2)).sum();
    if den == 0.0 {
        return Err(Error::Degenerate);
    }
    let num: f64 = pred.iter().map(|p| (p - mean).powi(2)).sum();
    Ok((num, den))
}

/// Column-wise R-squared, averaged over columns whose labels vary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RSquared {
    pub printed: f64,
    pub conventional: f64,
    /// `None` for constant label columns, which are left out of the averages.
    pub per_output: Vec<Option<f64>>,
}

pub fn r_squared_columns(pred: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<RSquared> {
    if pred.dim() != y.dim() {
        return Err(Error::Shape(format!("predictions {:?} vs labels {:?}", pred.dim(), y.dim())));
    }
    let mut per_output = Vec::with_capacity(y.ncols());
    let (mut printed, mut conventional, mut used) = (0.0, 0.0, 0usize);
    for (p, t) in pred.axis_iter(Axis(1)).zip(y.axis_iter(Axis(1))) {
        let (p, t) = (p.to_vec(), t.to_vec());
        match r_squared(&p, &t) {
            Ok(r) => {
                printed += r;
                conventional += r_squared_conventional(&p, &t)?;
                used += 1;
                per_output.push(Some(r));
            }
            Err(Error::Degenerate) => per_output.push(None),
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::Degenerate);
    }
    Ok(RSquared { printed: printed / used as f64, conventional: conventional / used as f64, per_output })
}

/// Share of rows where `pred >= 0.5` agrees with `label >= 0.5`.
pub fn bit_accuracy(pred: &[f64], labels: &[f64]) -> f64 {
    if labels.is_empty() {
        return 1.0;
    }
    let hits = pred.iter().zip(labels).filter(|(p, l)| (**p >= 0.5) == (**l >= 0.5)).count();
    hits as f64 / labels.len() as f64
}

pub fn mse(pred: ArrayView2<f64>, y: ArrayView2<f64>) -> f64 {
    let d = &pred - &y;
    d.iter().map(|v| v * v).sum::<f64>() / d.len().max(1) as f64
}
