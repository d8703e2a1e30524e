//! Histogram encoding of a device population and feature/label scalers.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DeviceProfile, PriorityClass, ProtocolParams};

pub const DEFAULT_INTERVALS: usize = 16;

/// Per-class device counts over `intervals` equal rate bins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileEncoding {
    /// `counts[class][bin]`, classes in HP/RP/LP order.
    pub counts: [Vec<u32>; 3],
}

/// Bins rates into `intervals` bins of `[lambda_min, lambda_max]`; the
/// last bin is closed on the right.
pub fn encode_profile(profiles: &[DeviceProfile], intervals: usize, lambda_min: f64, lambda_max: f64) -> Result<ProfileEncoding> {
    if intervals == 0 || !(lambda_max > lambda_min) {
        return Err(Error::Shape(format!("bad encoding grid: {intervals} bins over [{lambda_min}, {lambda_max}]")));
    }
    let width = (lambda_max - lambda_min) / intervals as f64;
    let mut counts = [vec![0; intervals], vec![0; intervals], vec![0; intervals]];
    for p in profiles {
        if !(lambda_min..=lambda_max).contains(&p.rate) {
            return Err(Error::Range { rate: p.rate, min: lambda_min, max: lambda_max });
        }
        let bin = (((p.rate - lambda_min) / width) as usize).min(intervals - 1);
        counts[p.class.index()][bin] += 1;
    }
    Ok(ProfileEncoding { counts })
}

impl ProfileEncoding {
    pub fn class_total(&self, class: PriorityClass) -> u32 {
        self.counts[class.index()].iter().sum()
    }

    /// `c_h, c_r, c_l, n_m, r_h, r_r, r_l`.
    pub fn features(&self, params: &ProtocolParams) -> Vec<f64> {
        let mut f: Vec<f64> = self.counts.iter().flatten().map(|&c| c as f64).collect();
        f.extend([params.n_m, params.r_h, params.r_r, params.r_l].map(|v| v as f64));
        f
    }
}

pub fn feature_names(intervals: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(3 * intervals + 4);
    for c in ["h", "r", "l"] {
        names.extend((1..=intervals).map(|i| format!("c_{c}_{i}")));
    }
    names.extend(["n_m", "r_h", "r_r", "r_l"].map(String::from));
    names
}

/// Per-feature z-score with population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Normalizer {
    pub fn fit(x: ArrayView2<f64>) -> Result<Self> {
        if x.nrows() < 2 {
            return Err(Error::Shape(format!("need at least 2 rows to fit a normalizer, got {}", x.nrows())));
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let std = x.std_axis(Axis(0), 0.0);
        Ok(Self { mean, std })
    }

    /// Zero-variance features map to 0.
    pub fn apply(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::Shape(format!("expected {} features, got {}", self.mean.len(), x.ncols())));
        }
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.mean[j], self.std[j]);
            col.mapv_inplace(|v| if s > 0.0 { (v - m) / s } else { 0.0 });
        }
        Ok(out)
    }
}

pub fn zscore_fit_apply(train: ArrayView2<f64>) -> Result<(Normalizer, Array2<f64>)> {
    let n = Normalizer::fit(train)?;
    let z = n.apply(train)?;
    Ok((n, z))
}

/// Per-dimension min-max scaling to `[0, 1]`; constant dimensions map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScaler {
    pub min: Array1<f64>,
    pub max: Array1<f64>,
}

impl LabelScaler {
    pub fn fit(y: ArrayView2<f64>) -> Self {
        let min = y.fold_axis(Axis(0), f64::INFINITY, |a, &b| a.min(b));
        let max = y.fold_axis(Axis(0), f64::NEG_INFINITY, |a, &b| a.max(b));
        Self { min, max }
    }

    pub fn scale(&self, y: ArrayView2<f64>) -> Array2<f64> {
        let mut out = y.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, span) = (self.min[j], self.max[j] - self.min[j]);
            col.mapv_inplace(|v| if span > 0.0 { (v - lo) / span } else { 0.0 });
        }
        out
    }

    pub fn unscale(&self, y: ArrayView2<f64>) -> Array2<f64> {
        let mut out = y.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, span) = (self.min[j], self.max[j] - self.min[j]);
            col.mapv_inplace(|v| lo + v * span);
        }
        out
    }
}
