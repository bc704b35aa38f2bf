//! Trailing-window statistics and lags over a depth-gridded series. Every
//! output at bin `i` depends on bins `<= i` only.

use crate::domain::{meters_to_bins, Class};
use crate::error::{Error, Result};

/// LWD sensors sit at least this far behind the bit.
pub const MIN_LABEL_LAG_M: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Rolling {
    pub mean: Vec<Option<f64>>,
    pub std: Vec<Option<f64>>,
    /// Newest minus oldest value in the window.
    pub border_diff: Vec<Option<f64>>,
}

/// Trailing window of `window_m` meters; missing when the window is
/// incomplete or contains a missing value.
pub fn rolling_features(series: &[Option<f64>], window_m: f64) -> Result<Rolling> {
    let k = meters_to_bins(window_m)?;
    if k < 2 {
        return Err(Error::FeatureSpec(format!("rolling window {window_m} m spans fewer than 2 bins")));
    }
    let n = series.len();
    let mut out = Rolling {
        mean: vec![None; n],
        std: vec![None; n],
        border_diff: vec![None; n],
    };
    let mut buf = Vec::with_capacity(k);
    for i in (k - 1)..n {
        buf.clear();
        buf.extend(series[i + 1 - k..=i].iter().map_while(|v| *v));
        if buf.len() < k {
            continue;
        }
        let m = buf.iter().sum::<f64>() / k as f64;
        let var = buf.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / k as f64;
        out.mean[i] = Some(m);
        out.std[i] = Some(var.sqrt());
        out.border_diff[i] = Some(buf[k - 1] - buf[0]);
    }
    Ok(out)
}

/// Value `lag_m` meters above the current bin.
pub fn lag_feature<T: Copy>(series: &[Option<T>], lag_m: f64) -> Result<Vec<Option<T>>> {
    let d = meters_to_bins(lag_m)?;
    Ok((0..series.len())
        .map(|i| i.checked_sub(d).and_then(|j| series[j]))
        .collect())
}

pub fn lag_features(series: &[Option<f64>], lags_m: &[f64]) -> Result<Vec<Vec<Option<f64>>>> {
    lags_m.iter().map(|&l| lag_feature(series, l)).collect()
}

/// True class `lag_m` meters behind the bit. Lags shorter than
/// [`MIN_LABEL_LAG_M`] would expose at-bit labels and are rejected.
pub fn extra_feature(labels: &[Option<Class>], lag_m: f64) -> Result<Vec<Option<f64>>> {
    if !(lag_m >= MIN_LABEL_LAG_M) {
        return Err(Error::FeatureSpec(format!(
            "label lag {lag_m} m is below the {MIN_LABEL_LAG_M} m sensor offset"
        )));
    }
    Ok(lag_feature(labels, lag_m)?
        .into_iter()
        .map(|c| c.map(f64::from))
        .collect())
}

pub fn extra_features(labels: &[Option<Class>], lags_m: &[f64]) -> Result<Vec<Vec<Option<f64>>>> {
    lags_m.iter().map(|&l| extra_feature(labels, l)).collect()
}
