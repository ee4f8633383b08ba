//! Three-point low-pass moving-average (LPMA) noise reduction.
//!
//! One pass replaces each interior point by `y_k/2 + (y_{k-1} + y_{k+1})/4`
//! and each endpoint by the two-point average with its single neighbor.
//! Feeding the output back `q` times widens the effective window to
//! `2q + 1` points. The weights sum to one at every index, so constants are
//! fixed points of the filter.

use crate::observation::ObservationSeries;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Outcome of the preprocessing stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    /// Number of passes applied.
    pub q: usize,
    /// Signal-to-noise gain, measured against ground truth when available,
    /// otherwise taken from configuration.
    pub r0: f64,
}

/// One LPMA pass.
pub fn lpma_once(values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::FilterTooShort(n));
    }
    let mut out = Vec::with_capacity(n);
    out.push(0.5 * values[0] + 0.5 * values[1]);
    for k in 1..n - 1 {
        out.push(0.5 * values[k] + 0.25 * (values[k - 1] + values[k + 1]));
    }
    out.push(0.5 * values[n - 1] + 0.5 * values[n - 2]);
    Ok(out)
}

/// Applies `q` LPMA passes to the series, recomputing its deviation scale
/// from the filtered values. `q = 0` returns the series unchanged.
pub fn lpma(series: &ObservationSeries, q: usize) -> Result<ObservationSeries> {
    if q == 0 {
        return Ok(series.clone());
    }
    let mut values = series.values().to_vec();
    for _ in 0..q {
        values = lpma_once(&values)?;
    }
    series.with_filtered_values(values)
}

/// Signal-to-noise gain of a filtered series against the known clean signal:
/// the ratio of raw to filtered residual norms.
pub fn snr_gain(clean: &[f64], noisy: &[f64], filtered: &[f64]) -> Result<f64> {
    if clean.len() != noisy.len() || clean.len() != filtered.len() {
        return Err(Error::DimensionMismatch(format!(
            "snr_gain needs equal lengths, got {}, {}, {}",
            clean.len(),
            noisy.len(),
            filtered.len()
        )));
    }
    let raw: f64 = noisy
        .iter()
        .zip(clean)
        .map(|(n, c)| (n - c).powi(2))
        .sum();
    let residual: f64 = filtered
        .iter()
        .zip(clean)
        .map(|(f, c)| (f - c).powi(2))
        .sum();
    if residual == 0.0 {
        return Err(Error::ZeroResidual);
    }
    Ok((raw / residual).sqrt())
}
