//! Similarity between a simulated and a reference time series.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("series is empty")]
    Empty,
    #[error("series contains a non-finite value")]
    NonFinite,
    #[error("series lengths differ: {sim} vs {exp}")]
    LengthMismatch { sim: usize, exp: usize },
    #[error("reference series has zero range")]
    ZeroRange,
    #[error("zero variance")]
    ZeroVariance,
    #[error("need at least {0} samples")]
    TooShort(usize),
}

/// A simulated series and its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPair {
    pub sim: Vec<f64>,
    pub exp: Vec<f64>,
}

impl SeriesPair {
    pub fn new(sim: Vec<f64>, exp: Vec<f64>) -> Result<Self, MetricsError> {
        check_series(&sim)?;
        check_series(&exp)?;
        Ok(Self { sim, exp })
    }

    pub fn nrmse(&self) -> Result<f64, MetricsError> {
        nrmse(&self.sim, &self.exp)
    }

    pub fn pearson_r(&self) -> Result<f64, MetricsError> {
        pearson_r(&self.sim, &self.exp)
    }

    pub fn ndtw(&self) -> Result<f64, MetricsError> {
        ndtw(&self.sim, &self.exp)
    }
}

fn check_series(x: &[f64]) -> Result<(), MetricsError> {
    if x.is_empty() {
        return Err(MetricsError::Empty);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    Ok(())
}

fn check_equal(sim: &[f64], exp: &[f64]) -> Result<(), MetricsError> {
    check_series(sim)?;
    check_series(exp)?;
    if sim.len() != exp.len() {
        return Err(MetricsError::LengthMismatch {
            sim: sim.len(),
            exp: exp.len(),
        });
    }
    Ok(())
}

fn range(x: &[f64]) -> f64 {
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    hi - lo
}

/// RMSE normalized by the reference range.
pub fn nrmse(sim: &[f64], exp: &[f64]) -> Result<f64, MetricsError> {
    check_equal(sim, exp)?;
    let r = range(exp);
    if !(r > 0.0) {
        return Err(MetricsError::ZeroRange);
    }
    let mse = sim.iter().zip(exp).map(|(s, e)| (s - e).powi(2)).sum::<f64>() / sim.len() as f64;
    Ok(mse.sqrt() / r)
}

/// Sample Pearson correlation.
pub fn pearson_r(sim: &[f64], exp: &[f64]) -> Result<f64, MetricsError> {
    check_equal(sim, exp)?;
    if sim.len() < 2 {
        return Err(MetricsError::TooShort(2));
    }
    let n = sim.len() as f64;
    let ms = sim.iter().sum::<f64>() / n;
    let me = exp.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (s, e) in sim.iter().zip(exp) {
        let (ds, de) = (s - ms, e - me);
        sxy += ds * de;
        sxx += ds * ds;
        syy += de * de;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricsError::ZeroVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtwResult {
    /// Sum of |a − b| along the optimal warping path.
    pub distance: f64,
    /// Number of cells on that path.
    pub path_len: usize,
}

/// Unit-step symmetric DTW; equal-cost paths resolve to the shorter one.
pub fn dtw(a: &[f64], b: &[f64]) -> Result<DtwResult, MetricsError> {
    check_series(a)?;
    check_series(b)?;
    let (n, m) = (a.len(), b.len());
    let mut cost = vec![(f64::INFINITY, usize::MAX); n * m];
    for i in 0..n {
        for j in 0..m {
            let local = (a[i] - b[j]).abs();
            let prev = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best = (f64::INFINITY, usize::MAX);
                let cands = [
                    (i > 0 && j > 0).then(|| cost[(i - 1) * m + j - 1]),
                    (i > 0).then(|| cost[(i - 1) * m + j]),
                    (j > 0).then(|| cost[i * m + j - 1]),
                ];
                for c in cands.into_iter().flatten() {
                    if c.0 < best.0 || (c.0 == best.0 && c.1 < best.1) {
                        best = c;
                    }
                }
                best
            };
            cost[i * m + j] = (prev.0 + local, prev.1 + 1);
        }
    }
    let (distance, path_len) = cost[n * m - 1];
    Ok(DtwResult { distance, path_len })
}

/// DTW distance normalized by reference range and optimal path length.
pub fn ndtw(sim: &[f64], exp: &[f64]) -> Result<f64, MetricsError> {
    check_series(sim)?;
    check_series(exp)?;
    let r = range(exp);
    if !(r > 0.0) {
        return Err(MetricsError::ZeroRange);
    }
    let d = dtw(sim, exp)?;
    Ok(d.distance / (r * d.path_len as f64))
}

/// Linear interpolation of `x` onto `n` evenly spaced points spanning the same extent.
pub fn resample_linear(x: &[f64], n: usize) -> Result<Vec<f64>, MetricsError> {
    check_series(x)?;
    if n == 0 {
        return Err(MetricsError::TooShort(1));
    }
    if x.len() == 1 {
        return Ok(vec![x[0]; n]);
    }
    if n == 1 {
        return Ok(vec![x[0]]);
    }
    let scale = (x.len() - 1) as f64 / (n - 1) as f64;
    Ok((0..n)
        .map(|k| {
            let pos = k as f64 * scale;
            let i = (pos.floor() as usize).min(x.len() - 2);
            let w = pos - i as f64;
            x[i] + w * (x[i + 1] - x[i])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nrmse_examples() {
        assert_eq!(nrmse(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        assert_eq!(nrmse(&[1.0, 2.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(nrmse(&[1.0, 2.0], &[1.0, 1.0]), Err(MetricsError::ZeroRange));
        assert!(matches!(nrmse(&[1.0], &[1.0, 2.0]), Err(MetricsError::LengthMismatch { .. })));
    }

    #[test]
    fn pearson_examples() {
        let e = [0.3, -1.0, 2.0, 0.7];
        let s: Vec<f64> = e.iter().map(|x| 2.0 * x + 1.0).collect();
        assert_abs_diff_eq!(pearson_r(&s, &e).unwrap(), 1.0, epsilon = 1e-15);
        let neg: Vec<f64> = e.iter().map(|x| -x).collect();
        assert_abs_diff_eq!(pearson_r(&neg, &e).unwrap(), -1.0, epsilon = 1e-15);
        assert_eq!(pearson_r(&[1.0; 4], &e), Err(MetricsError::ZeroVariance));
    }

    #[test]
    fn dtw_identity_and_small_case() {
        let x = [0.0, 1.0, 0.5, 2.0];
        assert_eq!(ndtw(&x, &x).unwrap(), 0.0);
        assert_eq!(dtw(&x, &x).unwrap().path_len, 4);
        let d = dtw(&[0.0, 0.0, 1.0, 1.0, 0.0], &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(d.distance, 0.0);
        assert_eq!(d.path_len, 5);
    }

    #[test]
    fn resample_endpoints() {
        let r = resample_linear(&[0.0, 1.0, 4.0], 5).unwrap();
        assert_eq!(r, vec![0.0, 0.5, 1.0, 2.5, 4.0]);
        assert_eq!(resample_linear(&[2.0], 3).unwrap(), vec![2.0; 3]);
        assert_eq!(resample_linear(&[2.0, 6.0], 1).unwrap(), vec![2.0]);
    }

    #[test]
    fn series_pair_validates() {
        assert!(SeriesPair::new(vec![], vec![1.0]).is_err());
        assert!(SeriesPair::new(vec![f64::NAN], vec![1.0]).is_err());
        let p = SeriesPair::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(p.nrmse().unwrap(), 0.0);
    }
}
