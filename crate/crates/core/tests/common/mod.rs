//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use exoplore::domain::{ExoControlParams, GaitParams, MeeParams, PathologyProfile};
use exoplore::generator::{rollout, GeneratorConfig};

/// Minimum DTW cost by enumerating every monotone warping path.
pub fn brute_dtw(a: &[f64], b: &[f64]) -> f64 {
    fn walk(a: &[f64], b: &[f64], i: usize, j: usize, acc: f64, best: &mut f64) {
        let acc = acc + (a[i] - b[j]).abs();
        if i + 1 == a.len() && j + 1 == b.len() {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, i + 1, j + 1, acc, best);
        }
        if i + 1 < a.len() {
            walk(a, b, i + 1, j, acc, best);
        }
        if j + 1 < b.len() {
            walk(a, b, i, j + 1, acc, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(a, b, 0, 0, 0.0, &mut best);
    best
}

pub fn direct_nrmse(sim: &[f64], exp: &[f64]) -> f64 {
    let n = sim.len() as f64;
    let mse = sim.iter().zip(exp).map(|(s, e)| (s - e) * (s - e)).sum::<f64>() / n;
    let mut sorted = exp.to_vec();
    sorted.sort_by(f64::total_cmp);
    mse.sqrt() / (sorted[sorted.len() - 1] - sorted[0])
}

/// Pearson r from raw moment sums.
pub fn direct_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxx = x.iter().map(|v| v * v).sum::<f64>();
    let syy = y.iter().map(|v| v * v).sum::<f64>();
    let sxy = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

/// Least-squares line and R² computed from residuals.
pub fn ols(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let mean = sy / n;
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 0.0 } else { 1.0 - ss_res / ss_tot };
    (slope, intercept, r2)
}

/// Sample standard deviation over mean.
pub fn coefficient_of_variation(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    var.sqrt() / m
}

pub fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

/// Argmin of `f` over an `n × m` grid spanning `[x0, x1] × [y0, y1]`; first hit wins ties.
pub fn grid_argmin(f: impl Fn(f64, f64) -> f64, (x0, x1, n): (f64, f64, usize), (y0, y1, m): (f64, f64, usize)) -> (f64, f64, f64) {
    let mut best = (f64::INFINITY, x0, y0);
    for i in 0..n {
        let x = x0 + (x1 - x0) * i as f64 / (n - 1) as f64;
        for j in 0..m {
            let y = y0 + (y1 - y0) * j as f64 / (m - 1) as f64;
            let v = f(x, y);
            if v < best.0 {
                best = (v, x, y);
            }
        }
    }
    best
}

/// Unassisted healthy CoT at every gait, one rollout each with a fixed seed.
pub fn unassisted_cots(cfg: &GeneratorConfig, mee: &MeeParams, grid: &[GaitParams], seed: u64) -> Vec<f64> {
    grid.iter()
        .map(|g| rollout(cfg, g, &ExoControlParams::off(), &PathologyProfile::healthy(), mee, seed).unwrap().cot)
        .collect()
}

/// Equal-width grid of `n` values on `[lo, hi]`.
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
