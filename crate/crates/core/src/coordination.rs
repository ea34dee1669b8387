//! Muscle coordination loss with an intramuscular coherence regularizer and
//! a box-constrained per-instance activation solver.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{check_partition, DomainError};
use crate::rng::{derive_seed, rng_from};

/// Deviations from the group mean at or below this are not penalized.
pub const IMR_DEAD_ZONE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoordinationError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error(transparent)]
    BadPartition(#[from] DomainError),
    #[error("moment matrix is invalid: {0}")]
    InvalidMatrix(String),
}

/// Joint torque per unit activation, `joints × muscles`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentMatrix {
    joints: usize,
    muscles: usize,
    data: Vec<f64>,
}

impl MomentMatrix {
    pub fn new(joints: usize, muscles: usize, data: Vec<f64>) -> Result<Self, CoordinationError> {
        if data.len() != joints * muscles {
            return Err(CoordinationError::DimensionMismatch(format!(
                "{} entries for a {joints}x{muscles} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(CoordinationError::InvalidMatrix("non-finite entry".into()));
        }
        for j in 0..joints {
            if data[j * muscles..(j + 1) * muscles].iter().all(|&v| v == 0.0) {
                return Err(CoordinationError::InvalidMatrix(format!("joint {j} has no actuator")));
            }
        }
        Ok(Self { joints, muscles, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, CoordinationError> {
        let muscles = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != muscles) {
            return Err(CoordinationError::DimensionMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), muscles, rows.concat())
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn muscles(&self) -> usize {
        self.muscles
    }

    pub fn get(&self, j: usize, i: usize) -> f64 {
        self.data[j * self.muscles + i]
    }

    pub fn apply(&self, a: &[f64]) -> Vec<f64> {
        (0..self.joints)
            .map(|j| {
                self.data[j * self.muscles..(j + 1) * self.muscles]
                    .iter()
                    .zip(a)
                    .map(|(m, x)| m * x)
                    .sum()
            })
            .collect()
    }

    fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.muscles];
        for (j, rj) in r.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.get(j, i) * rj;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McnWeights {
    pub w_reg: f64,
    pub w_imr: f64,
}

impl Default for McnWeights {
    fn default() -> Self {
        Self { w_reg: 0.01, w_imr: 0.1 }
    }
}

fn group_mean(a: &[f64], g: &[usize]) -> f64 {
    g.iter().map(|&i| a[i]).sum::<f64>() / g.len() as f64
}

/// Squared deviations from the group mean that exceed the dead zone.
pub fn imr_loss(a: &[f64], groups: &[Vec<usize>]) -> Result<f64, CoordinationError> {
    check_partition(groups, a.len())?;
    Ok(imr_unchecked(a, groups))
}

fn imr_unchecked(a: &[f64], groups: &[Vec<usize>]) -> f64 {
    let mut total = 0.0;
    for g in groups {
        let mean = group_mean(a, g);
        for &j in g {
            let d = a[j] - mean;
            if d.abs() > IMR_DEAD_ZONE {
                total += d * d;
            }
        }
    }
    total
}

/// Gradient of the gated penalty, treating the gate as locally constant.
fn imr_grad(a: &[f64], groups: &[Vec<usize>], out: &mut [f64]) {
    for g in groups {
        let mean = group_mean(a, g);
        let n = g.len() as f64;
        let gated_sum: f64 = g
            .iter()
            .map(|&k| a[k] - mean)
            .filter(|d| d.abs() > IMR_DEAD_ZONE)
            .sum();
        for &j in g {
            let d = a[j] - mean;
            let own = if d.abs() > IMR_DEAD_ZONE { 2.0 * d } else { 0.0 };
            out[j] += own - 2.0 * gated_sum / n;
        }
    }
}

fn check_dims(a: &[f64], tau: &[f64], m: &MomentMatrix) -> Result<(), CoordinationError> {
    if a.len() != m.muscles() || tau.len() != m.joints() {
        return Err(CoordinationError::DimensionMismatch(format!(
            "a has {} entries, tau {}, matrix is {}x{}",
            a.len(),
            tau.len(),
            m.joints(),
            m.muscles()
        )));
    }
    Ok(())
}

pub fn mcn_loss(
    a: &[f64],
    tau_target: &[f64],
    m: &MomentMatrix,
    w: &McnWeights,
    groups: &[Vec<usize>],
) -> Result<f64, CoordinationError> {
    check_dims(a, tau_target, m)?;
    check_partition(groups, a.len())?;
    Ok(loss_unchecked(a, tau_target, m, w, groups))
}

fn loss_unchecked(a: &[f64], tau: &[f64], m: &MomentMatrix, w: &McnWeights, groups: &[Vec<usize>]) -> f64 {
    let pred = m.apply(a);
    let track: f64 = tau.iter().zip(&pred).map(|(t, p)| (t - p).powi(2)).sum();
    let reg: f64 = a.iter().map(|x| x * x).sum();
    track + w.w_reg * reg + w.w_imr * imr_unchecked(a, groups)
}

fn gradient(a: &[f64], tau: &[f64], m: &MomentMatrix, w: &McnWeights, groups: &[Vec<usize>]) -> Vec<f64> {
    let pred = m.apply(a);
    let resid: Vec<f64> = pred.iter().zip(tau).map(|(p, t)| p - t).collect();
    let mut g: Vec<f64> = m
        .apply_transpose(&resid)
        .iter()
        .zip(a)
        .map(|(mt, x)| 2.0 * mt + 2.0 * w.w_reg * x)
        .collect();
    if w.w_imr > 0.0 {
        let mut gi = vec![0.0; a.len()];
        imr_grad(a, groups, &mut gi);
        for (gk, gik) in g.iter_mut().zip(gi) {
            *gk += w.w_imr * gik;
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub activations: Vec<f64>,
    pub loss: f64,
    pub initial_loss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Loss after each accepted step of the primary descent.
    pub history: Vec<f64>,
}

struct Descent {
    a: Vec<f64>,
    loss: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn descend(
    mut a: Vec<f64>,
    tau: &[f64],
    m: &MomentMatrix,
    w: &McnWeights,
    groups: &[Vec<usize>],
    max_iters: usize,
) -> Descent {
    let mut loss = loss_unchecked(&a, tau, m, w, groups);
    let mut history = vec![loss];
    let mut step = 1e-2;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let g = gradient(&a, tau, m, w, groups);
        let mut accepted = false;
        while step > 1e-14 {
            let cand: Vec<f64> = a
                .iter()
                .zip(&g)
                .map(|(x, gx)| (x - step * gx).clamp(0.0, 1.0))
                .collect();
            let cl = loss_unchecked(&cand, tau, m, w, groups);
            if cl < loss {
                let moved: f64 = cand.iter().zip(&a).map(|(c, x)| (c - x).powi(2)).sum::<f64>().sqrt();
                let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                a = cand;
                loss = cl;
                history.push(loss);
                accepted = true;
                if moved / scale <= 1e-8 {
                    converged = true;
                }
                step = (step * 1.5).min(1.0);
                break;
            }
            step *= 0.5;
        }
        if !accepted || converged {
            // no descent direction at any step size: stationary
            converged = true;
            break;
        }
    }
    Descent {
        a,
        loss,
        iterations,
        converged,
        history,
    }
}

/// Projected gradient descent on the coordination loss over `[0,1]^n`.
///
/// Starts from a uniform 0.1 activation plus a few seeded random restarts and
/// returns the best result.
pub fn solve_activations(
    tau_target: &[f64],
    m: &MomentMatrix,
    w: &McnWeights,
    groups: &[Vec<usize>],
    max_iters: usize,
    seed: u64,
) -> Result<SolveResult, CoordinationError> {
    let n = m.muscles();
    let init = vec![0.1; n];
    check_dims(&init, tau_target, m)?;
    check_partition(groups, n)?;
    let initial_loss = loss_unchecked(&init, tau_target, m, w, groups);
    let primary = descend(init, tau_target, m, w, groups, max_iters);
    let mut best = (primary.a, primary.loss);
    let mut rng = rng_from(derive_seed(seed, &[n as u64]));
    for _ in 0..4 {
        let start: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let d = descend(start, tau_target, m, w, groups, max_iters);
        if d.loss < best.1 {
            best = (d.a, d.loss);
        }
    }
    Ok(SolveResult {
        activations: best.0,
        loss: best.1,
        initial_loss,
        iterations: primary.iterations,
        converged: primary.converged,
        history: primary.history,
    })
}

/// Largest |a_j − group mean| over all groups.
pub fn max_group_deviation(a: &[f64], groups: &[Vec<usize>]) -> f64 {
    groups
        .iter()
        .flat_map(|g| {
            let mean = group_mean(a, g);
            g.iter().map(move |&j| (a[j] - mean).abs())
        })
        .fold(0.0, f64::max)
}
