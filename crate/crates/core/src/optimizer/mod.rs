//! Metabolic calibration against a preferred walking speed, PWS evaluation,
//! per-speed control optimization on a surrogate, the end-to-end pipeline and
//! severity trend fitting.

pub mod bfgs;
pub mod pipeline;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    Bound, ExoControlParams, GaitParams, MeeParams, PathologyProfile, DELAY_BOUNDS, GAIN_BOUNDS, STEP_FREQUENCY_BOUNDS,
    STEP_LENGTH_BOUNDS,
};
use crate::generator::{rollout, train_generator, GeneratorConfig, GeneratorError};
use crate::rng::{derive_seed, seed_for_values};
use crate::surrogate::{input_vector, lhs_sample, normalize, uniform_grid, SurrogateNet};
use bfgs::{minimize_box, BfgsOptions};
pub use pipeline::{generate_dataset, run_pipeline, PipelineError, PipelineOutput, SampleSpace, Stage};

/// Width of the smoothing used for absolute values in the optimizer.
pub const ABS_EPS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("{0} is empty")]
    Empty(&'static str),
    #[error("surrogate expects {got} inputs, optimizer needs 5")]
    InputDim { got: usize },
    #[error("severities are all equal; slope undefined")]
    DegenerateX,
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PwsResult {
    /// m/s
    pub pws: f64,
    /// `(speed, min CoT at that speed)`, ascending speed.
    pub cot_curve: Vec<(f64, f64)>,
    pub argmin_gait: GaitParams,
    pub argmin_cot: f64,
    /// Mean CoT of every grid point, in grid order.
    pub point_cots: Vec<(GaitParams, f64)>,
}

impl PwsResult {
    /// Index of the curve minimum when it is unique and not at either end.
    pub fn interior_minimum(&self) -> Option<usize> {
        let c = &self.cot_curve;
        let (idx, &(_, best)) = c.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))?;
        let unique = c.iter().filter(|(_, v)| *v == best).count() == 1;
        (unique && idx > 0 && idx + 1 < c.len()).then_some(idx)
    }
}

/// `n_lengths × n_freqs` gait grid spanning the gait bounds.
pub fn pws_grid(n_lengths: usize, n_freqs: usize) -> Vec<GaitParams> {
    uniform_grid(&[STEP_LENGTH_BOUNDS, STEP_FREQUENCY_BOUNDS], &[n_lengths, n_freqs])
        .into_iter()
        .map(|p| GaitParams::new(p[0], p[1]))
        .collect()
}

/// Seed of rollout `r` at gait `g`; depends only on the point, not its grid position.
pub fn pws_rollout_seed(seed: u64, g: &GaitParams, r: usize) -> u64 {
    derive_seed(seed_for_values(seed, &[g.step_length, g.step_frequency]), &[r as u64])
}

/// Mean unassisted CoT over `rollouts` seeded rollouts at every grid point;
/// the minimum picks the preferred speed (ties toward the lower speed).
pub fn eval_pws(
    cfg: &GeneratorConfig,
    mee: &MeeParams,
    grid: &[GaitParams],
    rollouts: usize,
    seed: u64,
) -> Result<PwsResult, OptimizerError> {
    if grid.is_empty() {
        return Err(OptimizerError::Empty("PWS grid"));
    }
    let rollouts = rollouts.max(1);
    let point_cots = grid
        .par_iter()
        .map(|g| {
            let mut acc = 0.0;
            for r in 0..rollouts {
                acc += rollout(cfg, g, &ExoControlParams::off(), &PathologyProfile::healthy(), mee, pws_rollout_seed(seed, g, r))?.cot;
            }
            Ok((*g, acc / rollouts as f64))
        })
        .collect::<Result<Vec<_>, GeneratorError>>()?;

    let key = |(g, c): &(GaitParams, f64)| (*c, g.speed(), g.step_length, g.step_frequency);
    let &(argmin_gait, argmin_cot) = point_cots
        .iter()
        .min_by(|a, b| {
            let (ka, kb) = (key(a), key(b));
            ka.0.total_cmp(&kb.0)
                .then(ka.1.total_cmp(&kb.1))
                .then(ka.2.total_cmp(&kb.2))
                .then(ka.3.total_cmp(&kb.3))
        })
        .expect("non-empty grid");

    let mut by_speed: Vec<(f64, f64)> = point_cots.iter().map(|(g, c)| (g.speed(), *c)).collect();
    by_speed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut cot_curve: Vec<(f64, f64)> = Vec::new();
    for (v, c) in by_speed {
        match cot_curve.last_mut() {
            Some(last) if last.0 == v => last.1 = last.1.min(c),
            _ => cot_curve.push((v, c)),
        }
    }
    Ok(PwsResult {
        pws: argmin_gait.speed(),
        cot_curve,
        argmin_gait,
        argmin_cot,
        point_cots,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub alpha: f64,
    pub beta: f64,
    pub pws: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub alpha_star: f64,
    pub beta_star: f64,
    pub v_real: f64,
    pub table: Vec<CalibrationRow>,
}

/// Pick the `(α, β)` whose simulated PWS is closest to `v_real`. Every
/// candidate sees the same rollout seeds; ties go to the first listed.
pub fn calibrate_mee(
    candidates: &[(f64, f64)],
    v_real: f64,
    cfg: &GeneratorConfig,
    basal_rate: f64,
    grid: &[GaitParams],
    rollouts: usize,
    seed: u64,
) -> Result<CalibrationResult, OptimizerError> {
    if candidates.is_empty() {
        return Err(OptimizerError::Empty("candidate list"));
    }
    let mut table = Vec::with_capacity(candidates.len());
    for &(alpha, beta) in candidates {
        let generator = train_generator(cfg, &MeeParams::new(alpha, beta, basal_rate))?;
        let res = eval_pws(&generator.cfg, &generator.mee, grid, rollouts, seed)?;
        table.push(CalibrationRow {
            alpha,
            beta,
            pws: res.pws,
            error: (v_real - res.pws).abs(),
        });
    }
    let best = table
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.error.total_cmp(&b.1.error).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("non-empty table");
    Ok(CalibrationResult {
        alpha_star: table[best].alpha,
        beta_star: table[best].beta,
        v_real,
        table,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    /// Weight on the summed gain magnitude.
    pub lambda1: f64,
    /// Weight on gain and delay changes between adjacent speeds.
    pub lambda2: f64,
    pub starts: usize,
    pub kappa_bounds: Bound,
    pub delay_bounds: Bound,
    /// Severity fed to the surrogate.
    pub severity: f64,
    pub max_iters: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lambda1: 1e-3,
            lambda2: 1e-2,
            starts: 16,
            kappa_bounds: GAIN_BOUNDS,
            delay_bounds: DELAY_BOUNDS,
            severity: 0.0,
            max_iters: 300,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSolution {
    pub gait: GaitParams,
    pub kappa: f64,
    pub delta_t: f64,
    pub predicted_cot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub starts: usize,
    pub converged_starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub per_speed: Vec<SpeedSolution>,
    pub objective: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub severity: f64,
    pub diagnostics: SolverDiagnostics,
}

/// Summed surrogate CoT plus the gain-magnitude and cross-speed smoothness penalties.
pub fn control_objective(
    net: &SurrogateNet,
    gaits: &[GaitParams],
    controls: &[ExoControlParams],
    severity: f64,
    lambda1: f64,
    lambda2: f64,
) -> f64 {
    let mut total = 0.0;
    for (g, c) in gaits.iter().zip(controls) {
        total += net.predict_cot(g, c, severity) + lambda1 * c.gain_kappa.abs();
    }
    for w in controls.windows(2) {
        total += lambda2 * ((w[1].gain_kappa - w[0].gain_kappa).abs() + (w[1].delay_dt - w[0].delay_dt).abs());
    }
    total
}

fn smooth_abs(x: f64) -> (f64, f64) {
    let s = (x * x + ABS_EPS * ABS_EPS).sqrt();
    (s, x / s)
}

/// Smoothed objective and its gradient in unit-box coordinates
/// `u = [κ̃_0, Δt̃_0, κ̃_1, Δt̃_1, ...]`.
fn smoothed_objective(
    net: &SurrogateNet,
    gaits: &[GaitParams],
    cfg: &OptimizerConfig,
    u: &[f64],
) -> (f64, Vec<f64>) {
    let (kb, db) = (cfg.kappa_bounds, cfg.delay_bounds);
    let (sk, sd) = (net.input_bounds[2], net.input_bounds[3]);
    let m = gaits.len();
    let kap: Vec<f64> = (0..m).map(|n| kb.denormalize(u[2 * n])).collect();
    let del: Vec<f64> = (0..m).map(|n| db.denormalize(u[2 * n + 1])).collect();
    let mut f = 0.0;
    let mut gk = vec![0.0; m];
    let mut gd = vec![0.0; m];
    for n in 0..m {
        let c = ExoControlParams::new(kap[n], del[n]);
        let xn = normalize(&input_vector(&gaits[n], &c, cfg.severity), &net.input_bounds);
        f += net.forward(&xn);
        let grad = net.input_gradient(&xn);
        gk[n] += grad[2] / sk.width();
        gd[n] += grad[3] / sd.width();
        let (a, da) = smooth_abs(kap[n]);
        f += cfg.lambda1 * a;
        gk[n] += cfg.lambda1 * da;
    }
    for n in 0..m.saturating_sub(1) {
        let (a, da) = smooth_abs(kap[n + 1] - kap[n]);
        let (b, db_) = smooth_abs(del[n + 1] - del[n]);
        f += cfg.lambda2 * (a + b);
        gk[n + 1] += cfg.lambda2 * da;
        gk[n] -= cfg.lambda2 * da;
        gd[n + 1] += cfg.lambda2 * db_;
        gd[n] -= cfg.lambda2 * db_;
    }
    let mut g = vec![0.0; 2 * m];
    for n in 0..m {
        g[2 * n] = gk[n] * kb.width();
        g[2 * n + 1] = gd[n] * db.width();
    }
    (f, g)
}

/// Multi-start projected BFGS over per-speed `(κ_n, Δt_n)`; starts are a
/// Latin hypercube over the control box, each shared by all speeds. The best
/// start by true (unsmoothed) objective wins, ties to the lowest index.
pub fn optimize_controls(
    net: &SurrogateNet,
    gaits: &[GaitParams],
    cfg: &OptimizerConfig,
    seed: u64,
) -> Result<OptimizationResult, OptimizerError> {
    if gaits.is_empty() {
        return Err(OptimizerError::Empty("gait list"));
    }
    if net.input_dim() != 5 {
        return Err(OptimizerError::InputDim { got: net.input_dim() });
    }
    let starts = cfg.starts.max(1);
    let m = gaits.len();
    let unit = Bound::new(0.0, 1.0);
    let start_points = lhs_sample(&[unit, unit], starts, seed);
    let opts = BfgsOptions {
        max_iters: cfg.max_iters,
        ..Default::default()
    };
    let (lo, hi) = (vec![0.0; 2 * m], vec![1.0; 2 * m]);
    let to_controls = |u: &[f64]| -> Vec<ExoControlParams> {
        (0..m)
            .map(|n| {
                ExoControlParams::new(
                    cfg.kappa_bounds.clamp(cfg.kappa_bounds.denormalize(u[2 * n])),
                    cfg.delay_bounds.clamp(cfg.delay_bounds.denormalize(u[2 * n + 1])),
                )
            })
            .collect()
    };
    let runs: Vec<(f64, Vec<ExoControlParams>, usize, bool)> = start_points
        .par_iter()
        .map(|p| {
            let x0: Vec<f64> = (0..m).flat_map(|_| [p[0], p[1]]).collect();
            let out = minimize_box(|u| smoothed_objective(net, gaits, cfg, u), &x0, &lo, &hi, &opts);
            let controls = to_controls(&out.x);
            let obj = control_objective(net, gaits, &controls, cfg.severity, cfg.lambda1, cfg.lambda2);
            (obj, controls, out.iterations, out.converged)
        })
        .collect();
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .expect("at least one start");
    let (objective, controls, iterations, converged) = runs[best].clone();
    let per_speed = gaits
        .iter()
        .zip(&controls)
        .map(|(g, c)| SpeedSolution {
            gait: *g,
            kappa: c.gain_kappa,
            delta_t: c.delay_dt,
            predicted_cot: net.predict_cot(g, c, cfg.severity),
        })
        .collect();
    Ok(OptimizationResult {
        per_speed,
        objective,
        lambda1: cfg.lambda1,
        lambda2: cfg.lambda2,
        severity: cfg.severity,
        diagnostics: SolverDiagnostics {
            iterations,
            converged,
            starts,
            converged_starts: runs.iter().filter(|r| r.3).count(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(severity, optimal κ)`; R² is the squared
/// Pearson correlation, taken as 0 when κ does not vary.
pub fn severity_trend(points: &[(f64, f64)]) -> Result<TrendFit, OptimizerError> {
    if points.len() < 2 {
        return Err(OptimizerError::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(OptimizerError::DegenerateX);
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 0.0 } else { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) };
    Ok(TrendFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}
