//! Sample, simulate, fit, optimize.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{optimize_controls, OptimizationResult, OptimizerConfig};
use crate::domain::{Bound, ExoControlParams, GaitParams, PathologyKind, PathologyProfile};
use crate::generator::{GeneratorError, TrainedGenerator};
use crate::io::{self, Dataset, DatasetRow};
use crate::rng::derive_seed;
use crate::surrogate::{lhs_sample, train, SurrogateNet, TrainConfig, INPUT_BOUNDS};

/// Sampling domain: physical ranges of the five surrogate inputs and the
/// pathology whose severity the fifth input scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSpace {
    pub bounds: [Bound; 5],
    pub pathology: PathologyKind,
}

/// Step lengths and cadences of ordinary walking; keeps slow-shuffle gaits with
/// very large CoT from dominating the fit.
pub const WALKING_STEP_LENGTH: Bound = Bound::new(0.3, 0.8);
pub const WALKING_STEP_FREQUENCY: Bound = Bound::new(1.4, 2.2);

impl SampleSpace {
    pub fn walking_band(pathology: PathologyKind) -> Self {
        let mut bounds = INPUT_BOUNDS;
        bounds[0] = WALKING_STEP_LENGTH;
        bounds[1] = WALKING_STEP_FREQUENCY;
        Self { bounds, pathology }
    }
}

impl Default for SampleSpace {
    fn default() -> Self {
        Self {
            bounds: INPUT_BOUNDS,
            pathology: PathologyKind::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Sampling,
    Generation,
    Training,
    Optimization,
    Persistence,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Sampling => "sampling",
            Stage::Generation => "generation",
            Stage::Training => "training",
            Stage::Optimization => "optimization",
            Stage::Persistence => "persistence",
        })
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

fn fail(stage: Stage) -> impl Fn(&dyn std::fmt::Display) -> PipelineError {
    move |e| PipelineError {
        stage,
        message: e.to_string(),
    }
}

/// One rollout per LHS point of `space`; row `i` uses seed `derive(seed, [2, i])`.
pub fn generate_dataset(gen: &TrainedGenerator, space: &SampleSpace, n: usize, seed: u64) -> Result<Dataset, GeneratorError> {
    let points = lhs_sample(&space.bounds, n, derive_seed(seed, &[1]));
    let rows = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let gait = GaitParams::new(p[0], p[1]);
            let control = ExoControlParams::new(p[2], p[3]);
            let pathology = PathologyProfile::new(space.pathology, p[4]);
            let s = derive_seed(seed, &[2, i as u64]);
            let r = gen.rollout(&gait, &control, &pathology, s)?;
            Ok(DatasetRow {
                gait,
                control,
                pathology,
                seed: s,
                cot: r.cot,
            })
        })
        .collect::<Result<Vec<_>, GeneratorError>>()?;
    Ok(Dataset { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub dataset: Dataset,
    pub net: SurrogateNet,
    pub result: OptimizationResult,
}

/// Latin-hypercube sample `n` points of `space`, roll each out, fit the
/// surrogate, then optimize controls for `gaits`. When `out_dir` is given the
/// dataset, checkpoint, loss curve and result are written there.
#[allow(clippy::too_many_arguments)]
pub fn run_pipeline(
    space: &SampleSpace,
    gen: &TrainedGenerator,
    gaits: &[GaitParams],
    n: usize,
    surrogate: &TrainConfig,
    optimizer: &OptimizerConfig,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<PipelineOutput, PipelineError> {
    if n == 0 {
        return Err(fail(Stage::Sampling)(&"sample count N must be positive"));
    }
    if space.bounds.iter().any(|b| !(b.hi > b.lo)) {
        return Err(fail(Stage::Sampling)(&"every sampling bound needs hi > lo"));
    }
    let dataset = generate_dataset(gen, space, n, seed).map_err(|e| fail(Stage::Generation)(&e))?;
    let net = train(&dataset.samples(&space.bounds), &space.bounds, surrogate, derive_seed(seed, &[3]))
        .map_err(|e| fail(Stage::Training)(&e))?;
    let result = optimize_controls(&net, gaits, optimizer, derive_seed(seed, &[4])).map_err(|e| fail(Stage::Optimization)(&e))?;
    if let Some(dir) = out_dir {
        let persist = || -> Result<(), io::IoError> {
            std::fs::create_dir_all(dir).map_err(|source| io::IoError::Io {
                path: dir.display().to_string(),
                source,
            })?;
            io::write_dataset(&dataset, &dir.join("dataset.csv"))?;
            io::write_text(&net.to_json(), &dir.join("surrogate.json"))?;
            io::write_text(&io::loss_curve_csv(&net.loss_curve), &dir.join("loss_curve.csv"))?;
            io::write_json(&result, &dir.join("result.json"))
        };
        persist().map_err(|e| fail(Stage::Persistence)(&e))?;
    }
    Ok(PipelineOutput { dataset, net, result })
}
