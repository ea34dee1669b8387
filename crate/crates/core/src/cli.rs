//! Command implementations behind the `exoplore` binary.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, RunConfig};
use crate::domain::ExoControlParams;
use crate::generator::{preferred_gait, train_generator};
use crate::io::{self, Landscape};
use crate::metrics::{self, MetricsError};
use crate::optimizer::{calibrate_mee, generate_dataset, optimize_controls, run_pipeline, Stage};
use crate::rng::derive_seed;
use crate::surrogate::{linspace, train, SurrogateNet};

#[derive(Debug, Parser)]
#[command(name = "exoplore", version, about = "Hip exoskeleton control discovery on a synthetic gait model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Roll out an LHS design and write dataset.csv.
    GenData(ConfigArg),
    /// Fit the metabolic exponents to a target preferred walking speed.
    CalibrateMee(ConfigArg),
    /// Train the surrogate on a dataset; writes surrogate.json and loss_curve.csv.
    TrainSurrogate(ConfigArg),
    /// Optimize per-speed controls on a trained surrogate.
    Optimize(ConfigArg),
    /// Sample, simulate, train and optimize in one run.
    Pipeline(ConfigArg),
    /// NRMSE, Pearson r and NDTW between two series files.
    Compare(ConfigArg),
    /// Surrogate CoT over a (kappa, delay) grid as CSV and SVG.
    Landscape(ConfigArg),
    /// Print the effective configuration (defaults when no file is given).
    PrintConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, clap::Args)]
pub struct ConfigArg {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Stage { stage: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { .. } => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "config error: {e}"),
            CliError::Stage { stage, message } => write!(f, "stage `{stage}` failed: {message}"),
        }
    }
}

fn stage(name: &str) -> impl Fn(&dyn std::fmt::Display) -> CliError + '_ {
    move |e| CliError::Stage {
        stage: name.to_string(),
        message: e.to_string(),
    }
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|e| stage("output")(&e))?;
    Ok(&cfg.output_dir)
}

/// A metric value, or the reason it is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricValue {
    Value(f64),
    Error { error: String },
}

impl From<Result<f64, MetricsError>> for MetricValue {
    fn from(r: Result<f64, MetricsError>) -> Self {
        match r {
            Ok(v) => MetricValue::Value(v),
            Err(e) => MetricValue::Error { error: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub nrmse: MetricValue,
    pub r: MetricValue,
    pub ndtw: MetricValue,
}

/// Pointwise metrics resample `sim` to the length of `exp`; NDTW uses both as given.
pub fn compare_series(sim: &[f64], exp: &[f64]) -> CompareReport {
    let aligned = if sim.len() == exp.len() || sim.is_empty() || exp.is_empty() {
        Ok(sim.to_vec())
    } else {
        metrics::resample_linear(sim, exp.len())
    };
    let (nrmse, r) = match &aligned {
        Ok(s) => (metrics::nrmse(s, exp).into(), metrics::pearson_r(s, exp).into()),
        Err(e) => (MetricValue::Error { error: e.to_string() }, MetricValue::Error { error: e.to_string() }),
    };
    CompareReport {
        nrmse,
        r,
        ndtw: metrics::ndtw(sim, exp).into(),
    }
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    RunConfig::load(path).map_err(CliError::Config)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::PrintConfig { config } => {
            let cfg = match config {
                Some(p) => load_config(&p)?,
                None => RunConfig::default(),
            };
            print!("{}", cfg.to_toml());
            Ok(())
        }
        Command::GenData(a) => gen_data(&load_config(&a.config)?),
        Command::CalibrateMee(a) => calibrate(&load_config(&a.config)?),
        Command::TrainSurrogate(a) => train_surrogate(&load_config(&a.config)?),
        Command::Optimize(a) => optimize(&load_config(&a.config)?),
        Command::Pipeline(a) => pipeline(&load_config(&a.config)?),
        Command::Compare(a) => compare(&load_config(&a.config)?),
        Command::Landscape(a) => landscape(&load_config(&a.config)?),
    }
}

pub fn gen_data(cfg: &RunConfig) -> Result<(), CliError> {
    let gen = train_generator(&cfg.generator, &cfg.mee).map_err(|e| stage("generation")(&e))?;
    let ds = generate_dataset(&gen, &cfg.space, cfg.n_samples, cfg.seed).map_err(|e| stage("generation")(&e))?;
    let dir = out_dir(cfg)?;
    io::write_dataset(&ds, &dir.join("dataset.csv")).map_err(|e| stage("output")(&e))
}

pub fn calibrate(cfg: &RunConfig) -> Result<(), CliError> {
    let c = &cfg.calibration;
    let res = calibrate_mee(
        &c.candidates,
        c.v_real,
        &cfg.generator,
        cfg.mee.basal_rate,
        &cfg.calibration_grid(),
        c.rollouts_per_point,
        cfg.seed,
    )
    .map_err(|e| stage("calibration")(&e))?;
    io::write_json(&res, &out_dir(cfg)?.join("calibration.json")).map_err(|e| stage("output")(&e))
}

pub fn train_surrogate(cfg: &RunConfig) -> Result<(), CliError> {
    let ds = io::read_dataset(&cfg.dataset_path()).map_err(|e| stage("input")(&e))?;
    let net = train(&ds.samples(&cfg.space.bounds), &cfg.space.bounds, &cfg.surrogate, derive_seed(cfg.seed, &[3]))
        .map_err(|e| stage("training")(&e))?;
    let dir = out_dir(cfg)?;
    io::write_text(&net.to_json(), &dir.join("surrogate.json")).map_err(|e| stage("output")(&e))?;
    io::write_text(&io::loss_curve_csv(&net.loss_curve), &dir.join("loss_curve.csv")).map_err(|e| stage("output")(&e))
}

fn load_net(cfg: &RunConfig) -> Result<SurrogateNet, CliError> {
    SurrogateNet::load(&cfg.checkpoint_path()).map_err(|e| stage("input")(&e))
}

pub fn optimize(cfg: &RunConfig) -> Result<(), CliError> {
    let net = load_net(cfg)?;
    let gaits = cfg.optimization_gaits().map_err(|e| stage("gait selection")(&e))?;
    let res = optimize_controls(&net, &gaits, &cfg.optimizer, derive_seed(cfg.seed, &[4])).map_err(|e| stage("optimization")(&e))?;
    io::write_json(&res, &out_dir(cfg)?.join("optimization.json")).map_err(|e| stage("output")(&e))
}

pub fn pipeline(cfg: &RunConfig) -> Result<(), CliError> {
    let gen = train_generator(&cfg.generator, &cfg.mee).map_err(|e| stage(&Stage::Generation.to_string())(&e))?;
    let gaits = cfg.optimization_gaits().map_err(|e| stage("gait selection")(&e))?;
    let dir = out_dir(cfg)?;
    run_pipeline(&cfg.space, &gen, &gaits, cfg.n_samples, &cfg.surrogate, &cfg.optimizer, cfg.seed, Some(dir))
        .map(|_| ())
        .map_err(|e| CliError::Stage {
            stage: e.stage.to_string(),
            message: e.message,
        })
}

pub fn compare(cfg: &RunConfig) -> Result<(), CliError> {
    let sim = io::read_series(&cfg.compare.sim).map_err(|e| stage("input")(&e))?;
    let exp = io::read_series(&cfg.compare.exp).map_err(|e| stage("input")(&e))?;
    io::write_json(&compare_series(&sim, &exp), &out_dir(cfg)?.join("compare.json")).map_err(|e| stage("output")(&e))
}

pub fn landscape(cfg: &RunConfig) -> Result<(), CliError> {
    let net = load_net(cfg)?;
    let l = &cfg.landscape;
    let gait = preferred_gait(&cfg.generator.noiseless(), &cfg.mee, l.speed_kmh / 3.6, cfg.gaits.scan_lengths, 1, cfg.seed)
        .map_err(|e| stage("gait selection")(&e))?;
    let kappas = linspace(&cfg.optimizer.kappa_bounds, l.n_kappa);
    let delta_ts = linspace(&cfg.optimizer.delay_bounds, l.n_delay);
    let mut values = Vec::with_capacity(kappas.len() * delta_ts.len());
    for k in &kappas {
        for d in &delta_ts {
            values.push(net.predict_cot(&gait, &ExoControlParams::new(*k, *d), cfg.optimizer.severity));
        }
    }
    let land = Landscape { kappas, delta_ts, values };
    let dir = out_dir(cfg)?;
    io::write_text(&land.to_csv(), &dir.join("landscape.csv")).map_err(|e| stage("output")(&e))?;
    io::write_text(&land.to_svg(), &dir.join("landscape.svg")).map_err(|e| stage("output")(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_series_compare() {
        let s = [0.0, 1.0, 0.5, 2.0];
        let rep = compare_series(&s, &s);
        assert_eq!(rep.nrmse, MetricValue::Value(0.0));
        assert_eq!(rep.ndtw, MetricValue::Value(0.0));
        match rep.r {
            MetricValue::Value(v) => assert!((v - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_series_reports_zero_variance() {
        let s = [1.0, 1.0, 1.0];
        let rep = compare_series(&s, &[0.0, 1.0, 2.0]);
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("variance"), "{json}");
    }
}
