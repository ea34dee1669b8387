mod common;

use exoplore::domain::{Bound, ExoControlParams, GaitParams, MeeParams, PathologyKind};
use exoplore::generator::{train_generator, GeneratorConfig, PlantedBowl};
use exoplore::io::read_dataset;
use exoplore::optimizer::{control_objective, eval_pws, optimize_controls, pws_grid, run_pipeline, OptimizerConfig, SampleSpace, Stage};
use exoplore::surrogate::{train, SurrogateNet, TrainConfig};

fn tiny_training() -> TrainConfig {
    TrainConfig {
        hidden: vec![16, 16],
        epochs: 60,
        batch_size: 64,
        ..TrainConfig::desk()
    }
}

#[test]
fn eval_pws_ignores_grid_order() {
    let cfg = GeneratorConfig::default();
    let mee = MeeParams::default();
    let grid = pws_grid(5, 4);
    let mut reversed = grid.clone();
    reversed.reverse();
    let a = eval_pws(&cfg, &mee, &grid, 2, 8).unwrap();
    let b = eval_pws(&cfg, &mee, &reversed, 2, 8).unwrap();
    assert_eq!(a.argmin_gait, b.argmin_gait);
    assert_eq!(a.cot_curve, b.cot_curve);
}

#[test]
fn pipeline_persists_reloadable_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let gen = train_generator(&GeneratorConfig::planted(PlantedBowl::default()), &MeeParams::default()).unwrap();
    let gaits = [GaitParams::new(0.5, 1.6), GaitParams::new(0.6, 1.9)];
    let out = run_pipeline(&SampleSpace::default(), &gen, &gaits, 300, &tiny_training(), &OptimizerConfig::default(), 4, Some(dir.path())).unwrap();
    assert_eq!(read_dataset(&dir.path().join("dataset.csv")).unwrap(), out.dataset);
    let net = SurrogateNet::load(&dir.path().join("surrogate.json")).unwrap();
    assert_eq!(net, out.net);
    assert_eq!(out.result.per_speed.len(), 2);
    for s in &out.result.per_speed {
        assert!((0.0..=21.0).contains(&s.kappa) && (0.0..=0.5).contains(&s.delta_t));
    }
    assert!(dir.path().join("loss_curve.csv").exists() && dir.path().join("result.json").exists());
}

#[test]
fn pipeline_rejects_empty_design_and_bad_bounds() {
    let gen = train_generator(&GeneratorConfig::default(), &MeeParams::default()).unwrap();
    let gaits = [GaitParams::new(0.6, 1.8)];
    let err = run_pipeline(&SampleSpace::default(), &gen, &gaits, 0, &tiny_training(), &OptimizerConfig::default(), 0, None).unwrap_err();
    assert_eq!(err.stage, Stage::Sampling);
    let mut space = SampleSpace::walking_band(PathologyKind::None);
    space.bounds[2] = Bound::new(3.0, 3.0);
    let err = run_pipeline(&space, &gen, &gaits, 10, &tiny_training(), &OptimizerConfig::default(), 0, None).unwrap_err();
    assert_eq!(err.stage, Stage::Sampling);
}

#[test]
fn optimizer_beats_every_grid_point_it_could_have_sampled() {
    let gen = train_generator(&GeneratorConfig::planted(PlantedBowl::default()), &MeeParams::default()).unwrap();
    let space = SampleSpace::default();
    let ds = exoplore::optimizer::generate_dataset(&gen, &space, 400, 2).unwrap();
    let net = train(&ds.samples(&space.bounds), &space.bounds, &tiny_training(), 2).unwrap();
    let gaits = [GaitParams::new(0.6, 1.8), GaitParams::new(0.7, 2.0)];
    let cfg = OptimizerConfig::default();
    let res = optimize_controls(&net, &gaits, &cfg, 5).unwrap();
    let controls: Vec<ExoControlParams> = res.per_speed.iter().map(|s| ExoControlParams::new(s.kappa, s.delta_t)).collect();
    let found = control_objective(&net, &gaits, &controls, 0.0, cfg.lambda1, cfg.lambda2);
    assert!((found - res.objective).abs() <= 1e-9 * found.abs().max(1.0));
    for k in common::grid(0.0, 21.0, 15) {
        for d in common::grid(0.0, 0.5, 15) {
            let c = [ExoControlParams::new(k, d); 2];
            assert!(found <= control_objective(&net, &gaits, &c, 0.0, cfg.lambda1, cfg.lambda2) + 1e-6);
        }
    }
}

#[test]
fn same_seed_same_network() {
    let gen = train_generator(&GeneratorConfig::default(), &MeeParams::default()).unwrap();
    let space = SampleSpace::walking_band(PathologyKind::None);
    let ds = exoplore::optimizer::generate_dataset(&gen, &space, 200, 9).unwrap();
    let a = train(&ds.samples(&space.bounds), &space.bounds, &tiny_training(), 1).unwrap();
    let b = train(&ds.samples(&space.bounds), &space.bounds, &tiny_training(), 1).unwrap();
    assert_eq!(a.to_json(), b.to_json());
}
