//! Parametric gait generator and rollout protocol.
//!
//! Hip kinematics are antiphase sinusoids whose amplitude follows step
//! length, adapts to the assistance, and jitters from cycle to cycle. Hip
//! torque demand comes from single-pendulum inverse dynamics; the device
//! torque is subtracted before recruitment. Knee support and ankle push-off
//! demands depend on the gait alone. Activations feed the metabolic model.
//!
//! Device torque is taken as positive in hip extension, so in the flexion
//! frame used for the kinematics the applied torque is `-τ_device`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{
    compensate_torque, power_stats, ControllerError, ExoController, ExoTorqueRecord, PerSide,
    PowerStats, CONTROL_DT, DEFAULT_CUTOFF_HZ,
};
use crate::domain::{
    DomainError, ExoControlParams, GaitParams, Joint, MeeParams, MuscleSet, PathologyKind,
    PathologyProfile, Side, Validate, GAIN_BOUNDS, STEP_FREQUENCY_BOUNDS, STEP_LENGTH_BOUNDS,
    GLUTEALS, ILIOPSOAS, HAMSTRINGS, TIBIALIS_ANTERIOR, TRICEPS_SURAE,
};
use crate::metabolics::{cot, mee_rate_masses, EnergyAccumulator, MetabolicsError};
use crate::rng::rng_from;

pub const GRAVITY: f64 = 9.81;
pub const TOTAL_CYCLES: usize = 15;
pub const DISCARDED_CYCLES: usize = 5;
pub const KEPT_CYCLES: usize = TOTAL_CYCLES - DISCARDED_CYCLES;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Metabolics(#[from] MetabolicsError),
    #[error("invalid generator config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorMode {
    #[default]
    Physiological,
    PlantedBowl,
}

/// Synthetic quadratic landscape with a known optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedBowl {
    pub kappa_star: f64,
    pub delta_t_star: f64,
    pub base: f64,
    pub a: f64,
    pub b: f64,
    pub noise_std: f64,
}

impl Default for PlantedBowl {
    fn default() -> Self {
        Self {
            kappa_star: 10.0,
            delta_t_star: 0.25,
            base: 3.0,
            a: 0.02,
            b: 40.0,
            noise_std: 0.0,
        }
    }
}

impl PlantedBowl {
    pub fn noiseless(&self, c: &ExoControlParams) -> f64 {
        self.base
            + self.a * (c.gain_kappa - self.kappa_star).powi(2)
            + self.b * (c.delay_dt - self.delta_t_star).powi(2)
    }

    /// Largest minus smallest noiseless value over the control box.
    pub fn range(&self) -> f64 {
        let dk = (GAIN_BOUNDS.lo - self.kappa_star)
            .abs()
            .max((GAIN_BOUNDS.hi - self.kappa_star).abs());
        let dd = (crate::domain::DELAY_BOUNDS.lo - self.delta_t_star)
            .abs()
            .max((crate::domain::DELAY_BOUNDS.hi - self.delta_t_star).abs());
        self.a * dk * dk + self.b * dd * dd
    }
}

/// `base + a(κ−κ*)² + b(Δt−Δt*)² + N(0, noise_std)`; the gait does not enter.
pub fn planted_bowl_cot(bowl: &PlantedBowl, c: &ExoControlParams, _g: &GaitParams, noise_std: f64, seed: u64) -> f64 {
    let z: f64 = rng_from(seed).sample(StandardNormal);
    bowl.noiseless(c) + noise_std * z
}

/// How each pathology alters the generator; all magnitudes at severity 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathologyEffects {
    /// Remaining capacity fraction at full severity.
    pub triceps_weakness_floor: f64,
    pub tibialis_weakness_floor: f64,
    pub gluteal_weakness_floor: f64,
    /// Remaining optimal fiber length fraction at full severity.
    pub psoas_contracture_floor: f64,
    pub triceps_contracture_floor: f64,
    /// Joint offset (rad) per unit fiber shortening.
    pub contracture_offset_gain: f64,
    /// Constant hip activation added (crouch, calcaneus).
    pub hip_baseline: f64,
    /// Relative increase of hip torque demand (crouch, calcaneus).
    pub hip_demand_gain: f64,
    /// Relative increase of cycle jitter independent of assistance (equinus, waddling).
    pub instability_gain: f64,
    /// Activation per unit expected |cycle jitter| spent on balance (equinus, waddling).
    pub stabilization_gain: f64,
    /// Per-cycle probability of a toe collision (footdrop).
    pub collision_rate: f64,
    /// Extra ankle torque (Nm) of a typical collision.
    pub collision_torque: f64,
    /// Pareto tail index of collision duration.
    pub collision_tail: f64,
}

impl Default for PathologyEffects {
    fn default() -> Self {
        Self {
            triceps_weakness_floor: 0.4,
            tibialis_weakness_floor: 0.5,
            gluteal_weakness_floor: 0.4,
            psoas_contracture_floor: 0.55,
            triceps_contracture_floor: 0.73,
            contracture_offset_gain: 0.1,
            hip_baseline: 0.05,
            hip_demand_gain: 2.0,
            instability_gain: 1.0,
            stabilization_gain: 1.5,
            collision_rate: 0.6,
            collision_torque: 160.0,
            collision_tail: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Meters.
    pub leg_length: f64,
    /// Resting hip flexion (rad).
    pub hip_offset: f64,
    /// Peak relative amplitude increase from assistance.
    pub adaptation_gain: f64,
    /// Gain (Nm) at which adaptation reaches 63% of its peak.
    pub adaptation_kappa_scale: f64,
    /// Sharpness of the adaptation's dependence on assistance phase.
    pub adaptation_phase_power: f64,
    /// Share of the phase dependence that is linear rather than sharpened.
    pub adaptation_linear_share: f64,
    /// Relative standard deviation of per-cycle amplitude.
    pub cycle_jitter_std: f64,
    /// Hip angle sensor noise (rad).
    pub measurement_noise_std: f64,
    /// Leg moment of inertia about the hip (kg m²).
    pub inertia: f64,
    /// Hip damping (N m s/rad).
    pub damping: f64,
    pub leg_mass: f64,
    /// Hip to leg center of mass (m).
    pub com_length: f64,
    /// Swing knee torque (Nm) at a cadence of 2 steps/s.
    pub knee_gain: f64,
    pub knee_cadence_power: f64,
    /// Push-off ankle torque scale (Nm s³/m³ per unit step-to-leg ratio).
    pub ankle_gain: f64,
    pub ankle_speed_power: f64,
    pub filter_cutoff_hz: f64,
    pub dt: f64,
    pub mode: GeneratorMode,
    pub bowl: PlantedBowl,
    pub pathology: PathologyEffects,
    pub muscles: MuscleSet,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            leg_length: 0.9,
            hip_offset: 0.02,
            adaptation_gain: 1.0,
            adaptation_kappa_scale: 6.0,
            adaptation_phase_power: 8.0,
            adaptation_linear_share: 0.05,
            cycle_jitter_std: 0.03,
            measurement_noise_std: 0.005,
            inertia: 1.6,
            damping: 3.0,
            leg_mass: 10.0,
            com_length: 0.4,
            knee_gain: 20.0,
            knee_cadence_power: 3.0,
            ankle_gain: 120.0,
            ankle_speed_power: 3.0,
            filter_cutoff_hz: DEFAULT_CUTOFF_HZ,
            dt: CONTROL_DT,
            mode: GeneratorMode::Physiological,
            bowl: PlantedBowl::default(),
            pathology: PathologyEffects::default(),
            muscles: MuscleSet::lower_limb(),
        }
    }
}

impl GeneratorConfig {
    pub fn planted(bowl: PlantedBowl) -> Self {
        Self {
            mode: GeneratorMode::PlantedBowl,
            bowl,
            ..Self::default()
        }
    }

    /// Same config with every noise source silenced.
    pub fn noiseless(&self) -> Self {
        let mut c = self.clone();
        c.cycle_jitter_std = 0.0;
        c.measurement_noise_std = 0.0;
        c.bowl.noise_std = 0.0;
        c.pathology.collision_rate = 0.0;
        c
    }

    pub fn check(&self) -> Result<(), GeneratorError> {
        let positive = [
            ("leg_length", self.leg_length),
            ("dt", self.dt),
            ("filter_cutoff_hz", self.filter_cutoff_hz),
            ("inertia", self.inertia),
            ("adaptation_kappa_scale", self.adaptation_kappa_scale),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GeneratorError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("adaptation_gain", self.adaptation_gain),
            ("adaptation_linear_share", self.adaptation_linear_share),
            ("cycle_jitter_std", self.cycle_jitter_std),
            ("measurement_noise_std", self.measurement_noise_std),
            ("bowl.noise_std", self.bowl.noise_std),
            ("damping", self.damping),
            ("leg_mass", self.leg_mass),
            ("com_length", self.com_length),
            ("knee_gain", self.knee_gain),
            ("ankle_gain", self.ankle_gain),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(GeneratorError::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        self.muscles.validate()?;
        Ok(())
    }
}

/// Generator bound to a metabolic model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedGenerator {
    pub cfg: GeneratorConfig,
    pub mee: MeeParams,
}

impl TrainedGenerator {
    pub fn rollout(
        &self,
        g: &GaitParams,
        c: &ExoControlParams,
        p: &PathologyProfile,
        seed: u64,
    ) -> Result<RolloutResult, GeneratorError> {
        rollout(&self.cfg, g, c, p, &self.mee, seed)
    }
}

/// The generator needs no training: conditioning on the metabolic model is construction.
pub fn train_generator(cfg: &GeneratorConfig, mee: &MeeParams) -> Result<TrainedGenerator, GeneratorError> {
    cfg.check()?;
    mee.validate()?;
    Ok(TrainedGenerator {
        cfg: cfg.clone(),
        mee: *mee,
    })
}

/// Unadapted hip amplitude for a step length.
pub fn base_amplitude(step_length: f64, leg_length: f64) -> f64 {
    (step_length / (2.0 * leg_length)).min(0.999).asin()
}

/// Relative amplitude gain from assistance: saturating in gain, rising with
/// how close the delay puts the assistance to a quarter gait cycle.
pub fn adaptation_factor(cfg: &GeneratorConfig, g: &GaitParams, c: &ExoControlParams) -> f64 {
    let omega = PI * g.step_frequency;
    let phase = (omega * c.delay_dt).sin().max(0.0);
    let sat = 1.0 - (-c.gain_kappa / cfg.adaptation_kappa_scale).exp();
    let w = cfg.adaptation_linear_share;
    1.0 + cfg.adaptation_gain * sat * (w * phase + (1.0 - w) * phase.powf(cfg.adaptation_phase_power))
}

/// Right and left hip angles at time `t`.
pub fn hip_angle_profile(
    g: &GaitParams,
    c: &ExoControlParams,
    cfg: &GeneratorConfig,
    t: f64,
    cycle_jitter: f64,
) -> PerSide<f64> {
    hip_angle_with_offset(g, c, cfg, cfg.hip_offset, t, cycle_jitter)
}

fn hip_angle_with_offset(
    g: &GaitParams,
    c: &ExoControlParams,
    cfg: &GeneratorConfig,
    offset: f64,
    t: f64,
    cycle_jitter: f64,
) -> PerSide<f64> {
    let amp = base_amplitude(g.step_length, cfg.leg_length) * adaptation_factor(cfg, g, c) * (1.0 + cycle_jitter);
    let ph = PI * g.step_frequency * t;
    PerSide::new(offset + amp * ph.sin(), offset + amp * (ph + PI).sin())
}

/// Single-pendulum inverse dynamics at the hip.
pub fn torque_demand(theta: f64, theta_dot: f64, theta_ddot: f64, cfg: &GeneratorConfig) -> f64 {
    cfg.inertia * theta_ddot + cfg.damping * theta_dot + cfg.leg_mass * GRAVITY * cfg.com_length * theta.sin()
}

/// Net joint torques per side.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointTorques {
    pub hip: PerSide<f64>,
    pub knee: PerSide<f64>,
    pub ankle: PerSide<f64>,
}

impl JointTorques {
    pub fn get(&self, joint: Joint, side: Side) -> f64 {
        let ps = match joint {
            Joint::Hip => self.hip,
            Joint::Knee => self.knee,
            Joint::Ankle => self.ankle,
        };
        match side {
            Side::Right => ps.right,
            Side::Left => ps.left,
        }
    }
}

/// Per-muscle capacity multipliers and activation baselines for a pathology.
#[derive(Debug, Clone, PartialEq)]
pub struct PathologyModel {
    pub weakness: Vec<f64>,
    pub baseline: Vec<f64>,
    pub hip_offset_shift: f64,
    pub ankle_offset_shift: f64,
    pub hip_demand_scale: f64,
    /// Applied to cycle jitter as `(1 + s·instability_gain)(1 + s·κ/21)`.
    pub unstable: bool,
    pub stabilization: Vec<f64>,
    pub collision_probability: f64,
    severity: f64,
}

impl PathologyModel {
    pub fn new(p: &PathologyProfile, eff: &PathologyEffects, muscles: &MuscleSet) -> Self {
        let p = p.clamped();
        let s = p.severity;
        let n = muscles.len();
        let mut m = Self {
            weakness: vec![1.0; n],
            baseline: vec![0.0; n],
            hip_offset_shift: 0.0,
            ankle_offset_shift: 0.0,
            hip_demand_scale: 1.0,
            unstable: false,
            stabilization: vec![0.0; n],
            collision_probability: 0.0,
            severity: s,
        };
        let weaken = |floor: f64| 1.0 - s * (1.0 - floor);
        let set = |v: &mut Vec<f64>, name: &str, value: f64| {
            for (i, mu) in muscles.muscles.iter().enumerate() {
                if mu.name == name {
                    v[i] = value;
                }
            }
        };
        match p.kind {
            PathologyKind::None => {}
            PathologyKind::Calcaneus => {
                set(&mut m.weakness, TRICEPS_SURAE, weaken(eff.triceps_weakness_floor));
                m.hip_demand_scale = 1.0 + s * eff.hip_demand_gain;
                for name in [ILIOPSOAS, GLUTEALS, HAMSTRINGS] {
                    set(&mut m.baseline, name, s * eff.hip_baseline);
                }
            }
            PathologyKind::Crouch => {
                m.hip_offset_shift = s * (1.0 - eff.psoas_contracture_floor) * eff.contracture_offset_gain;
                m.hip_demand_scale = 1.0 + s * eff.hip_demand_gain;
                for name in [ILIOPSOAS, GLUTEALS, HAMSTRINGS] {
                    set(&mut m.baseline, name, s * eff.hip_baseline);
                }
            }
            PathologyKind::Equinus => {
                m.ankle_offset_shift = s * (1.0 - eff.triceps_contracture_floor) * eff.contracture_offset_gain;
                m.unstable = true;
                for name in [TRICEPS_SURAE, GLUTEALS] {
                    set(&mut m.stabilization, name, s * eff.stabilization_gain);
                }
            }
            PathologyKind::Waddling => {
                set(&mut m.weakness, GLUTEALS, weaken(eff.gluteal_weakness_floor));
                m.unstable = true;
                for name in [GLUTEALS, HAMSTRINGS] {
                    set(&mut m.stabilization, name, s * eff.stabilization_gain);
                }
            }
            PathologyKind::Footdrop => {
                set(&mut m.weakness, TIBIALIS_ANTERIOR, weaken(eff.tibialis_weakness_floor));
                m.collision_probability = (s * eff.collision_rate).min(1.0);
            }
        }
        m
    }

    pub fn severity(&self) -> f64 {
        self.severity
    }

    /// Multiplier on the cycle jitter standard deviation.
    pub fn jitter_scale(&self, eff: &PathologyEffects, kappa: f64) -> f64 {
        if self.unstable {
            (1.0 + self.severity * eff.instability_gain) * (1.0 + self.severity * kappa / GAIN_BOUNDS.hi)
        } else {
            1.0
        }
    }
}

/// Proportional recruitment: `clamp(|τ_joint| / (capacity · weakness) + baseline, 0, 1)`.
pub fn activations_from_torque(tau: &JointTorques, muscles: &MuscleSet, weakness: &[f64], baseline: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; muscles.len()];
    activations_into(tau, muscles, weakness, baseline, &mut out);
    out
}

fn activations_into(tau: &JointTorques, muscles: &MuscleSet, weakness: &[f64], baseline: &[f64], out: &mut [f64]) {
    for (i, mu) in muscles.muscles.iter().enumerate() {
        let cap = mu.torque_capacity * weakness[i];
        let a = tau.get(mu.joint, mu.side).abs() / cap + baseline[i];
        out[i] = a.clamp(0.0, 1.0);
    }
}

/// Kept-window time series of one rollout.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GaitTrajectory {
    pub dt: f64,
    pub cycles_kept: usize,
    pub theta: Vec<PerSide<f64>>,
    pub theta_dot: Vec<PerSide<f64>>,
    pub exo: Vec<ExoTorqueRecord>,
    /// Row-major, `n_muscles` per sample.
    pub activations: Vec<f64>,
    pub n_muscles: usize,
    /// False where the delay buffer was still cold.
    pub warm: Vec<bool>,
}

impl GaitTrajectory {
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn activation_row(&self, k: usize) -> &[f64] {
        &self.activations[k * self.n_muscles..(k + 1) * self.n_muscles]
    }

    pub fn power_stats(&self) -> Result<PowerStats, ControllerError> {
        power_stats(&self.exo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult {
    pub trajectory: GaitTrajectory,
    pub mee_joules: f64,
    pub distance: f64,
    pub cot: f64,
    pub seed: u64,
}

/// Sample counts: total steps and steps discarded before the kept window.
pub fn step_counts(g: &GaitParams, dt: f64) -> (usize, usize) {
    let cycle = 2.0 / g.step_frequency;
    let total = (TOTAL_CYCLES as f64 * cycle / dt).round() as usize;
    let skip = (DISCARDED_CYCLES as f64 * cycle / dt).round() as usize;
    (total, skip)
}

/// Rollout distance: two steps per kept cycle.
pub fn rollout_distance(g: &GaitParams) -> f64 {
    (2 * KEPT_CYCLES) as f64 * g.step_length
}

/// Simulates 15 gait cycles, keeps the last 10 and returns their cost of transport.
pub fn rollout(
    cfg: &GeneratorConfig,
    g: &GaitParams,
    c: &ExoControlParams,
    p: &PathologyProfile,
    mee: &MeeParams,
    seed: u64,
) -> Result<RolloutResult, GeneratorError> {
    g.validate()?;
    c.validate()?;
    p.validate()?;
    mee.validate()?;
    let distance = rollout_distance(g);
    match cfg.mode {
        GeneratorMode::PlantedBowl => {
            let v = planted_bowl_cot(&cfg.bowl, c, g, cfg.bowl.noise_std, seed);
            Ok(RolloutResult {
                trajectory: GaitTrajectory {
                    dt: cfg.dt,
                    cycles_kept: KEPT_CYCLES,
                    n_muscles: cfg.muscles.len(),
                    ..Default::default()
                },
                mee_joules: v * distance,
                distance,
                cot: v,
                seed,
            })
        }
        GeneratorMode::Physiological => physiological_rollout(cfg, g, c, p, mee, seed, distance),
    }
}

struct Cycle {
    jitter: f64,
    collision_start: Option<usize>,
    collision_len: usize,
}

fn draw_cycle<R: Rng>(rng: &mut R, cfg: &GeneratorConfig, model: &PathologyModel, jitter_std: f64, steps_per_cycle: usize) -> Cycle {
    // every draw happens regardless of configuration so streams stay aligned
    let z: f64 = rng.sample(StandardNormal);
    let hit: f64 = rng.random();
    let tail: f64 = rng.random();
    let when: f64 = rng.random();
    let jitter = (jitter_std * z).clamp(-0.5, 0.5);
    if hit < model.collision_probability {
        // Pareto(1, tail) duration in units of 5% of a cycle
        let x = (1.0 - tail).powf(-1.0 / cfg.pathology.collision_tail);
        let len = ((x * 0.05 * steps_per_cycle as f64).round() as usize).clamp(1, steps_per_cycle);
        let start = (when * steps_per_cycle as f64) as usize;
        Cycle {
            jitter,
            collision_start: Some(start),
            collision_len: len,
        }
    } else {
        Cycle {
            jitter,
            collision_start: None,
            collision_len: 0,
        }
    }
}

fn physiological_rollout(
    cfg: &GeneratorConfig,
    g: &GaitParams,
    c: &ExoControlParams,
    p: &PathologyProfile,
    mee: &MeeParams,
    seed: u64,
    distance: f64,
) -> Result<RolloutResult, GeneratorError> {
    cfg.check()?;
    let dt = cfg.dt;
    let model = PathologyModel::new(p, &cfg.pathology, &cfg.muscles);
    let masses = cfg.muscles.masses();
    let n_mus = masses.len();
    let mut rng = rng_from(seed);
    let mut ctl = ExoController::new(*c, cfg.filter_cutoff_hz, dt)?;

    let (total, skip) = step_counts(g, dt);
    let cycle_time = 2.0 / g.step_frequency;
    let steps_per_cycle = ((cycle_time / dt).round() as usize).max(1);
    let omega = PI * g.step_frequency;
    let amp_base = base_amplitude(g.step_length, cfg.leg_length);
    let amp0 = amp_base * adaptation_factor(cfg, g, c);
    let offset = cfg.hip_offset + model.hip_offset_shift;
    let jitter_std = cfg.cycle_jitter_std * model.jitter_scale(&cfg.pathology, c.gain_kappa);
    let speed = g.speed();
    let reach = g.step_length / cfg.leg_length;
    let knee_amp = cfg.knee_gain * (g.step_frequency / 2.0).powf(cfg.knee_cadence_power);
    let ankle_amp = cfg.ankle_gain * speed.powf(cfg.ankle_speed_power) * reach * (1.0 + model.ankle_offset_shift);
    let mgl = cfg.leg_mass * GRAVITY * cfg.com_length;

    let kept = total - skip;
    let mut traj = GaitTrajectory {
        dt,
        cycles_kept: KEPT_CYCLES,
        theta: Vec::with_capacity(kept),
        theta_dot: Vec::with_capacity(kept),
        exo: Vec::with_capacity(kept),
        activations: Vec::with_capacity(kept * n_mus),
        n_muscles: n_mus,
        warm: Vec::with_capacity(kept),
    };
    let mut energy = EnergyAccumulator::new();
    // balance effort follows the expected jitter magnitude, not its draw
    let mean_abs_jitter = jitter_std * (2.0 / PI).sqrt();
    let baseline: Vec<f64> = model
        .baseline
        .iter()
        .zip(&model.stabilization)
        .map(|(b, stab)| b + stab * mean_abs_jitter)
        .collect();
    let mut act = vec![0.0; n_mus];
    let mut cycle = draw_cycle(&mut rng, cfg, &model, jitter_std, steps_per_cycle);
    let mut cycle_idx = 0usize;

    for i in 0..total {
        let t = i as f64 * dt;
        let k = ((t / cycle_time + 1e-9).floor() as usize).min(TOTAL_CYCLES - 1);
        if k != cycle_idx {
            cycle_idx = k;
            cycle = draw_cycle(&mut rng, cfg, &model, jitter_std, steps_per_cycle);
        }
        let noise_r: f64 = rng.sample(StandardNormal);
        let noise_l: f64 = rng.sample(StandardNormal);

        let amp = amp0 * (1.0 + cycle.jitter);
        let ph = omega * t;
        let (s, co) = ph.sin_cos();
        let theta = PerSide::new(offset + amp * s, offset - amp * s);
        let theta_dot = PerSide::new(amp * omega * co, -amp * omega * co);
        let theta_ddot = PerSide::new(-amp * omega * omega * s, amp * omega * omega * s);

        let raw = PerSide::new(
            theta.right + cfg.measurement_noise_std * noise_r,
            theta.left + cfg.measurement_noise_std * noise_l,
        );
        let out = ctl.step(t, raw)?;
        let tau_exo = PerSide::new(-out.torque.right, -out.torque.left);

        // compensatory demand: the oscillating part of the unassisted hip torque
        let amp_nom = amp_base * (1.0 + cycle.jitter);
        let extra = model.hip_demand_scale - 1.0;
        let hip_net = |th: f64, thd: f64, thdd: f64, side: f64, te: f64| {
            let own = cfg.inertia * thdd + cfg.damping * thd + mgl * th.sin();
            let nominal = -cfg.inertia * amp_nom * omega * omega * side * s
                + cfg.damping * amp_nom * omega * side * co
                + mgl * ((offset + amp_nom * side * s).sin() - offset.sin());
            compensate_torque(own + extra * nominal, te)
        };
        let in_cycle = i - (cycle_idx * steps_per_cycle).min(i);
        let collision = match cycle.collision_start {
            Some(st) if in_cycle >= st && in_cycle < st + cycle.collision_len => cfg.pathology.collision_torque,
            _ => 0.0,
        };
        let swing_r = s.max(0.0);
        let swing_l = (-s).max(0.0);
        let push_r = (-co).max(0.0).powi(2);
        let push_l = co.max(0.0).powi(2);
        let tau = JointTorques {
            hip: PerSide::new(
                hip_net(theta.right, theta_dot.right, theta_ddot.right, 1.0, tau_exo.right),
                hip_net(theta.left, theta_dot.left, theta_ddot.left, -1.0, tau_exo.left),
            ),
            knee: PerSide::new(knee_amp * swing_r, knee_amp * swing_l),
            ankle: PerSide::new(ankle_amp * push_r + collision, ankle_amp * push_l),
        };
        activations_into(&tau, &cfg.muscles, &model.weakness, &baseline, &mut act);

        if i >= skip {
            let rate = mee_rate_masses(&act, &masses, mee)?;
            energy.add(rate, dt)?;
            traj.theta.push(theta);
            traj.theta_dot.push(theta_dot);
            traj.exo.push(ExoTorqueRecord::new(tau_exo, theta_dot));
            traj.activations.extend_from_slice(&act);
            traj.warm.push(out.warm);
        }
    }
    let mee_joules = energy.joules();
    Ok(RolloutResult {
        trajectory: traj,
        mee_joules,
        distance,
        cot: cot(mee_joules, distance)?,
        seed,
    })
}

/// Preferred gait at a speed: the step length (with `f = v/L`) minimizing
/// unassisted cost over `n_lengths` candidates inside the bounds.
pub fn preferred_gait(
    cfg: &GeneratorConfig,
    mee: &MeeParams,
    speed: f64,
    n_lengths: usize,
    rollouts: usize,
    seed: u64,
) -> Result<GaitParams, GeneratorError> {
    let lo = STEP_LENGTH_BOUNDS.lo.max(speed / STEP_FREQUENCY_BOUNDS.hi);
    let hi = STEP_LENGTH_BOUNDS.hi.min(speed / STEP_FREQUENCY_BOUNDS.lo);
    if !(lo <= hi) || n_lengths == 0 {
        return Err(GeneratorError::Config(format!("speed {speed} m/s not reachable within gait bounds")));
    }
    let mut best: Option<(f64, GaitParams)> = None;
    for j in 0..n_lengths {
        let l = if n_lengths == 1 { 0.5 * (lo + hi) } else { lo + (hi - lo) * j as f64 / (n_lengths - 1) as f64 };
        let g = GaitParams::new(l, (speed / l).clamp(STEP_FREQUENCY_BOUNDS.lo, STEP_FREQUENCY_BOUNDS.hi));
        let mut acc = 0.0;
        for r in 0..rollouts.max(1) {
            let s = crate::rng::derive_seed(seed, &[j as u64, r as u64]);
            acc += rollout(cfg, &g, &ExoControlParams::off(), &PathologyProfile::healthy(), mee, s)?.cot;
        }
        let v = acc / rollouts.max(1) as f64;
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, g));
        }
    }
    Ok(best.expect("at least one candidate").1)
}
