//! Shared domain types, parameter bounds and validation.
//!
//! Every simulation and optimization stage consumes these value types. Bounds
//! are inclusive on both ends; a gain of zero is the legal "exoskeleton off"
//! condition.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Inclusive `[lo, hi]` interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    /// Clamp into the interval. NaN maps to the lower bound.
    pub fn clamp(&self, v: f64) -> f64 {
        if v.is_nan() {
            self.lo
        } else {
            v.clamp(self.lo, self.hi)
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Map `v` to `[0, 1]`.
    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.lo) / self.width()
    }

    /// Map a unit-interval coordinate back to the physical range.
    pub fn denormalize(&self, u: f64) -> f64 {
        self.lo + u * self.width()
    }
}

pub const STEP_LENGTH_BOUNDS: Bound = Bound::new(0.134, 0.938);
/// Steps per second.
pub const STEP_FREQUENCY_BOUNDS: Bound = Bound::new(1.27, 2.55);
pub const GAIN_BOUNDS: Bound = Bound::new(0.0, 21.0);
pub const DELAY_BOUNDS: Bound = Bound::new(0.0, 0.5);
pub const SEVERITY_BOUNDS: Bound = Bound::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("{field} = {value} is outside [{}, {}]", bound.lo, bound.hi)]
    OutOfRange {
        field: &'static str,
        value: f64,
        bound: Bound,
    },
    #[error("{field} = {value} must be strictly positive")]
    NotPositive { field: &'static str, value: f64 },
    #[error("{field} = {value} must be non-negative")]
    Negative { field: &'static str, value: f64 },
    #[error("muscle index sets are not a disjoint cover of 0..{n}: {reason}")]
    BadPartition { n: usize, reason: String },
}

fn check_range(field: &'static str, value: f64, bound: Bound) -> Result<(), DomainError> {
    if bound.contains(value) {
        Ok(())
    } else {
        Err(DomainError::OutOfRange { field, value, bound })
    }
}

fn check_positive(field: &'static str, value: f64) -> Result<(), DomainError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(DomainError::NotPositive { field, value })
    }
}

/// Anything with box bounds that can be checked and clamped.
pub trait Validate {
    fn validate(&self) -> Result<(), DomainError>;
}

/// Step length (m) and step frequency (steps/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitParams {
    pub step_length: f64,
    pub step_frequency: f64,
}

impl GaitParams {
    pub fn new(step_length: f64, step_frequency: f64) -> Self {
        Self {
            step_length,
            step_frequency,
        }
    }

    /// Walking speed in m/s.
    pub fn speed(&self) -> f64 {
        speed_of(self)
    }

    pub fn clamped(&self) -> Self {
        Self {
            step_length: STEP_LENGTH_BOUNDS.clamp(self.step_length),
            step_frequency: STEP_FREQUENCY_BOUNDS.clamp(self.step_frequency),
        }
    }
}

impl Validate for GaitParams {
    fn validate(&self) -> Result<(), DomainError> {
        check_range("step_length", self.step_length, STEP_LENGTH_BOUNDS)?;
        check_range("step_frequency", self.step_frequency, STEP_FREQUENCY_BOUNDS)
    }
}

/// Walking speed realised by a step length / step frequency pair.
pub fn speed_of(g: &GaitParams) -> f64 {
    g.step_length * g.step_frequency
}

/// Gain (N·m) and delay (s) of the delayed-output feedback law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExoControlParams {
    pub gain_kappa: f64,
    pub delay_dt: f64,
}

impl ExoControlParams {
    pub fn new(gain_kappa: f64, delay_dt: f64) -> Self {
        Self {
            gain_kappa,
            delay_dt,
        }
    }

    pub fn off() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn clamped(&self) -> Self {
        Self {
            gain_kappa: GAIN_BOUNDS.clamp(self.gain_kappa),
            delay_dt: DELAY_BOUNDS.clamp(self.delay_dt),
        }
    }
}

impl Validate for ExoControlParams {
    fn validate(&self) -> Result<(), DomainError> {
        check_range("gain_kappa", self.gain_kappa, GAIN_BOUNDS)?;
        check_range("delay_dt", self.delay_dt, DELAY_BOUNDS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathologyKind {
    None,
    Calcaneus,
    Footdrop,
    Waddling,
    Equinus,
    Crouch,
}

impl PathologyKind {
    pub const ALL: [PathologyKind; 6] = [
        PathologyKind::None,
        PathologyKind::Calcaneus,
        PathologyKind::Footdrop,
        PathologyKind::Waddling,
        PathologyKind::Equinus,
        PathologyKind::Crouch,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PathologyKind::None => "none",
            PathologyKind::Calcaneus => "calcaneus",
            PathologyKind::Footdrop => "footdrop",
            PathologyKind::Waddling => "waddling",
            PathologyKind::Equinus => "equinus",
            PathologyKind::Crouch => "crouch",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == s)
    }
}

impl std::fmt::Display for PathologyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathologyProfile {
    pub kind: PathologyKind,
    pub severity: f64,
}

impl PathologyProfile {
    /// Severity is clamped to `[0, 1]`; `PathologyKind::None` forces zero.
    pub fn new(kind: PathologyKind, severity: f64) -> Self {
        let severity = match kind {
            PathologyKind::None => 0.0,
            _ => SEVERITY_BOUNDS.clamp(severity),
        };
        Self { kind, severity }
    }

    pub fn healthy() -> Self {
        Self::new(PathologyKind::None, 0.0)
    }

    pub fn clamped(&self) -> Self {
        Self::new(self.kind, self.severity)
    }
}

impl Default for PathologyProfile {
    fn default() -> Self {
        Self::healthy()
    }
}

impl Validate for PathologyProfile {
    fn validate(&self) -> Result<(), DomainError> {
        match self.kind {
            PathologyKind::None => check_range("severity", self.severity, Bound::new(0.0, 0.0)),
            _ => check_range("severity", self.severity, SEVERITY_BOUNDS),
        }
    }
}

/// Exponents and basal term of the metabolic energy expenditure model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeeParams {
    pub alpha: f64,
    pub beta: f64,
    pub basal_rate: f64,
}

impl MeeParams {
    pub fn new(alpha: f64, beta: f64, basal_rate: f64) -> Self {
        Self {
            alpha,
            beta,
            basal_rate,
        }
    }
}

impl Default for MeeParams {
    fn default() -> Self {
        Self::new(1.5, 1.0, 80.0)
    }
}

impl Validate for MeeParams {
    fn validate(&self) -> Result<(), DomainError> {
        check_positive("alpha", self.alpha)?;
        check_positive("beta", self.beta)?;
        if self.basal_rate >= 0.0 && self.basal_rate.is_finite() {
            Ok(())
        } else {
            Err(DomainError::Negative {
                field: "basal_rate",
                value: self.basal_rate,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    Hip,
    Knee,
    Ankle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Muscle {
    pub name: String,
    /// Effective metabolic mass (kg).
    pub mass: f64,
    /// Peak joint torque at full activation (N·m).
    pub torque_capacity: f64,
    pub joint: Joint,
    pub side: Side,
}

/// Line muscles plus their partition into anatomical groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuscleSet {
    pub muscles: Vec<Muscle>,
    pub group_index_sets: Vec<Vec<usize>>,
}

pub const ILIOPSOAS: &str = "iliopsoas";
pub const GLUTEALS: &str = "gluteals";
pub const HAMSTRINGS: &str = "hamstrings";
pub const QUADRICEPS: &str = "quadriceps";
pub const TRICEPS_SURAE: &str = "triceps_surae";
pub const TIBIALIS_ANTERIOR: &str = "tibialis_anterior";

impl MuscleSet {
    /// One group per muscle.
    pub fn with_singleton_groups(muscles: Vec<Muscle>) -> Self {
        let group_index_sets = (0..muscles.len()).map(|i| vec![i]).collect();
        Self {
            muscles,
            group_index_sets,
        }
    }

    /// Sagittal lower-limb set used by the gait generator, six muscles per side.
    ///
    /// Masses are effective metabolic masses rather than anatomical ones: they
    /// are scaled so that activation-dependent expenditure is of the same order
    /// as the default basal rate.
    pub fn lower_limb() -> Self {
        let per_side: [(&str, f64, f64, Joint); 6] = [
            (ILIOPSOAS, 10.0, 300.0, Joint::Hip),
            (GLUTEALS, 20.0, 400.0, Joint::Hip),
            (HAMSTRINGS, 16.0, 350.0, Joint::Hip),
            (QUADRICEPS, 24.0, 450.0, Joint::Knee),
            (TRICEPS_SURAE, 45.0, 2000.0, Joint::Ankle),
            (TIBIALIS_ANTERIOR, 15.0, 600.0, Joint::Ankle),
        ];
        let mut muscles = Vec::with_capacity(12);
        for side in [Side::Right, Side::Left] {
            for (name, mass, cap, joint) in per_side {
                muscles.push(Muscle {
                    name: name.to_string(),
                    mass,
                    torque_capacity: cap,
                    joint,
                    side,
                });
            }
        }
        Self::with_singleton_groups(muscles)
    }

    pub fn len(&self) -> usize {
        self.muscles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.muscles.is_empty()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.muscles.iter().map(|m| m.mass).collect()
    }
}

/// Checks that `groups` partitions `0..n` into non-empty disjoint sets.
pub fn check_partition(groups: &[Vec<usize>], n: usize) -> Result<(), DomainError> {
    let mut seen = vec![false; n];
    for g in groups {
        if g.is_empty() {
            return Err(DomainError::BadPartition {
                n,
                reason: "empty group".into(),
            });
        }
        for &i in g {
            if i >= n {
                return Err(DomainError::BadPartition {
                    n,
                    reason: format!("index {i} out of range"),
                });
            }
            if seen[i] {
                return Err(DomainError::BadPartition {
                    n,
                    reason: format!("index {i} appears twice"),
                });
            }
            seen[i] = true;
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(DomainError::BadPartition {
            n,
            reason: format!("index {i} not covered"),
        });
    }
    Ok(())
}

impl Validate for MuscleSet {
    fn validate(&self) -> Result<(), DomainError> {
        for m in &self.muscles {
            check_positive("mass", m.mass)?;
            check_positive("torque_capacity", m.torque_capacity)?;
        }
        check_partition(&self.group_index_sets, self.muscles.len())
    }
}
