//! Delayed-output feedback hip assistance.
//!
//! The control signal is `u = sin(θ_r) − sin(θ_l)` built from low-pass
//! filtered hip angles. The right hip receives `κ·u(t − Δt)` and the left hip
//! the opposite torque. Delayed samples are read from a ring buffer with
//! linear interpolation; until the buffer reaches back to `t − Δt` the
//! controller emits zero torque.

use std::collections::VecDeque;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ExoControlParams, DELAY_BOUNDS};

/// Control and simulation timestep (100 Hz).
pub const CONTROL_DT: f64 = 0.01;
/// Default hip-angle filter cutoff.
pub const DEFAULT_CUTOFF_HZ: f64 = 6.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("timestep must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("cutoff frequency must be positive, got {0}")]
    NonPositiveCutoff(f64),
    #[error("timestamps must increase strictly: {prev} then {next}")]
    NonMonotonicTimestamp { prev: f64, next: f64 },
    #[error("power statistics need at least one record")]
    EmptySequence,
}

/// Pair of per-side values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerSide<T> {
    pub right: T,
    pub left: T,
}

impl<T: Copy> PerSide<T> {
    pub fn new(right: T, left: T) -> Self {
        Self { right, left }
    }

    pub fn both(&self) -> [T; 2] {
        [self.right, self.left]
    }
}

/// First-order IIR low-pass filter on a single channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LowPass {
    cutoff_hz: f64,
    value: Option<f64>,
}

impl LowPass {
    /// Unprimed filter: the first sample passes through unchanged.
    pub fn new(cutoff_hz: f64) -> Result<Self, ControllerError> {
        if !(cutoff_hz > 0.0) {
            return Err(ControllerError::NonPositiveCutoff(cutoff_hz));
        }
        Ok(Self {
            cutoff_hz,
            value: None,
        })
    }

    pub fn with_value(cutoff_hz: f64, value: f64) -> Result<Self, ControllerError> {
        let mut f = Self::new(cutoff_hz)?;
        f.value = Some(value);
        Ok(f)
    }

    pub fn cutoff_hz(&self) -> f64 {
        self.cutoff_hz
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }

    /// Smoothing coefficient `dt / (dt + 1/(2π f_c))`.
    pub fn coefficient(&self, dt: f64) -> f64 {
        let rc = 1.0 / (2.0 * PI * self.cutoff_hz);
        dt / (dt + rc)
    }
}

/// Advances the filter by one sample and returns the new output.
pub fn lowpass_step(state: &mut LowPass, raw: f64, dt: f64) -> Result<f64, ControllerError> {
    if !(dt > 0.0) {
        return Err(ControllerError::NonPositiveDt(dt));
    }
    let y = match state.value {
        None => raw,
        Some(y) => y + state.coefficient(dt) * (raw - y),
    };
    state.value = Some(y);
    Ok(y)
}

/// Filters for the right and left hip angles.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub right: LowPass,
    pub left: LowPass,
}

impl FilterState {
    pub fn new(cutoff_hz: f64) -> Result<Self, ControllerError> {
        Ok(Self {
            right: LowPass::new(cutoff_hz)?,
            left: LowPass::new(cutoff_hz)?,
        })
    }

    pub fn step(&mut self, raw: PerSide<f64>, dt: f64) -> Result<PerSide<f64>, ControllerError> {
        Ok(PerSide::new(
            lowpass_step(&mut self.right, raw.right, dt)?,
            lowpass_step(&mut self.left, raw.left, dt)?,
        ))
    }
}

/// Relative-motion signal of the two legs.
pub fn control_signal(theta_right: f64, theta_left: f64) -> f64 {
    theta_right.sin() - theta_left.sin()
}

/// Time-stamped history of the control signal covering at least the maximum delay.
#[derive(Debug, Clone)]
pub struct DelayBuffer {
    samples: VecDeque<(f64, f64)>,
    horizon: f64,
    dt: f64,
}

impl DelayBuffer {
    /// Buffer able to look back `DELAY_BOUNDS.hi` seconds at timestep `dt`.
    pub fn new(dt: f64) -> Result<Self, ControllerError> {
        Self::with_horizon(dt, DELAY_BOUNDS.hi)
    }

    pub fn with_horizon(dt: f64, horizon: f64) -> Result<Self, ControllerError> {
        if !(dt > 0.0) {
            return Err(ControllerError::NonPositiveDt(dt));
        }
        let cap = (horizon / dt).ceil() as usize + 4;
        Ok(Self {
            samples: VecDeque::with_capacity(cap),
            horizon,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, t: f64, u: f64) -> Result<(), ControllerError> {
        if let Some(&(prev, _)) = self.samples.back() {
            if !(t > prev) {
                return Err(ControllerError::NonMonotonicTimestamp { prev, next: t });
            }
        }
        self.samples.push_back((t, u));
        // keep one sample older than the horizon so lookups at exactly
        // t - horizon can still interpolate
        while self.samples.len() > 2 && self.samples[1].0 < t - self.horizon - 1e-9 {
            self.samples.pop_front();
        }
        Ok(())
    }

    /// Linear interpolation of the stored signal at `t_query`; `None` when the
    /// buffer does not reach that far back (cold) or `t_query` is in the future.
    pub fn lookup(&self, t_query: f64) -> Option<f64> {
        const EPS: f64 = 1e-9;
        let &(t_first, u_first) = self.samples.front()?;
        let &(t_last, u_last) = self.samples.back()?;
        if t_query < t_first - EPS || t_query > t_last + EPS {
            return None;
        }
        if t_query <= t_first {
            return Some(u_first);
        }
        if t_query >= t_last {
            return Some(u_last);
        }
        let idx = self.samples.partition_point(|&(ts, _)| ts <= t_query);
        let (t0, u0) = self.samples[idx - 1];
        let (t1, u1) = self.samples[idx];
        let w = (t_query - t0) / (t1 - t0);
        Some(u0 + w * (u1 - u0))
    }
}

/// Assistance torque for both hips at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub torque: PerSide<f64>,
    /// False while the buffer cannot yet reach back to `t − Δt`.
    pub warm: bool,
}

/// `τ_right = κ·u(t − Δt)`, `τ_left = −τ_right`; zero torque on a cold buffer.
pub fn control_torque(c: &ExoControlParams, buf: &DelayBuffer, t: f64) -> ControlOutput {
    match buf.lookup(t - c.delay_dt) {
        Some(u) => {
            let tau = c.gain_kappa * u;
            ControlOutput {
                torque: PerSide::new(tau, -tau),
                warm: true,
            }
        }
        None => ControlOutput {
            torque: PerSide::new(0.0, 0.0),
            warm: false,
        },
    }
}

/// Net torque left for the muscles once the device contribution is removed.
pub fn compensate_torque(tau_pd: f64, tau_exo: f64) -> f64 {
    tau_pd - tau_exo
}

/// Filter, buffer and control law bundled for one rollout.
#[derive(Debug, Clone)]
pub struct ExoController {
    params: ExoControlParams,
    filter: FilterState,
    buffer: DelayBuffer,
}

impl ExoController {
    pub fn new(params: ExoControlParams, cutoff_hz: f64, dt: f64) -> Result<Self, ControllerError> {
        Ok(Self {
            params,
            filter: FilterState::new(cutoff_hz)?,
            buffer: DelayBuffer::new(dt)?,
        })
    }

    pub fn params(&self) -> &ExoControlParams {
        &self.params
    }

    /// Feed raw hip angles sampled at `t` and return the torque to apply at `t`.
    pub fn step(&mut self, t: f64, raw: PerSide<f64>) -> Result<ControlOutput, ControllerError> {
        let dt = self.buffer.dt();
        let filtered = self.filter.step(raw, dt)?;
        self.buffer
            .push(t, control_signal(filtered.right, filtered.left))?;
        Ok(control_torque(&self.params, &self.buffer, t))
    }
}

/// Device torque, mechanical power and hip velocity for both sides at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExoTorqueRecord {
    pub torque: PerSide<f64>,
    pub power: PerSide<f64>,
    pub angular_velocity: PerSide<f64>,
}

impl ExoTorqueRecord {
    pub fn new(torque: PerSide<f64>, angular_velocity: PerSide<f64>) -> Self {
        Self {
            torque,
            power: PerSide::new(
                torque.right * angular_velocity.right,
                torque.left * angular_velocity.left,
            ),
            angular_velocity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerStats {
    pub rms_moment: f64,
    pub mean_assist_power: f64,
    pub mean_resist_power: f64,
}

/// RMS moment and sign-split mean power, pooled over both sides.
pub fn power_stats(records: &[ExoTorqueRecord]) -> Result<PowerStats, ControllerError> {
    if records.is_empty() {
        return Err(ControllerError::EmptySequence);
    }
    let n = (2 * records.len()) as f64;
    let mut sq = 0.0;
    let mut assist = 0.0;
    let mut resist = 0.0;
    for r in records {
        for (tau, p) in r.torque.both().into_iter().zip(r.power.both()) {
            sq += tau * tau;
            assist += p.max(0.0);
            resist += p.min(0.0);
        }
    }
    Ok(PowerStats {
        rms_moment: (sq / n).sqrt(),
        mean_assist_power: assist / n,
        mean_resist_power: resist / n,
    })
}
