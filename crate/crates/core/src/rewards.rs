//! Reward terms of the human controller objective.
//!
//! These are evaluated standalone; no policy is trained against them here.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub w_gait: f64,
    pub w_energy: f64,
    pub w_arm: f64,
    pub w_hei: f64,
    pub sigma_step: f64,
    pub sigma_vel: f64,
    pub sigma_head: f64,
    pub sigma_sway: f64,
    pub sigma_arm: f64,
    pub lambda_r: f64,
    pub lambda_v: f64,
    pub lambda_omega: f64,
    /// Radians.
    pub delta_pelvis: f64,
    pub delta_spine: f64,
    pub delta_foot: f64,
    pub k_energy: f64,
    pub k_alive: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_gait: 1.0,
            w_energy: 0.35,
            w_arm: 1.0,
            w_hei: 0.1,
            sigma_step: 1.581,
            sigma_vel: 3.162,
            sigma_head: 4.0,
            sigma_sway: 0.816,
            sigma_arm: 1.0,
            lambda_r: 0.018,
            lambda_v: 0.0105,
            lambda_omega: 0.045,
            delta_pelvis: 10f64.to_radians(),
            delta_spine: 3f64.to_radians(),
            delta_foot: 12f64.to_radians(),
            k_energy: 0.2,
            k_alive: 0.1,
        }
    }
}

impl RewardWeights {
    pub fn is_valid(&self) -> bool {
        let sig = [
            self.sigma_step,
            self.sigma_vel,
            self.sigma_head,
            self.sigma_sway,
            self.sigma_arm,
        ];
        sig.iter().all(|s| *s > 0.0) && (0.0..=1.0).contains(&self.k_alive)
    }
}

/// Head orientation and accelerations.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HeadMotion {
    pub theta_head: f64,
    pub a_lin: f64,
    pub a_ang: f64,
}

/// Body angle and its normative reference, per swaying body.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SwayAngles {
    pub pelvis: (f64, f64),
    pub spine: (f64, f64),
    pub foot: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_step: f64,
    pub r_vel: f64,
    pub r_head: f64,
    pub r_sway: f64,
    pub r_gait: f64,
    pub r_arm: f64,
    pub r_energy: f64,
    pub r_hei: f64,
    pub r_total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GaitReward {
    pub r_step: f64,
    pub r_vel: f64,
    pub r_head: f64,
    pub r_sway: f64,
    pub r_gait: f64,
}

fn gauss(err: f64, sigma: f64) -> f64 {
    (-(err / sigma).powi(2)).exp()
}

/// Gated head factor: 1 up to the threshold, then decays toward `k_alive`.
pub fn head_factor(x: f64, threshold: f64, sigma: f64, k_alive: f64) -> f64 {
    let x = x.abs();
    if x > threshold {
        k_alive + (1.0 - k_alive) * gauss(x - threshold, sigma)
    } else {
        1.0
    }
}

/// Per-body sway factor: 1 inside the tolerance band, decaying outside it.
pub fn sway_factor(q: f64, q_ref: f64, delta: f64, sigma: f64) -> f64 {
    let dev = (q - q_ref).abs();
    if dev > delta {
        gauss(dev - delta, sigma)
    } else {
        1.0
    }
}

pub fn gait_reward(foot_err: f64, vel_err: f64, head: &HeadMotion, sway: &SwayAngles, w: &RewardWeights) -> GaitReward {
    let r_step = gauss(foot_err, w.sigma_step);
    let r_vel = gauss(vel_err, w.sigma_vel);
    let r_head = head_factor(head.theta_head, w.lambda_r, w.sigma_head, w.k_alive)
        * head_factor(head.a_lin, w.lambda_v, w.sigma_head, w.k_alive)
        * head_factor(head.a_ang, w.lambda_omega, w.sigma_head, w.k_alive);
    let r_sway = sway_factor(sway.pelvis.0, sway.pelvis.1, w.delta_pelvis, w.sigma_sway)
        * sway_factor(sway.spine.0, sway.spine.1, w.delta_spine, w.sigma_sway)
        * sway_factor(sway.foot.0, sway.foot.1, w.delta_foot, w.sigma_sway);
    GaitReward {
        r_step,
        r_vel,
        r_head,
        r_sway,
        r_gait: r_step * r_vel * r_head * r_sway,
    }
}

pub fn arm_reward(joint_errs: &[f64], sigma_arm: f64) -> f64 {
    let s: f64 = joint_errs.iter().map(|e| (e / sigma_arm).powi(2)).sum();
    (-s).exp()
}

pub fn energy_reward(mee_rate_value: f64, k_energy: f64) -> f64 {
    1.0 - k_energy * mee_rate_value
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HeiVariant {
    #[default]
    ResistanceMin,
    AssistMax,
    None,
}

/// Interaction reward from the two hip powers; gain 0 is neutral (1) for `ResistanceMin`.
pub fn hei_reward(p_left: f64, p_right: f64, kappa: f64, variant: HeiVariant) -> f64 {
    match variant {
        HeiVariant::ResistanceMin => {
            if kappa == 0.0 {
                1.0
            } else {
                1.0 + (p_left.min(0.0) + p_right.min(0.0)) / kappa
            }
        }
        HeiVariant::AssistMax => {
            if kappa == 0.0 {
                0.0
            } else {
                (p_left.max(0.0) + p_right.max(0.0)) / kappa
            }
        }
        HeiVariant::None => 0.0,
    }
}

/// Weighted sum of the four top-level rewards.
pub fn total_reward(r_gait: f64, r_arm: f64, r_energy: f64, r_hei: f64, w: &RewardWeights) -> f64 {
    w.w_gait * r_gait + w.w_arm * r_arm + w.w_energy * r_energy + w.w_hei * r_hei
}

/// All terms at once.
#[allow(clippy::too_many_arguments)]
pub fn breakdown(
    foot_err: f64,
    vel_err: f64,
    head: &HeadMotion,
    sway: &SwayAngles,
    arm_errs: &[f64],
    mee_rate_value: f64,
    powers: (f64, f64),
    kappa: f64,
    variant: HeiVariant,
    w: &RewardWeights,
) -> RewardBreakdown {
    let g = gait_reward(foot_err, vel_err, head, sway, w);
    let r_arm = arm_reward(arm_errs, w.sigma_arm);
    let r_energy = energy_reward(mee_rate_value, w.k_energy);
    let r_hei = hei_reward(powers.0, powers.1, kappa, variant);
    RewardBreakdown {
        r_step: g.r_step,
        r_vel: g.r_vel,
        r_head: g.r_head,
        r_sway: g.r_sway,
        r_gait: g.r_gait,
        r_arm,
        r_energy,
        r_hei,
        r_total: total_reward(g.r_gait, r_arm, r_energy, r_hei, w),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn perfect_tracking_is_one() {
        let w = RewardWeights::default();
        let g = gait_reward(0.0, 0.0, &HeadMotion::default(), &SwayAngles::default(), &w);
        assert_eq!((g.r_step, g.r_vel, g.r_head, g.r_sway, g.r_gait), (1.0, 1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn step_at_sigma() {
        let w = RewardWeights::default();
        let g = gait_reward(w.sigma_step, 0.0, &HeadMotion::default(), &SwayAngles::default(), &w);
        assert_abs_diff_eq!(g.r_step, 0.36788, epsilon = 1e-5);
    }

    #[test]
    fn head_floor_is_k_alive() {
        let w = RewardWeights::default();
        let head = HeadMotion { theta_head: 1e6, ..Default::default() };
        let g = gait_reward(0.0, 0.0, &head, &SwayAngles::default(), &w);
        assert_abs_diff_eq!(g.r_head, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn head_continuous_at_threshold() {
        let w = RewardWeights::default();
        let just_above = head_factor(w.lambda_r + 1e-9, w.lambda_r, w.sigma_head, w.k_alive);
        assert!((just_above - 1.0).abs() < 1e-12);
        assert!(just_above >= w.k_alive);
    }

    #[test]
    fn sway_band() {
        let w = RewardWeights::default();
        let inside = SwayAngles { pelvis: (0.1, 0.0), ..Default::default() };
        assert_eq!(gait_reward(0.0, 0.0, &HeadMotion::default(), &inside, &w).r_sway, 1.0);
        let outside = SwayAngles { spine: (0.5, 0.0), ..Default::default() };
        let r = gait_reward(0.0, 0.0, &HeadMotion::default(), &outside, &w).r_sway;
        let expected = (-((0.5 - w.delta_spine) / w.sigma_sway).powi(2)).exp();
        assert_abs_diff_eq!(r, expected, epsilon = 1e-15);
    }

    #[test]
    fn arm_examples() {
        assert_eq!(arm_reward(&[0.0, 0.0], 1.0), 1.0);
        assert_abs_diff_eq!(arm_reward(&[1.0], 1.0), (-1f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(arm_reward(&[1.0, 1.0], 1.0), 0.13534, epsilon = 1e-5);
    }

    #[test]
    fn energy_examples() {
        assert_eq!(energy_reward(0.0, 0.2), 1.0);
        assert_abs_diff_eq!(energy_reward(2.5, 0.2), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(energy_reward(10.0, 0.2), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn hei_examples() {
        assert_eq!(hei_reward(-2.0, 3.0, 8.0, HeiVariant::ResistanceMin), 0.75);
        assert_eq!(hei_reward(1.0, 3.0, 8.0, HeiVariant::ResistanceMin), 1.0);
        assert_eq!(hei_reward(-5.0, -3.0, 0.0, HeiVariant::ResistanceMin), 1.0);
        assert_eq!(hei_reward(-2.0, 3.0, 6.0, HeiVariant::AssistMax), 0.5);
        assert_eq!(hei_reward(-2.0, 3.0, 6.0, HeiVariant::None), 0.0);
    }

    #[test]
    fn total_examples() {
        let w = RewardWeights::default();
        assert_abs_diff_eq!(total_reward(1.0, 1.0, 1.0, 1.0, &w), 2.45, epsilon = 1e-12);
        assert_eq!(total_reward(0.0, 0.0, 0.0, 0.0, &w), 0.0);
        assert_eq!(total_reward(1.0, 0.0, 0.0, 0.0, &w), 1.0);
        assert!(w.is_valid());
    }

    #[test]
    fn breakdown_consistent() {
        let w = RewardWeights::default();
        let b = breakdown(
            0.3,
            0.2,
            &HeadMotion { theta_head: 0.05, a_lin: 0.0, a_ang: 0.1 },
            &SwayAngles::default(),
            &[0.1],
            2.0,
            (-1.0, 2.0),
            8.0,
            HeiVariant::ResistanceMin,
            &w,
        );
        assert_abs_diff_eq!(b.r_gait, b.r_step * b.r_vel * b.r_head * b.r_sway, epsilon = 1e-15);
        assert_abs_diff_eq!(
            b.r_total,
            w.w_gait * b.r_gait + w.w_arm * b.r_arm + w.w_energy * b.r_energy + w.w_hei * b.r_hei,
            epsilon = 1e-15
        );
    }

    proptest! {
        #[test]
        fn gait_bounded_by_factors(fe in 0.0f64..3.0, ve in 0.0f64..5.0, th in 0.0f64..1.0,
                                   al in 0.0f64..5.0, aa in 0.0f64..5.0, dp in -0.5f64..0.5) {
            let w = RewardWeights::default();
            let head = HeadMotion { theta_head: th, a_lin: al, a_ang: aa };
            let sway = SwayAngles { pelvis: (dp, 0.0), spine: (dp, 0.0), foot: (dp, 0.0) };
            let g = gait_reward(fe, ve, &head, &sway, &w);
            let m = g.r_step.min(g.r_vel).min(g.r_head).min(g.r_sway);
            prop_assert!(g.r_gait <= m + 1e-15);
            for r in [g.r_step, g.r_vel, g.r_head, g.r_sway] {
                prop_assert!(r > 0.0 && r <= 1.0);
            }
        }

        #[test]
        fn hei_at_most_one(pl in -50.0f64..50.0, pr in -50.0f64..50.0, k in 0.0f64..21.0) {
            let r = hei_reward(pl, pr, k, HeiVariant::ResistanceMin);
            prop_assert!(r <= 1.0);
            let eq = r == 1.0;
            prop_assert_eq!(eq, (pl >= 0.0 && pr >= 0.0) || k == 0.0);
        }

        #[test]
        fn exponentials_decrease(e in 0.0f64..3.0, de in 1e-3f64..1.0) {
            let w = RewardWeights::default();
            prop_assert!(arm_reward(&[e + de], 1.0) < arm_reward(&[e], 1.0));
            let a = head_factor(w.lambda_r + e, w.lambda_r, w.sigma_head, w.k_alive);
            let b = head_factor(w.lambda_r + e + de, w.lambda_r, w.sigma_head, w.k_alive);
            prop_assert!(b < a || (e == 0.0 && b <= a));
        }
    }
}
