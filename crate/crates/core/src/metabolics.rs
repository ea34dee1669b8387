//! Muscle-mass-weighted metabolic rate, cost of transport and assistance benefit.

use thiserror::Error;

use crate::domain::{ExoControlParams, MeeParams, MuscleSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetabolicsError {
    #[error("activation vector has {got} entries, muscle set has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("distance must be positive, got {0}")]
    ZeroDistance(f64),
    #[error("baseline cost of transport must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("curve has no assisted (kappa > 0) entry")]
    EmptyCurve,
    #[error("elapsed time step must be non-negative, got {0}")]
    NegativeDt(f64),
}

/// `basal + Σ m_i^α a_i^β` for raw masses.
pub fn mee_rate_masses(a: &[f64], masses: &[f64], p: &MeeParams) -> Result<f64, MetabolicsError> {
    if a.len() != masses.len() {
        return Err(MetabolicsError::DimensionMismatch {
            expected: masses.len(),
            got: a.len(),
        });
    }
    let active: f64 = a
        .iter()
        .zip(masses)
        .map(|(&ai, &mi)| mi.powf(p.alpha) * ai.powf(p.beta))
        .sum();
    Ok(p.basal_rate + active)
}

pub fn mee_rate(a: &[f64], muscles: &MuscleSet, p: &MeeParams) -> Result<f64, MetabolicsError> {
    mee_rate_masses(a, &muscles.masses(), p)
}

/// Running energy integral (rectangle rule).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyAccumulator {
    accumulated_joules: f64,
    elapsed: f64,
}

impl EnergyAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, rate_watts: f64, dt: f64) -> Result<(), MetabolicsError> {
        if !(dt >= 0.0) {
            return Err(MetabolicsError::NegativeDt(dt));
        }
        self.accumulated_joules += rate_watts.max(0.0) * dt;
        self.elapsed += dt;
        Ok(())
    }

    pub fn joules(&self) -> f64 {
        self.accumulated_joules
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }
}

pub fn cot(total_mee: f64, distance: f64) -> Result<f64, MetabolicsError> {
    if !(distance > 0.0) {
        return Err(MetabolicsError::ZeroDistance(distance));
    }
    Ok(total_mee / distance)
}

pub fn metabolic_reduction_rate(cot_off: f64, cot_on: f64) -> Result<f64, MetabolicsError> {
    if !(cot_off > 0.0) {
        return Err(MetabolicsError::NonPositiveBaseline(cot_off));
    }
    Ok((cot_off - cot_on) / cot_off)
}

/// `cot_off − min CoT over entries with κ > 0`.
pub fn benefit(curve: &[(ExoControlParams, f64)], cot_off: f64) -> Result<f64, MetabolicsError> {
    curve
        .iter()
        .filter(|(c, _)| c.gain_kappa > 0.0)
        .map(|&(_, v)| v)
        .reduce(f64::min)
        .map(|m| cot_off - m)
        .ok_or(MetabolicsError::EmptyCurve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn mee_rate_examples() {
        let p = MeeParams::new(1.5, 1.0, 0.0);
        let v = mee_rate_masses(&[0.5, 0.5], &[1.0, 2.0], &p).unwrap();
        assert_abs_diff_eq!(v, 1.91421, epsilon = 1e-5);
        let p2 = MeeParams::new(1.5, 2.0, 0.0);
        let v = mee_rate_masses(&[0.5, 0.5], &[1.0, 2.0], &p2).unwrap();
        assert_abs_diff_eq!(v, 0.95711, epsilon = 1e-5);
        let p3 = MeeParams::new(1.5, 1.0, 80.0);
        assert_eq!(mee_rate_masses(&[0.0, 0.0], &[1.0, 2.0], &p3).unwrap(), 80.0);
        assert!(mee_rate_masses(&[0.0], &[1.0, 2.0], &p3).is_err());
    }

    #[test]
    fn cot_examples() {
        assert_eq!(cot(100.0, 10.0).unwrap(), 10.0);
        let mut acc = EnergyAccumulator::new();
        for _ in 0..1000 {
            acc.add(80.0, 0.01).unwrap();
        }
        assert_abs_diff_eq!(cot(acc.joules(), 12.0).unwrap(), 66.667, epsilon = 1e-3);
        assert_eq!(cot(50.0, 20.0).unwrap(), cot(50.0, 10.0).unwrap() / 2.0);
        assert!(cot(1.0, 0.0).is_err());
    }

    #[test]
    fn reduction_rate_examples() {
        assert_abs_diff_eq!(metabolic_reduction_rate(3.0, 2.4).unwrap(), 0.2, epsilon = 1e-12);
        assert_eq!(metabolic_reduction_rate(3.0, 3.0).unwrap(), 0.0);
        assert_abs_diff_eq!(metabolic_reduction_rate(3.0, 3.3).unwrap(), -0.1, epsilon = 1e-12);
        assert!(metabolic_reduction_rate(0.0, 1.0).is_err());
    }

    #[test]
    fn benefit_examples() {
        let c = |k| ExoControlParams::new(k, 0.2);
        assert_eq!(benefit(&[(c(0.0), 3.0), (c(4.0), 2.7), (c(8.0), 2.5)], 3.0).unwrap(), 0.5);
        assert!(benefit(&[(c(4.0), 3.2), (c(8.0), 3.4)], 3.0).unwrap() < 0.0);
        assert_eq!(benefit(&[(c(6.0), 3.0)], 3.0).unwrap(), 0.0);
        assert_eq!(benefit(&[(c(0.0), 3.0)], 3.0), Err(MetabolicsError::EmptyCurve));
    }

    #[test]
    fn mrr_scale_invariant_benefit_not() {
        let c = |k| ExoControlParams::new(k, 0.2);
        let curve = [(c(5.0), 2.5)];
        let scaled = [(c(5.0), 5.0)];
        assert_eq!(
            metabolic_reduction_rate(3.0, 2.5).unwrap(),
            metabolic_reduction_rate(6.0, 5.0).unwrap()
        );
        assert_eq!(2.0 * benefit(&curve, 3.0).unwrap(), benefit(&scaled, 6.0).unwrap());
        assert_ne!(benefit(&curve, 3.0).unwrap(), benefit(&scaled, 6.0).unwrap());
    }

    proptest! {
        #[test]
        fn monotone_in_activation_and_mass(a in proptest::collection::vec(0.0f64..1.0, 4),
                                           m in proptest::collection::vec(0.1f64..20.0, 4),
                                           i in 0usize..4, da in 0.0f64..0.5, dm in 0.0f64..5.0,
                                           alpha in 0.5f64..2.5, beta in 0.5f64..2.5) {
            let p = MeeParams::new(alpha, beta, 10.0);
            let base = mee_rate_masses(&a, &m, &p).unwrap();
            let mut a2 = a.clone();
            a2[i] = (a2[i] + da).min(1.0);
            prop_assert!(mee_rate_masses(&a2, &m, &p).unwrap() >= base - 1e-12);
            let mut m2 = m.clone();
            m2[i] += dm;
            prop_assert!(mee_rate_masses(&a, &m2, &p).unwrap() >= base - 1e-12);
        }

        #[test]
        fn mass_scaling_law(a in proptest::collection::vec(0.0f64..1.0, 3),
                            m in proptest::collection::vec(0.1f64..20.0, 3),
                            s in 0.1f64..5.0, alpha in 0.5f64..2.5) {
            let p = MeeParams::new(alpha, 1.0, 0.0);
            let base = mee_rate_masses(&a, &m, &p).unwrap();
            let ms: Vec<f64> = m.iter().map(|x| x * s).collect();
            let scaled = mee_rate_masses(&a, &ms, &p).unwrap();
            prop_assert!((scaled - s.powf(alpha) * base).abs() <= 1e-9 * (1.0 + scaled.abs()));
        }
    }
}
