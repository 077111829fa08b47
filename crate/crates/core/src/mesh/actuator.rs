use serde::{Deserialize, Serialize};

use crate::{wrap_phase, Scalar};

/// Thermo-optic heater: phase grows with dissipated power, so quadratically
/// with drive voltage, `phase(V) = theta_zero + alpha·V²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PhaseActuator<T> {
    /// Phase at zero drive, rad.
    pub theta_zero: T,
    /// Thermo-optic coefficient, rad/V².
    pub alpha: T,
}

impl<T: Scalar> Default for PhaseActuator<T> {
    fn default() -> Self {
        Self {
            theta_zero: T::zero(),
            alpha: T::lit(0.5),
        }
    }
}

impl<T: Scalar> PhaseActuator<T> {
    pub fn new(theta_zero: T, alpha: T) -> Self {
        Self { theta_zero, alpha }
    }

    /// Phase produced by `voltage`, wrapped to `[0, 2π)`.
    #[inline]
    pub fn phase(&self, voltage: T) -> T {
        wrap_phase(self.theta_zero + self.alpha * voltage * voltage)
    }

    /// Smallest non-negative voltage producing `phase` (mod 2π).
    pub fn voltage_for(&self, phase: T) -> T {
        if self.alpha <= T::zero() {
            return T::zero();
        }
        (wrap_phase(phase - self.theta_zero) / self.alpha).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn phase_law() {
        let a = PhaseActuator::new(0.0, 1.0);
        assert!((a.phase(PI.sqrt()) - PI).abs() < 1e-12);
        let b = PhaseActuator::new(PI / 2.0, 0.3);
        assert!((b.phase(0.0) - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn voltage_inverts_phase() {
        let a = PhaseActuator::<f64>::default();
        for k in 0..20 {
            let p = 0.3 * k as f64;
            let v = a.voltage_for(p);
            assert!(v >= 0.0);
            assert!((a.phase(v) - wrap_phase(p)).abs() < 1e-12);
        }
    }
}
