use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::{wrap_phase, Scalar};

/// How signals inside a mesh are represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldMode {
    /// Real amplitudes, external phase `phi` ignored. Every unit is the
    /// reflection `[[sin θ/2, cos θ/2], [cos θ/2, -sin θ/2]]`.
    RealAmplitude,
    /// Full complex fields including the external phase shifter.
    ComplexField,
}

/// 2x2 transfer matrix of one unit, row-major.
pub type Transfer<T> = [[Complex<T>; 2]; 2];

/// Real-mode transfer of a unit with internal phase `theta`.
#[inline]
pub fn unit_transfer_real<T: Scalar>(theta: T) -> [[T; 2]; 2] {
    let (s, c) = (theta / T::lit(2.0)).sin_cos();
    [[s, c], [c, -s]]
}

/// Transfer matrix of a single MZI.
///
/// In complex mode this is two ideal 50:50 couplers around the internal phase
/// `theta`, preceded by `phi` on the top input arm, with the global phase
/// `i·e^{iθ/2}` dropped:
///
/// ```text
/// [[e^{iφ} sin θ/2,  cos θ/2],
///  [e^{iφ} cos θ/2, -sin θ/2]]
/// ```
///
/// Magnitudes equal the real-mode entries and the two coincide at `phi = 0`.
pub fn unit_transfer<T: Scalar>(theta: T, phi: T, mode: FieldMode) -> Transfer<T> {
    let [[s, c], [_, _]] = unit_transfer_real(theta);
    let re = |x: T| Complex::new(x, T::zero());
    match mode {
        FieldMode::RealAmplitude => [[re(s), re(c)], [re(c), re(-s)]],
        FieldMode::ComplexField => {
            let e = Complex::from_polar(T::one(), phi);
            [[e * s, re(c)], [e * c, re(-s)]]
        }
    }
}

/// One 2x2 interferometer placed in a mesh, with its four monitor
/// photodetectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MziUnit<T> {
    pub layer: usize,
    pub pos: usize,
    /// Mesh ports `(k, k + 1)` the unit acts on.
    pub row_ports: (usize, usize),
    theta: T,
    phi: T,
    /// Tapped power at the two input ports from the last propagation, mW.
    pub monitor_in: [T; 2],
    /// Tapped power at the two output ports from the last propagation, mW.
    pub monitor_out: [T; 2],
}

impl<T: Scalar> MziUnit<T> {
    pub fn new(layer: usize, pos: usize, top: usize, theta: T, phi: T) -> Self {
        Self {
            layer,
            pos,
            row_ports: (top, top + 1),
            theta: wrap_phase(theta),
            phi: wrap_phase(phi),
            monitor_in: [T::zero(); 2],
            monitor_out: [T::zero(); 2],
        }
    }

    #[inline]
    pub fn theta(&self) -> T {
        self.theta
    }

    #[inline]
    pub fn phi(&self) -> T {
        self.phi
    }

    pub fn set_theta(&mut self, theta: T) {
        self.theta = wrap_phase(theta);
    }

    pub fn set_phi(&mut self, phi: T) {
        self.phi = wrap_phase(phi);
    }

    #[inline]
    pub fn top(&self) -> usize {
        self.row_ports.0
    }

    pub fn transfer(&self, mode: FieldMode) -> Transfer<T> {
        unit_transfer(self.theta, self.phi, mode)
    }

    pub(crate) fn clear_monitors(&mut self) {
        self.monitor_in = [T::zero(); 2];
        self.monitor_out = [T::zero(); 2];
    }
}

/// Vector of port amplitudes, in √mW.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalField<T> {
    pub amplitudes: Vec<Complex<T>>,
}

impl<T: Scalar> OpticalField<T> {
    pub fn new(amplitudes: Vec<Complex<T>>) -> Self {
        Self { amplitudes }
    }

    pub fn from_real(amplitudes: &[T]) -> Self {
        Self {
            amplitudes: amplitudes
                .iter()
                .map(|&a| Complex::new(a, T::zero()))
                .collect(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            amplitudes: vec![Complex::new(T::zero(), T::zero()); n],
        }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    #[inline]
    pub fn power(&self, port: usize) -> T {
        self.amplitudes[port].norm_sqr()
    }

    pub fn powers(&self) -> Vec<T> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn total_power(&self) -> T {
        self.amplitudes
            .iter()
            .fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    /// Real parts; the full signal in real-amplitude mode.
    pub fn real(&self) -> Vec<T> {
        self.amplitudes.iter().map(|a| a.re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) {
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - b[i][j]).abs() < 1e-15, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn real_transfer_at_named_angles() {
        close(unit_transfer_real(PI), [[1.0, 0.0], [0.0, -1.0]]);
        close(unit_transfer_real(0.0), [[0.0, 1.0], [1.0, 0.0]]);
        close(
            unit_transfer_real(PI / 2.0),
            [[FRAC_1_SQRT_2, FRAC_1_SQRT_2], [FRAC_1_SQRT_2, -FRAC_1_SQRT_2]],
        );
    }

    #[test]
    fn real_mode_ignores_phi() {
        let a = unit_transfer(1.1, 0.0, FieldMode::RealAmplitude);
        let b = unit_transfer(1.1, 2.7, FieldMode::RealAmplitude);
        assert_eq!(a, b);
    }

    #[test]
    fn complex_transfer_is_unitary_with_eq_magnitudes() {
        for k in 0..50 {
            let theta = 0.13 * k as f64;
            let phi = 0.71 * k as f64;
            let t = unit_transfer(theta, phi, FieldMode::ComplexField);
            let r = unit_transfer_real(theta);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((t[i][j].norm() - r[i][j].abs()).abs() < 1e-14);
                    let mut dot = Complex::new(0.0, 0.0);
                    for k in 0..2 {
                        dot += t[k][i].conj() * t[k][j];
                    }
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - want).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn unit_normalizes_phases() {
        let mut u = MziUnit::new(0, 0, 2, -PI / 2.0, 5.0 * PI);
        assert!((u.theta() - 1.5 * PI).abs() < 1e-12);
        assert!((u.phi() - PI).abs() < 1e-12);
        assert_eq!(u.row_ports, (2, 3));
        u.set_theta(2.0 * PI + 0.25);
        assert!((u.theta() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn field_power() {
        let f = OpticalField::new(vec![Complex::new(0.6, 0.0), Complex::new(0.0, 0.8)]);
        assert!((f.total_power() - 1.0f64).abs() < 1e-15);
        assert!((f.power(1) - 0.64).abs() < 1e-15);
    }
}
