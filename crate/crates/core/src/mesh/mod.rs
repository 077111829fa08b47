//! MZI units and rectangular (Clements-style) meshes.
//!
//! Layout convention: a mesh with `n` ports has `n` layers. Layer `l` holds
//! units on port pairs `(k, k + 1)` for `k = l mod 2, l mod 2 + 2, ...`
//! with `k + 1 < n`. Units are stored layer by layer (left to right) and top
//! to bottom inside a layer; that order is also the propagation order and
//! the order of every phase or voltage vector. Phase vectors interleave the
//! two shifters of each unit as `[θ₀, φ₀, θ₁, φ₁, ...]`.

mod actuator;
mod unit;

use ndarray::Array2;
use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use actuator::PhaseActuator;
pub use unit::{unit_transfer, unit_transfer_real, FieldMode, MziUnit, OpticalField, Transfer};

use crate::{Error, Result, Scalar};

/// Power taps feeding the monitor photodetectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TapConfig<T> {
    /// Fraction of port power routed to the monitor PD (1:99 tap = 0.01).
    pub ratio: T,
    /// Remove the tapped fraction from the through path.
    pub lossy: bool,
}

impl<T: Scalar> Default for TapConfig<T> {
    fn default() -> Self {
        Self {
            ratio: T::lit(0.01),
            lossy: false,
        }
    }
}

impl<T: Scalar> TapConfig<T> {
    /// Amplitude factor applied to the through signal at each tap.
    #[inline]
    fn through(&self) -> T {
        if self.lossy {
            (T::one() - self.ratio).sqrt()
        } else {
            T::one()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MeshConfig<T> {
    pub theta_init: T,
    pub phi_init: T,
    pub tap: TapConfig<T>,
    pub theta_actuator: PhaseActuator<T>,
    pub phi_actuator: PhaseActuator<T>,
}

impl<T: Scalar> Default for MeshConfig<T> {
    fn default() -> Self {
        Self {
            theta_init: T::FRAC_PI_2(),
            phi_init: T::zero(),
            tap: TapConfig::default(),
            theta_actuator: PhaseActuator::default(),
            phi_actuator: PhaseActuator::default(),
        }
    }
}

/// `(layer, position in layer, top port)` for every unit of an `n`-port
/// rectangular mesh, in storage order.
pub fn rectangular_layout(n: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for layer in 0..n {
        for (pos, top) in (layer % 2..n.saturating_sub(1)).step_by(2).enumerate() {
            out.push((layer, pos, top));
        }
    }
    out
}

/// Rectangular mesh of `n(n-1)/2` MZI units on `n` waveguides.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T> {
    n: usize,
    mode: FieldMode,
    units: Vec<MziUnit<T>>,
    tap: TapConfig<T>,
    theta_actuator: PhaseActuator<T>,
    phi_actuator: PhaseActuator<T>,
}

impl<T: Scalar> Mesh<T> {
    pub fn build_rectangular(n: usize, mode: FieldMode, config: &MeshConfig<T>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension(n));
        }
        let units = rectangular_layout(n)
            .into_iter()
            .map(|(layer, pos, top)| {
                MziUnit::new(layer, pos, top, config.theta_init, config.phi_init)
            })
            .collect();
        Ok(Self {
            n,
            mode,
            units,
            tap: config.tap,
            theta_actuator: config.theta_actuator,
            phi_actuator: config.phi_actuator,
        })
    }

    /// Mesh with default config.
    pub fn new(n: usize, mode: FieldMode) -> Result<Self> {
        Self::build_rectangular(n, mode, &MeshConfig::default())
    }

    /// Draws every θ and φ uniformly from `[0, 2π)`.
    pub fn randomize<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let tau = T::two_pi();
        for u in &mut self.units {
            u.set_theta(rng.random_range(T::zero()..tau));
            u.set_phi(rng.random_range(T::zero()..tau));
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn mode(&self) -> FieldMode {
        self.mode
    }

    pub fn units(&self) -> &[MziUnit<T>] {
        &self.units
    }

    pub fn units_mut(&mut self) -> &mut [MziUnit<T>] {
        &mut self.units
    }

    pub fn unit_count(&self) -> usize {
        self.units.len()
    }

    /// Number of tunable phase shifters, `n(n-1)`.
    pub fn phase_count(&self) -> usize {
        2 * self.units.len()
    }

    /// Number of units in each non-empty layer.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n];
        for u in &self.units {
            sizes[u.layer] += 1;
        }
        sizes.retain(|&s| s > 0);
        sizes
    }

    pub fn tap(&self) -> &TapConfig<T> {
        &self.tap
    }

    pub fn theta_actuator(&self) -> &PhaseActuator<T> {
        &self.theta_actuator
    }

    pub fn phi_actuator(&self) -> &PhaseActuator<T> {
        &self.phi_actuator
    }

    pub fn thetas(&self) -> Vec<T> {
        self.units.iter().map(|u| u.theta()).collect()
    }

    pub fn set_thetas(&mut self, thetas: &[T]) -> Result<()> {
        check_len(self.units.len(), thetas.len())?;
        for (u, &t) in self.units.iter_mut().zip(thetas) {
            u.set_theta(t);
        }
        Ok(())
    }

    /// Interleaved `[θ₀, φ₀, θ₁, φ₁, ...]`.
    pub fn phases(&self) -> Vec<T> {
        self.units
            .iter()
            .flat_map(|u| [u.theta(), u.phi()])
            .collect()
    }

    pub fn set_phases(&mut self, phases: &[T]) -> Result<()> {
        check_len(self.phase_count(), phases.len())?;
        for (u, p) in self.units.iter_mut().zip(phases.chunks_exact(2)) {
            u.set_theta(p[0]);
            u.set_phi(p[1]);
        }
        Ok(())
    }

    /// Drives every heater; `voltages` is interleaved like [`Mesh::phases`].
    pub fn apply_voltages(&mut self, voltages: &[T]) -> Result<()> {
        check_len(self.phase_count(), voltages.len())?;
        for (u, v) in self.units.iter_mut().zip(voltages.chunks_exact(2)) {
            u.set_theta(self.theta_actuator.phase(v[0]));
            u.set_phi(self.phi_actuator.phase(v[1]));
        }
        Ok(())
    }

    /// Non-negative heater voltages reproducing the current phases.
    pub fn voltages(&self) -> Vec<T> {
        self.units
            .iter()
            .flat_map(|u| {
                [
                    self.theta_actuator.voltage_for(u.theta()),
                    self.phi_actuator.voltage_for(u.phi()),
                ]
            })
            .collect()
    }

    /// Output field for `input` without touching any monitor.
    pub fn transmit(&self, input: &OpticalField<T>) -> Result<OpticalField<T>> {
        check_len(self.n, input.len())?;
        Ok(self.sweep(input, false, |_, _, _| {}))
    }

    /// Sends `input` through the mesh and refreshes every unit's monitors.
    pub fn propagate(&mut self, input: &OpticalField<T>) -> Result<OpticalField<T>> {
        check_len(self.n, input.len())?;
        let r = self.tap.ratio;
        let mut monitors = vec![([T::zero(); 2], [T::zero(); 2]); self.units.len()];
        let out = self.sweep(input, false, |i, a_in, a_out| {
            monitors[i] = (tapped(r, a_in), tapped(r, a_out));
        });
        for (u, (m_in, m_out)) in self.units.iter_mut().zip(monitors) {
            u.monitor_in = m_in;
            u.monitor_out = m_out;
        }
        Ok(out)
    }

    /// Propagates `forward` left to right and `backward` right to left at
    /// the same time (separate wavelengths). Each monitor PD reads the sum
    /// of both powers at its port. Backward light sees the transpose of the
    /// forward transfer (reciprocity).
    ///
    /// Returns `(forward output at the right ports, backward output at the
    /// left ports)`.
    pub fn propagate_bidirectional(
        &mut self,
        forward: &OpticalField<T>,
        backward: &OpticalField<T>,
    ) -> Result<(OpticalField<T>, OpticalField<T>)> {
        check_len(self.n, forward.len())?;
        check_len(self.n, backward.len())?;
        let r = self.tap.ratio;
        for u in &mut self.units {
            u.clear_monitors();
        }
        let mut monitors = vec![([T::zero(); 2], [T::zero(); 2]); self.units.len()];
        let fwd = self.sweep(forward, false, |i, a_in, a_out| {
            monitors[i] = (tapped(r, a_in), tapped(r, a_out));
        });
        // Reverse sweep: light enters at the unit's right ports, leaves left.
        let bwd = self.sweep(backward, true, |i, a_right, a_left| {
            let (l, rr) = (tapped(r, a_left), tapped(r, a_right));
            let m = &mut monitors[i];
            for k in 0..2 {
                m.0[k] = m.0[k] + l[k];
                m.1[k] = m.1[k] + rr[k];
            }
        });
        for (u, (m_in, m_out)) in self.units.iter_mut().zip(monitors) {
            u.monitor_in = m_in;
            u.monitor_out = m_out;
        }
        Ok((fwd, bwd))
    }

    /// Core propagation loop; `visit(unit index, entering pair, leaving pair)`
    /// sees untapped amplitudes in travel direction.
    fn sweep<F>(&self, input: &OpticalField<T>, reverse: bool, mut visit: F) -> OpticalField<T>
    where
        F: FnMut(usize, [Complex<T>; 2], [Complex<T>; 2]),
    {
        let through = self.tap.through();
        let mut x = input.amplitudes.clone();
        let mut step = |i: usize, u: &MziUnit<T>| {
            let k = u.top();
            let a = [x[k], x[k + 1]];
            let t = u.transfer(self.mode);
            let ai = [a[0] * through, a[1] * through];
            let b = if reverse {
                [t[0][0] * ai[0] + t[1][0] * ai[1], t[0][1] * ai[0] + t[1][1] * ai[1]]
            } else {
                [t[0][0] * ai[0] + t[0][1] * ai[1], t[1][0] * ai[0] + t[1][1] * ai[1]]
            };
            visit(i, a, b);
            x[k] = b[0] * through;
            x[k + 1] = b[1] * through;
        };
        if reverse {
            for (i, u) in self.units.iter().enumerate().rev() {
                step(i, u);
            }
        } else {
            for (i, u) in self.units.iter().enumerate() {
                step(i, u);
            }
        }
        OpticalField::new(x)
    }

    /// Full transfer matrix: ordered product of the embedded unit transfers
    /// (including tap loss when enabled).
    pub fn matrix(&self) -> Array2<Complex<T>> {
        let n = self.n;
        let through = self.tap.through();
        let g = Complex::new(through * through, T::zero());
        let mut w = Array2::from_shape_fn((n, n), |(i, j)| {
            Complex::new(if i == j { T::one() } else { T::zero() }, T::zero())
        });
        for u in &self.units {
            let k = u.top();
            let t = u.transfer(self.mode);
            for col in 0..n {
                let a = w[[k, col]] * g;
                let b = w[[k + 1, col]] * g;
                w[[k, col]] = t[0][0] * a + t[0][1] * b;
                w[[k + 1, col]] = t[1][0] * a + t[1][1] * b;
            }
        }
        w
    }

    /// Real-amplitude transfer matrix (φ ignored).
    pub fn real_matrix(&self) -> Array2<T> {
        let n = self.n;
        let g = self.tap.through() * self.tap.through();
        let mut w = Array2::from_shape_fn((n, n), |(i, j)| if i == j { T::one() } else { T::zero() });
        for u in &self.units {
            let k = u.top();
            let t = unit_transfer_real(u.theta());
            for col in 0..n {
                let a = w[[k, col]] * g;
                let b = w[[k + 1, col]] * g;
                w[[k, col]] = t[0][0] * a + t[0][1] * b;
                w[[k + 1, col]] = t[1][0] * a + t[1][1] * b;
            }
        }
        w
    }

    pub fn state(&self) -> MeshState<T> {
        MeshState {
            n: self.n,
            mode: self.mode,
            units: self
                .units
                .iter()
                .map(|u| UnitState {
                    layer: u.layer,
                    pos: u.pos,
                    theta: u.theta(),
                    phi: u.phi(),
                })
                .collect(),
        }
    }

    /// Rebuilds a mesh from saved phases; taps and actuators come from
    /// `config`.
    pub fn from_state(state: &MeshState<T>, config: &MeshConfig<T>) -> Result<Self> {
        let mut mesh = Self::build_rectangular(state.n, state.mode, config)?;
        check_len(mesh.units.len(), state.units.len())?;
        for (u, s) in mesh.units.iter_mut().zip(&state.units) {
            if (u.layer, u.pos) != (s.layer, s.pos) {
                return Err(Error::Config(format!(
                    "unit ({}, {}) found where ({}, {}) expected",
                    s.layer, s.pos, u.layer, u.pos
                )));
            }
            u.set_theta(s.theta);
            u.set_phi(s.phi);
        }
        Ok(mesh)
    }
}

#[inline]
fn tapped<T: Scalar>(ratio: T, a: [Complex<T>; 2]) -> [T; 2] {
    [ratio * a[0].norm_sqr(), ratio * a[1].norm_sqr()]
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Serialized mesh phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MeshState<T> {
    pub n: usize,
    pub mode: FieldMode,
    pub units: Vec<UnitState<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct UnitState<T> {
    pub layer: usize,
    pub pos: usize,
    pub theta: T,
    pub phi: T,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn mesh_with_theta(n: usize, theta: f64) -> Mesh<f64> {
        let cfg = MeshConfig::<f64> {
            theta_init: theta,
            ..MeshConfig::default()
        };
        Mesh::build_rectangular(n, FieldMode::RealAmplitude, &cfg).unwrap()
    }

    #[test]
    fn unit_and_phase_counts() {
        let m = Mesh::<f64>::new(2, FieldMode::RealAmplitude).unwrap();
        assert_eq!((m.unit_count(), m.phase_count()), (1, 2));
        let m = Mesh::<f64>::new(6, FieldMode::RealAmplitude).unwrap();
        assert_eq!((m.unit_count(), m.phase_count()), (15, 30));
        let m = Mesh::<f64>::new(4, FieldMode::RealAmplitude).unwrap();
        assert_eq!(m.layer_sizes(), vec![2, 1, 2, 1]);
    }

    #[test]
    fn rejects_small_meshes() {
        assert!(matches!(
            Mesh::<f64>::new(1, FieldMode::RealAmplitude),
            Err(Error::InvalidDimension(1))
        ));
        assert!(Mesh::<f64>::new(0, FieldMode::ComplexField).is_err());
    }

    #[test]
    fn default_phases() {
        let m = Mesh::<f64>::new(5, FieldMode::ComplexField).unwrap();
        assert!(m.units().iter().all(|u| u.theta() == PI / 2.0 && u.phi() == 0.0));
    }

    #[test]
    fn bar_and_cross_two_port() {
        let mut bar = mesh_with_theta(2, PI);
        let out = bar.propagate(&OpticalField::from_real(&[1.0, 0.0])).unwrap();
        assert!((out.real()[0] - 1.0).abs() < 1e-15 && out.real()[1].abs() < 1e-15);

        let mut cross = mesh_with_theta(2, 0.0);
        let out = cross.propagate(&OpticalField::from_real(&[1.0, 0.0])).unwrap();
        assert!(out.real()[0].abs() < 1e-15 && (out.real()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn propagate_rejects_wrong_length() {
        let mut m = Mesh::<f64>::new(3, FieldMode::RealAmplitude).unwrap();
        let err = m.propagate(&OpticalField::from_real(&[1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, got: 2 }));
    }

    #[test]
    fn two_port_matrix_is_unit_transfer() {
        let m = mesh_with_theta(2, PI / 2.0);
        let w = m.real_matrix();
        let t = unit_transfer_real(PI / 2.0);
        for i in 0..2 {
            for j in 0..2 {
                assert!((w[[i, j]] - t[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn monitors_track_port_powers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = Mesh::<f64>::new(6, FieldMode::RealAmplitude).unwrap();
        m.randomize(&mut rng);
        let x = OpticalField::from_real(&[0.5, 0.5, 0.5, 0.5, 0.0, 0.0]);
        let out = m.propagate(&x).unwrap();
        let r = m.tap().ratio;
        // The last unit touching each port sees the output power there.
        let mut total = 0.0;
        for p in 0..6 {
            let (u, side) = m
                .units()
                .iter()
                .rev()
                .find_map(|u| {
                    if u.row_ports.0 == p {
                        Some((u, 0))
                    } else if u.row_ports.1 == p {
                        Some((u, 1))
                    } else {
                        None
                    }
                })
                .unwrap();
            assert!((u.monitor_out[side] - r * out.power(p)).abs() < 1e-12);
            total += u.monitor_out[side];
        }
        assert!((total - r * out.total_power()).abs() < 1e-12);
        // First-layer inputs see the injected powers.
        assert!((m.units()[0].monitor_in[0] - r * 0.25).abs() < 1e-15);
    }

    #[test]
    fn lossy_taps_drop_power() {
        let cfg = MeshConfig::<f64> {
            tap: TapConfig {
                ratio: 0.01,
                lossy: true,
            },
            ..MeshConfig::default()
        };
        let mut m = Mesh::build_rectangular(2, FieldMode::RealAmplitude, &cfg).unwrap();
        let out = m.propagate(&OpticalField::from_real(&[1.0, 0.0])).unwrap();
        assert!((out.total_power() - 0.99 * 0.99).abs() < 1e-12);
        let w = m.real_matrix();
        let y = [w[[0, 0]], w[[1, 0]]];
        assert!((y[0] - out.real()[0]).abs() < 1e-15 && (y[1] - out.real()[1]).abs() < 1e-15);
    }

    #[test]
    fn voltages_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut m = Mesh::<f64>::new(4, FieldMode::ComplexField).unwrap();
        m.randomize(&mut rng);
        let before = m.phases();
        let v = m.voltages();
        m.apply_voltages(&v).unwrap();
        for (a, b) in before.iter().zip(m.phases()) {
            let d = (a - b).abs();
            assert!(d < 1e-12 || (d - 2.0 * PI).abs() < 1e-12);
        }
        assert!(m.apply_voltages(&v[1..]).is_err());
    }

    #[test]
    fn voltage_examples() {
        let cfg = MeshConfig::<f64> {
            theta_actuator: PhaseActuator::new(PI / 2.0, 0.5),
            ..MeshConfig::default()
        };
        let mut m = Mesh::build_rectangular(3, FieldMode::RealAmplitude, &cfg).unwrap();
        m.apply_voltages(&[0.0; 6]).unwrap();
        assert!(m.thetas().iter().all(|&t| (t - PI / 2.0).abs() < 1e-15));

        let cfg = MeshConfig::<f64> {
            theta_actuator: PhaseActuator::new(0.0, 1.0),
            ..MeshConfig::default()
        };
        let mut m = Mesh::build_rectangular(2, FieldMode::RealAmplitude, &cfg).unwrap();
        m.apply_voltages(&[PI.sqrt(), 0.0]).unwrap();
        assert!((m.thetas()[0] - PI).abs() < 1e-12);
    }

    #[test]
    fn bidirectional_real_reciprocity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = Mesh::<f64>::new(4, FieldMode::RealAmplitude).unwrap();
        m.randomize(&mut rng);
        let w = m.real_matrix();
        let f = [0.1, 0.7, 0.2, 0.4];
        let b = [0.3, 0.1, 0.9, 0.5];
        let (fo, bo) = m
            .propagate_bidirectional(&OpticalField::from_real(&f), &OpticalField::from_real(&b))
            .unwrap();
        for i in 0..4 {
            let wf: f64 = (0..4).map(|j| w[[i, j]] * f[j]).sum();
            let wtb: f64 = (0..4).map(|j| w[[j, i]] * b[j]).sum();
            assert!((fo.real()[i] - wf).abs() < 1e-12);
            assert!((bo.real()[i] - wtb).abs() < 1e-12);
        }
        // First unit's left PDs read forward input plus backward exit power.
        let u = &m.units()[0];
        let r = m.tap().ratio;
        let (k0, k1) = u.row_ports;
        assert!((u.monitor_in[0] - r * (f[k0].powi(2) + bo.real()[k0].powi(2))).abs() < 1e-12);
        assert!((u.monitor_in[1] - r * (f[k1].powi(2) + bo.real()[k1].powi(2))).abs() < 1e-12);
    }

    #[test]
    fn state_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = Mesh::<f64>::new(5, FieldMode::ComplexField).unwrap();
        m.randomize(&mut rng);
        let back = Mesh::from_state(&m.state(), &MeshConfig::default()).unwrap();
        assert_eq!(back.phases(), m.phases());
    }

    #[test]
    fn generic_f32_mesh() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = Mesh::<f32>::new(4, FieldMode::RealAmplitude).unwrap();
        m.randomize(&mut rng);
        let out = m
            .propagate(&OpticalField::from_real(&[0.5f32, 0.5, 0.5, 0.5]))
            .unwrap();
        assert!((out.total_power() - 1.0).abs() < 1e-5);
    }
}
