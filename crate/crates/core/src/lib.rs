//! Simulation library for photonic spiking-neural-network hardware.
//!
//! The building blocks are Mach-Zehnder interferometer (MZI) meshes used as
//! synaptic interconnects ([`mesh`]), behavioral spiking neurons ([`neuron`]),
//! and two training rules that only need locally available measurements:
//! random backpropagation with redraw-on-worse-error ([`rbp`]) and contrastive
//! Hebbian learning on per-unit photodetector readings ([`chl`]).
//! [`imperfections`] adds optional hardware noise models and [`experiment`]
//! wires everything into reproducible, config-driven runs.
//!
//! All numerics are generic over a [`Scalar`] (`f32` or `f64`). The `*64`
//! aliases below are what the experiment layer and the CLI use.

pub mod chl;
pub mod error;
pub mod experiment;
pub mod imperfections;
pub mod iris;
pub mod mesh;
pub mod neuron;
pub mod rbp;
pub mod report;

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rand::distr::uniform::SampleUniform;

pub use error::{Error, Result, ResultExt};

/// Floating-point type the simulator can run on.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + SampleUniform
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Never fails for the supported float types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// `2π`.
    #[inline]
    fn two_pi() -> Self {
        Self::TAU()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Wraps a phase into `[0, 2π)`.
pub fn wrap_phase<T: Scalar>(phase: T) -> T {
    let tau = T::two_pi();
    let mut p = phase % tau;
    if p < T::zero() {
        p = p + tau;
    }
    // `x % tau + tau` can round up to exactly tau for tiny negative x.
    if p >= tau {
        p = T::zero();
    }
    p
}

pub type Mesh64 = mesh::Mesh<f64>;
pub type Mesh32 = mesh::Mesh<f32>;
pub type MziUnit64 = mesh::MziUnit<f64>;
pub type OpticalField64 = mesh::OpticalField<f64>;
pub type IzhikevichState64 = neuron::IzhikevichState<f64>;
pub type IzhikevichState32 = neuron::IzhikevichState<f32>;
pub type ChlNetwork64 = chl::ChlNetwork<f64>;
pub type ChlConfig64 = chl::ChlConfig<f64>;
pub type RbpConfig64 = rbp::RbpConfig<f64>;
pub type ImperfectionConfig64 = imperfections::ImperfectionConfig<f64>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_phase_range() {
        for &p in &[-7.0, -1e-300, 0.0, 3.0, 6.283185307179586, 100.0] {
            let w = wrap_phase(p);
            assert!((0.0..std::f64::consts::TAU).contains(&w), "{p} -> {w}");
        }
        assert_eq!(wrap_phase(std::f64::consts::TAU), 0.0);
        assert!((wrap_phase(-1.0f32) - (std::f32::consts::TAU - 1.0)).abs() < 1e-6);
    }
}
