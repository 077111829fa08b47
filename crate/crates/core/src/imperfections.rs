//! Optional hardware non-idealities: multiplicative photodetector noise,
//! static thermal crosstalk between heaters and DAC/ADC quantization.
//!
//! Every transform is stateless apart from the RNG stream handed in by the
//! caller. With every effect disabled nothing here is ever invoked, so
//! results stay bit-identical to the ideal simulation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct ImperfectionConfig<T> {
    pub pd_noise_enabled: bool,
    /// Relative standard deviation of every photodetector reading.
    pub pd_noise_sigma: T,

    pub crosstalk_enabled: bool,
    /// Explicit coupling matrix (rows sum to 1). When absent, a
    /// nearest-neighbour matrix is built from `crosstalk_leak`.
    pub crosstalk: Option<Vec<Vec<T>>>,
    /// Fraction of a heater's phase leaking to each adjacent shifter.
    pub crosstalk_leak: T,

    pub dac_enabled: bool,
    pub dac_bits: u32,
    /// Heater drive range, V.
    pub dac_range: (T, T),

    pub adc_enabled: bool,
    pub adc_bits: u32,
    /// Readout voltage range, V.
    pub adc_range: (T, T),
}

impl<T: Scalar> Default for ImperfectionConfig<T> {
    /// All effects disabled, magnitudes at their stress-test defaults.
    fn default() -> Self {
        Self {
            pd_noise_enabled: false,
            pd_noise_sigma: T::lit(0.01),
            crosstalk_enabled: false,
            crosstalk: None,
            crosstalk_leak: T::lit(0.02),
            dac_enabled: false,
            dac_bits: 12,
            dac_range: (T::lit(-5.0), T::lit(5.0)),
            adc_enabled: false,
            adc_bits: 12,
            adc_range: (T::zero(), T::lit(3.3)),
        }
    }
}

impl<T: Scalar> ImperfectionConfig<T> {
    /// Ideal hardware.
    pub fn disabled() -> Self {
        Self::default()
    }

    /// Every effect switched on at its default magnitude.
    pub fn all_enabled() -> Self {
        Self {
            pd_noise_enabled: true,
            crosstalk_enabled: true,
            dac_enabled: true,
            adc_enabled: true,
            ..Self::default()
        }
    }

    pub fn any_enabled(&self) -> bool {
        self.pd_noise_enabled || self.crosstalk_enabled || self.dac_enabled || self.adc_enabled
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pd_noise_sigma >= T::zero()) {
            return Err(Error::Config("pd_noise_sigma must be >= 0".into()));
        }
        for (name, bits) in [("dac_bits", self.dac_bits), ("adc_bits", self.adc_bits)] {
            if !(4..=16).contains(&bits) {
                return Err(Error::Config(format!("{name} = {bits} outside [4, 16]")));
            }
        }
        for (name, (lo, hi)) in [("dac_range", self.dac_range), ("adc_range", self.adc_range)] {
            if !(lo < hi) {
                return Err(Error::Config(format!("{name} is empty")));
            }
        }
        if !(self.crosstalk_leak >= T::zero() && self.crosstalk_leak <= T::lit(0.05)) {
            return Err(Error::Config("crosstalk_leak must lie in [0, 0.05]".into()));
        }
        if let Some(c) = &self.crosstalk {
            for (i, row) in c.iter().enumerate() {
                if row.len() != c.len() {
                    return Err(Error::Config("crosstalk matrix must be square".into()));
                }
                if row.iter().any(|&x| x < T::zero()) {
                    return Err(Error::Config(format!("crosstalk row {i} has negative entries")));
                }
                let s = row.iter().fold(T::zero(), |a, &b| a + b);
                if (s - T::one()).abs() > T::lit(1e-9) {
                    return Err(Error::Config(format!("crosstalk row {i} does not sum to 1")));
                }
            }
        }
        Ok(())
    }

    /// Coupling matrix for `n` shifters.
    pub fn coupling(&self, n: usize) -> Result<Vec<Vec<T>>> {
        match &self.crosstalk {
            Some(c) if c.len() == n => Ok(c.clone()),
            Some(c) => Err(Error::DimensionMismatch {
                expected: n,
                got: c.len(),
            }),
            None => Ok(neighbor_coupling(n, self.crosstalk_leak)),
        }
    }
}

/// Row-stochastic matrix where each shifter leaks `leak` of its phase to
/// each index neighbour.
pub fn neighbor_coupling<T: Scalar>(n: usize, leak: T) -> Vec<Vec<T>> {
    (0..n)
        .map(|i| {
            let mut row = vec![T::zero(); n];
            let mut diag = T::one();
            for j in [i.wrapping_sub(1), i + 1] {
                if j < n {
                    row[j] = leak;
                    diag = diag - leak;
                }
            }
            row[i] = diag;
            row
        })
        .collect()
}

/// `power·(1 + N(0, σ))`, clamped at zero.
pub fn corrupt_reading<T: Scalar, R: Rng + ?Sized>(power: T, sigma: T, rng: &mut R) -> T {
    if sigma == T::zero() {
        return power;
    }
    let z: f64 = StandardNormal.sample(rng);
    (power * (T::one() + sigma * T::lit(z))).max(T::zero())
}

/// `θ' = C·θ`.
pub fn apply_crosstalk<T: Scalar>(phases: &[T], coupling: &[Vec<T>]) -> Result<Vec<T>> {
    if coupling.len() != phases.len() {
        return Err(Error::DimensionMismatch {
            expected: phases.len(),
            got: coupling.len(),
        });
    }
    coupling
        .iter()
        .map(|row| {
            if row.len() != phases.len() {
                return Err(Error::DimensionMismatch {
                    expected: phases.len(),
                    got: row.len(),
                });
            }
            Ok(row
                .iter()
                .zip(phases)
                .fold(T::zero(), |acc, (&c, &p)| acc + c * p))
        })
        .collect()
}

/// Uniform mid-rise quantizer with `2^bits` levels over `[lo, hi]`;
/// out-of-range inputs saturate to the end levels.
pub fn quantize<T: Scalar>(value: T, bits: u32, (lo, hi): (T, T)) -> Result<T> {
    if bits == 0 || bits > 52 {
        return Err(Error::Config(format!("quantizer bits {bits} outside [1, 52]")));
    }
    if !(lo < hi) {
        return Err(Error::Config("quantizer range is empty".into()));
    }
    let levels = T::lit((1u64 << bits) as f64);
    let step = (hi - lo) / levels;
    let idx = ((value - lo) / step)
        .floor()
        .max(T::zero())
        .min(levels - T::one());
    Ok(lo + (idx + T::lit(0.5)) * step)
}

/// Applies the enabled effects of an [`ImperfectionConfig`] with a private
/// RNG stream.
#[derive(Debug, Clone)]
pub struct HardwareModel<T, R> {
    config: ImperfectionConfig<T>,
    rng: R,
}

impl<T: Scalar, R: Rng> HardwareModel<T, R> {
    pub fn new(config: ImperfectionConfig<T>, rng: R) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, rng })
    }

    pub fn config(&self) -> &ImperfectionConfig<T> {
        &self.config
    }

    /// Photodetector reading of `power`.
    pub fn read_power(&mut self, power: T) -> T {
        if self.config.pd_noise_enabled {
            corrupt_reading(power, self.config.pd_noise_sigma, &mut self.rng)
        } else {
            power
        }
    }

    /// Voltage actually delivered by the DAC.
    pub fn dac(&self, voltage: T) -> T {
        if self.config.dac_enabled {
            quantize(voltage, self.config.dac_bits, self.config.dac_range)
                .expect("validated quantizer")
        } else {
            voltage
        }
    }

    /// Voltage reported by the ADC.
    pub fn adc(&self, voltage: T) -> T {
        if self.config.adc_enabled {
            quantize(voltage, self.config.adc_bits, self.config.adc_range)
                .expect("validated quantizer")
        } else {
            voltage
        }
    }
}
