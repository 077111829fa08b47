//! Behavioral spiking neuron.
//!
//! The optoelectronic neuron circuit is modeled by the two-variable Izhikevich
//! equations; each bias-voltage recipe maps onto one `(a, b, c, d)` preset.
//! Model time is in ms-equivalent units and converted to μs when spike
//! trains are produced.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Membrane potential at which a spike is emitted and the state is reset.
pub const SPIKE_CUTOFF: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IzhikevichParams<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: Scalar> IzhikevichParams<T> {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self {
            a: T::lit(a),
            b: T::lit(b),
            c: T::lit(c),
            d: T::lit(d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IzhikevichState<T> {
    /// Membrane potential, mV.
    pub v: T,
    /// Recovery variable.
    pub u: T,
    pub params: IzhikevichParams<T>,
    /// Elapsed model time.
    pub t: T,
}

impl<T: Scalar> IzhikevichState<T> {
    /// Resting state `v = -65`, `u = b·v`.
    pub fn resting(params: IzhikevichParams<T>) -> Self {
        let v = T::lit(-65.0);
        Self {
            v,
            u: params.b * v,
            params,
            t: T::zero(),
        }
    }
}

/// One forward-Euler step (`u` updated with the new `v`), then the spike
/// reset `v ← c, u ← u + d` if `v` crossed the cutoff.
pub fn izhikevich_step<T: Scalar>(
    state: IzhikevichState<T>,
    input_current: T,
    dt: T,
) -> Result<(IzhikevichState<T>, bool)> {
    if !(dt > T::zero() && dt <= T::one()) {
        return Err(Error::InvalidTimeStep(dt.as_f64()));
    }
    let IzhikevichParams { a, b, c, d } = state.params;
    let v0 = state.v;
    let dv = T::lit(0.04) * v0 * v0 + T::lit(5.0) * v0 + T::lit(140.0) - state.u + input_current;
    let mut v = v0 + dt * dv;
    let mut u = state.u + dt * a * (b * v - state.u);
    let t = state.t + dt;
    if !v.is_finite() || !u.is_finite() {
        return Err(Error::IntegrationDivergence {
            t: t.as_f64(),
            v: v.as_f64(),
            u: u.as_f64(),
        });
    }
    let fired = v >= T::lit(SPIKE_CUTOFF);
    if fired {
        v = c;
        u = u + d;
    }
    Ok((IzhikevichState { v, u, params: state.params, t }, fired))
}

/// Rate-coded activation `1 / (1 + e^{-x})`.
#[inline]
pub fn sigmoid_rate<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PresetName {
    RS,
    FS,
    CH,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    Medium,
    High,
}

/// Qualitative bias-pin settings of the neuron circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiasLevels {
    pub v_bias: Level,
    pub v_th: Level,
    pub v_leak: Level,
    pub v_leak2: Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BiasPreset<T> {
    pub name: PresetName,
    pub bias_levels: BiasLevels,
    pub izh_params: IzhikevichParams<T>,
}

impl<T: Scalar> BiasPreset<T> {
    pub fn regular_spiking() -> Self {
        use Level::*;
        Self {
            name: PresetName::RS,
            bias_levels: BiasLevels {
                v_bias: Low,
                v_th: Low,
                v_leak: Low,
                v_leak2: Low,
            },
            izh_params: IzhikevichParams::new(0.02, 0.2, -65.0, 8.0),
        }
    }

    pub fn fast_spiking() -> Self {
        use Level::*;
        Self {
            name: PresetName::FS,
            bias_levels: BiasLevels {
                v_bias: Low,
                v_th: High,
                v_leak: Low,
                v_leak2: High,
            },
            izh_params: IzhikevichParams::new(0.1, 0.2, -65.0, 2.0),
        }
    }

    pub fn chattering() -> Self {
        use Level::*;
        Self {
            name: PresetName::CH,
            bias_levels: BiasLevels {
                v_bias: Medium,
                v_th: Medium,
                v_leak: High,
                v_leak2: High,
            },
            izh_params: IzhikevichParams::new(0.02, 0.2, -50.0, 2.0),
        }
    }

    pub fn get(name: PresetName) -> Self {
        match name {
            PresetName::RS => Self::regular_spiking(),
            PresetName::FS => Self::fast_spiking(),
            PresetName::CH => Self::chattering(),
        }
    }

    /// The three shipped presets.
    pub fn library() -> [Self; 3] {
        [Self::regular_spiking(), Self::fast_spiking(), Self::chattering()]
    }
}

/// Piecewise-constant photocurrent drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CurrentProfile<T> {
    /// `(start time in model ms, current in mA)`, sorted by start time.
    /// The current is zero before the first step.
    pub steps: Vec<(T, T)>,
}

impl<T: Scalar> CurrentProfile<T> {
    pub fn step(onset: T, current_ma: T) -> Self {
        Self {
            steps: vec![(onset, current_ma)],
        }
    }

    pub fn constant(current_ma: T) -> Self {
        Self::step(T::zero(), current_ma)
    }

    pub fn at(&self, t: T) -> T {
        self.steps
            .iter()
            .take_while(|(start, _)| *start <= t)
            .last()
            .map_or(T::zero(), |&(_, i)| i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SimConfig<T> {
    /// Euler step, model ms.
    pub dt: T,
    /// Model current units per mA of photocurrent (0.1 mA → 10).
    pub current_gain: T,
    /// Wall-clock μs per model ms.
    pub us_per_ms: T,
}

impl<T: Scalar> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(0.25),
            current_gain: T::lit(100.0),
            us_per_ms: T::lit(0.01),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SpikeTrain<T> {
    /// Strictly increasing spike times, μs.
    pub spike_times: Vec<T>,
    /// μs.
    pub duration: T,
}

impl<T: Scalar> SpikeTrain<T> {
    pub fn len(&self) -> usize {
        self.spike_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spike_times.is_empty()
    }

    pub fn isis(&self) -> Vec<T> {
        self.spike_times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn mean_isi(&self) -> Option<T> {
        let isis = self.isis();
        if isis.is_empty() {
            return None;
        }
        let n = T::from_usize(isis.len()).unwrap();
        Some(isis.iter().fold(T::zero(), |a, &b| a + b) / n)
    }
}

/// Simulates `preset` under `input` for `duration_ms` of model time.
pub fn run_preset<T: Scalar>(
    preset: &BiasPreset<T>,
    input: &CurrentProfile<T>,
    duration_ms: T,
    config: &SimConfig<T>,
) -> Result<SpikeTrain<T>> {
    let mut state = IzhikevichState::resting(preset.izh_params);
    let steps = (duration_ms / config.dt).round().to_usize().unwrap_or(0);
    let mut spikes = Vec::new();
    for k in 0..steps {
        let t = T::from_usize(k).unwrap() * config.dt;
        let current = config.current_gain * input.at(t);
        let (next, fired) = izhikevich_step(state, current, config.dt)?;
        state = next;
        if fired {
            spikes.push(state.t * config.us_per_ms);
        }
    }
    Ok(SpikeTrain {
        spike_times: spikes,
        duration: duration_ms * config.us_per_ms,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    RS,
    FS,
    CH,
    Quiescent,
}

impl From<PresetName> for Pattern {
    fn from(p: PresetName) -> Self {
        match p {
            PresetName::RS => Pattern::RS,
            PresetName::FS => Pattern::FS,
            PresetName::CH => Pattern::CH,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ClassifierConfig<T> {
    /// Mean ISI (μs) below which a tonic train counts as fast spiking.
    pub fs_max_mean_isi_us: T,
    /// Long/short ISI cluster ratio above which a train is bursting.
    pub burst_ratio: T,
    /// Smallest fraction of ISIs either cluster must hold to count.
    pub min_cluster_fraction: T,
}

impl<T: Scalar> Default for ClassifierConfig<T> {
    fn default() -> Self {
        Self {
            fs_max_mean_isi_us: T::lit(0.2),
            burst_ratio: T::lit(3.0),
            min_cluster_fraction: T::lit(0.1),
        }
    }
}

/// Splits the ISIs into two clusters (1-D 2-means, exact by scanning every
/// cut of the sorted list) and returns `mean(long) / mean(short)`.
///
/// Returns 1 when there are fewer than 4 intervals or when the smaller
/// cluster holds less than `min_fraction` of them (start-up transients).
pub fn isi_bimodality<T: Scalar>(isis: &[T], min_fraction: T) -> T {
    let n = isis.len();
    if n < 4 {
        return T::one();
    }
    let mut s = isis.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut prefix = vec![(T::zero(), T::zero()); n + 1];
    for (i, &x) in s.iter().enumerate() {
        prefix[i + 1] = (prefix[i].0 + x, prefix[i].1 + x * x);
    }
    let sse = |lo: usize, hi: usize| {
        let m = T::from_usize(hi - lo).unwrap();
        let sum = prefix[hi].0 - prefix[lo].0;
        let sq = prefix[hi].1 - prefix[lo].1;
        (sq - sum * sum / m, sum / m)
    };
    let mut best: Option<(T, usize, T, T)> = None;
    for k in 1..n {
        let (e0, m0) = sse(0, k);
        let (e1, m1) = sse(k, n);
        if best.map_or(true, |b| e0 + e1 < b.0) {
            best = Some((e0 + e1, k, m0, m1));
        }
    }
    let (_, k, short, long) = best.unwrap();
    let min_members = (min_fraction * T::from_usize(n).unwrap()).ceil().max(T::lit(2.0));
    let smaller = T::from_usize(k.min(n - k)).unwrap();
    if smaller < min_members || short <= T::zero() {
        return T::one();
    }
    long / short
}

pub fn classify_pattern<T: Scalar>(train: &SpikeTrain<T>, config: &ClassifierConfig<T>) -> Pattern {
    if train.len() < 3 {
        return Pattern::Quiescent;
    }
    let isis = train.isis();
    if isi_bimodality(&isis, config.min_cluster_fraction) > config.burst_ratio {
        return Pattern::CH;
    }
    match train.mean_isi() {
        Some(m) if m < config.fs_max_mean_isi_us => Pattern::FS,
        _ => Pattern::RS,
    }
}

/// Smallest constant drive (mA) that makes `preset` fire, found by
/// bisection on `[lo, hi]`. `None` if `lo` already fires or `hi` does not.
pub fn excitability_threshold<T: Scalar>(
    preset: &BiasPreset<T>,
    lo: T,
    hi: T,
    duration_ms: T,
    sim: &SimConfig<T>,
    classifier: &ClassifierConfig<T>,
    tol: T,
) -> Result<Option<T>> {
    let spiking = |i: T| -> Result<bool> {
        let train = run_preset(preset, &CurrentProfile::constant(i), duration_ms, sim)?;
        Ok(classify_pattern(&train, classifier) != Pattern::Quiescent)
    };
    let (mut lo, mut hi) = (lo, hi);
    if spiking(lo)? || !spiking(hi)? {
        return Ok(None);
    }
    while hi - lo > tol {
        let mid = (lo + hi) / T::lit(2.0);
        if spiking(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some((lo + hi) / T::lit(2.0)))
}

/// Writes `time_us,neuron_id` rows.
pub fn write_spike_csv<T: Scalar, W: Write>(trains: &[SpikeTrain<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_us", "neuron_id"])?;
    for (id, train) in trains.iter().enumerate() {
        for &t in &train.spike_times {
            w.write_record([crate::report::fmt_f64(t.as_f64()), id.to_string()])?;
        }
    }
    w.flush().map_err(|e| Error::io("<spike csv>", e))?;
    Ok(())
}
