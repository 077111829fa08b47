//! Contrastive Hebbian learning on a two-layer rate-coded network whose
//! synapses are 4×4 real MZI meshes.
//!
//! Layer 1 (hidden) receives the input through mesh 1 and feedback from
//! layer 2 (output) through the transpose of mesh 2. Each sample is run in a
//! free (minus) phase and a clamped (plus) phase. Every MZI unit then forms a
//! local 2×2 weight change from the amplitudes seen by its own monitor PDs
//! and converts it to a `Δθ` by averaging the inverse weight derivatives.
//!
//! Two baselines share the same starting matrices: [`Variant::IdealChl`]
//! applies the rule to unconstrained dense matrices and
//! [`Variant::RandomControl`] perturbs dense matrices with random changes of
//! the same average size as the MZI run's.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::mesh::{FieldMode, Mesh, MeshConfig, OpticalField};
use crate::neuron::sigmoid_rate;
use crate::{Error, Result, Scalar};

pub const LAYER_SIZE: usize = 4;

pub type Vec4<T> = [T; LAYER_SIZE];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    MziChl,
    IdealChl,
    RandomControl,
}

/// How a unit's monitor PDs separate the two light directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordMode {
    /// Each PD sums the power of every wavelength crossing it.
    Summed,
    /// Input PDs see only forward light, output PDs only backward light.
    Separate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct SettleConfig<T> {
    pub max_iters: usize,
    pub tol: T,
    /// Fraction of the new value mixed in per iteration (1 = undamped).
    pub damping: T,
    /// Scale of the output→hidden feedback.
    pub feedback_gain: T,
}

impl<T: Scalar> Default for SettleConfig<T> {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: T::lit(1e-6),
            damping: T::lit(0.5),
            feedback_gain: T::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct ChlConfig<T> {
    pub eta: T,
    pub epochs: usize,
    pub dataset_size: usize,
    pub settle: SettleConfig<T>,
    pub seed: u64,
    pub variant: Variant,
    /// Inverse derivatives below this magnitude are left out of the average.
    pub eps_sing: T,
    pub record_mode: RecordMode,
    /// Random-control changes are uniform on `±scale·m`, `m` the MZI run's
    /// mean |Δw| in the same epoch.
    pub random_scale: T,
}

impl<T: Scalar> Default for ChlConfig<T> {
    fn default() -> Self {
        Self {
            eta: T::lit(0.1),
            epochs: 500,
            dataset_size: 40,
            settle: SettleConfig::default(),
            seed: 0,
            variant: Variant::MziChl,
            eps_sing: T::lit(1e-3),
            record_mode: RecordMode::Summed,
            random_scale: T::lit(2.0),
        }
    }
}

impl<T: Scalar> ChlConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.eta > T::zero()) {
            return fail("eta must be positive");
        }
        if !(self.settle.tol > T::zero()) {
            return fail("settle.tol must be positive");
        }
        if !(self.settle.damping > T::zero() && self.settle.damping <= T::one()) {
            return fail("settle.damping must be in (0, 1]");
        }
        if self.dataset_size == 0 {
            return fail("dataset_size must be positive");
        }
        if !(self.eps_sing >= T::zero()) || !(self.random_scale >= T::zero()) {
            return fail("eps_sing and random_scale must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ChlDataset<T> {
    pub inputs: Vec<Vec4<T>>,
    pub targets: Vec<Vec4<T>>,
    /// Orthogonal map relating each input to its target.
    pub teacher: Vec<Vec4<T>>,
}

impl<T: Scalar> ChlDataset<T> {
    /// Unit-norm non-negative inputs `x`. Targets are `0.5 + 0.4·Qx` for one
    /// random orthogonal `Q`, so every target is a rescaled unit vector with
    /// components in `[0.1, 0.9]`.
    pub fn generate<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Self {
        let q = random_orthogonal(rng);
        let mut inputs = Vec::with_capacity(size);
        let mut targets = Vec::with_capacity(size);
        for _ in 0..size {
            let x = loop {
                let g: [f64; LAYER_SIZE] = std::array::from_fn(|_| rng.sample::<f64, _>(StandardNormal).abs());
                let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if n > 1e-12 {
                    break g.map(|v| v / n);
                }
            };
            let qx: [f64; LAYER_SIZE] = std::array::from_fn(|i| (0..LAYER_SIZE).map(|j| q[(i, j)] * x[j]).sum());
            inputs.push(x.map(T::lit));
            targets.push(qx.map(|v| T::lit(0.5 + 0.4 * v)));
        }
        let teacher = (0..LAYER_SIZE)
            .map(|i| std::array::from_fn(|j| T::lit(q[(i, j)])))
            .collect();
        Self {
            inputs,
            targets,
            teacher,
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Activities<T> {
    pub hidden: Vec4<T>,
    pub output: Vec4<T>,
}

impl<T: Scalar> Activities<T> {
    pub fn resting() -> Self {
        Self {
            hidden: [T::lit(0.5); LAYER_SIZE],
            output: [T::lit(0.5); LAYER_SIZE],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settled<T> {
    pub activities: Activities<T>,
    pub iterations: usize,
    pub converged: bool,
}

fn matvec<T: Scalar>(w: &Array2<T>, x: &Vec4<T>) -> Vec4<T> {
    std::array::from_fn(|i| (0..LAYER_SIZE).fold(T::zero(), |a, j| a + w[[i, j]] * x[j]))
}

fn matvec_t<T: Scalar>(w: &Array2<T>, x: &Vec4<T>) -> Vec4<T> {
    std::array::from_fn(|j| (0..LAYER_SIZE).fold(T::zero(), |a, i| a + w[[i, j]] * x[i]))
}

/// Damped fixed-point settling from `start`. With `clamp` the output layer
/// is held at the target.
pub fn settle_from<T: Scalar>(
    w1: &Array2<T>,
    w2: &Array2<T>,
    x: &Vec4<T>,
    clamp: Option<&Vec4<T>>,
    start: Activities<T>,
    config: &SettleConfig<T>,
) -> Settled<T> {
    let d = config.damping;
    let mix = |old: T, new: T| old + d * (new - old);
    let drive = matvec(w1, x);
    let mut act = start;
    if let Some(y) = clamp {
        act.output = *y;
    }
    for it in 1..=config.max_iters {
        let fb = matvec_t(w2, &act.output);
        let hidden: Vec4<T> =
            std::array::from_fn(|i| mix(act.hidden[i], sigmoid_rate(drive[i] + config.feedback_gain * fb[i])));
        let output: Vec4<T> = match clamp {
            Some(y) => *y,
            None => {
                let z = matvec(w2, &hidden);
                std::array::from_fn(|i| mix(act.output[i], sigmoid_rate(z[i])))
            }
        };
        let change = (0..LAYER_SIZE).fold(T::zero(), |m, i| {
            m.max((hidden[i] - act.hidden[i]).abs())
                .max((output[i] - act.output[i]).abs())
        });
        act = Activities { hidden, output };
        if change < config.tol {
            return Settled {
                activities: act,
                iterations: it,
                converged: true,
            };
        }
    }
    Settled {
        activities: act,
        iterations: config.max_iters,
        converged: false,
    }
}

/// Settling from the resting state (all activities 0.5).
pub fn settle<T: Scalar>(
    w1: &Array2<T>,
    w2: &Array2<T>,
    x: &Vec4<T>,
    clamp: Option<&Vec4<T>>,
    config: &SettleConfig<T>,
) -> Settled<T> {
    settle_from(w1, w2, x, clamp, Activities::resting(), config)
}

/// `η(a_i⁺a_j⁺ − a_i⁻a_j⁻)`.
pub fn chl_delta_w<T: Scalar>(a_plus: (T, T), a_minus: (T, T), eta: T) -> T {
    eta * (a_plus.0 * a_plus.1 - a_minus.0 * a_minus.1)
}

/// Derivatives of the four unit weights with respect to `θ`, row-major.
pub fn dw_dtheta<T: Scalar>(theta: T) -> [T; 4] {
    let h = theta / T::lit(2.0);
    let half = T::lit(0.5);
    [half * h.cos(), -half * h.sin(), -half * h.sin(), -half * h.cos()]
}

/// Averages `Δw_ij / (dw_ij/dθ)` over the entries whose derivative is at
/// least `eps_sing` in magnitude. Returns `None` when every entry is
/// singular.
pub fn delta_theta<T: Scalar>(delta_w: &[[T; 2]; 2], theta: T, eps_sing: T) -> Option<T> {
    let d = dw_dtheta(theta);
    let dw = [delta_w[0][0], delta_w[0][1], delta_w[1][0], delta_w[1][1]];
    let (sum, count) = d
        .iter()
        .zip(dw)
        .filter(|(g, _)| g.abs() >= eps_sing)
        .fold((T::zero(), 0usize), |(s, c), (&g, w)| (s + w / g, c + 1));
    (count > 0).then(|| sum / T::lit(count as f64))
}

/// Amplitudes seen by one unit's four PDs in one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PortAmplitudes<T> {
    pub a_in: [T; 2],
    pub a_out: [T; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PhaseLocalRecord<T> {
    pub plus: PortAmplitudes<T>,
    pub minus: PortAmplitudes<T>,
}

impl<T: Scalar> PhaseLocalRecord<T> {
    /// Local 2×2 change, `Δw[i][j]` pairing output port `i` with input
    /// port `j`.
    pub fn delta_w(&self, eta: T) -> [[T; 2]; 2] {
        let (p, m) = (&self.plus, &self.minus);
        std::array::from_fn(|i| {
            std::array::from_fn(|j| chl_delta_w((p.a_out[i], p.a_in[j]), (m.a_out[i], m.a_in[j]), eta))
        })
    }

    /// This unit's phase change; zero when every derivative is singular.
    pub fn delta_theta(&self, theta: T, eta: T, eps_sing: T) -> (T, bool) {
        match delta_theta(&self.delta_w(eta), theta, eps_sing) {
            Some(d) => (d, false),
            None => (T::zero(), true),
        }
    }
}

/// Lights a mesh with `pre` from the left and `post` from the right and
/// converts each unit's monitor readings to amplitudes.
pub fn record_amplitudes<T: Scalar>(
    mesh: &mut Mesh<T>,
    pre: &Vec4<T>,
    post: &Vec4<T>,
    mode: RecordMode,
) -> Result<Vec<PortAmplitudes<T>>> {
    let r = mesh.tap().ratio;
    let amp = |p: T| (p / r).max(T::zero()).sqrt();
    let fwd = OpticalField::from_real(pre);
    let bwd = OpticalField::from_real(post);
    match mode {
        RecordMode::Summed => {
            mesh.propagate_bidirectional(&fwd, &bwd)?;
            Ok(mesh
                .units()
                .iter()
                .map(|u| PortAmplitudes {
                    a_in: u.monitor_in.map(amp),
                    a_out: u.monitor_out.map(amp),
                })
                .collect())
        }
        RecordMode::Separate => {
            let zero = OpticalField::zeros(mesh.n());
            mesh.propagate_bidirectional(&fwd, &zero)?;
            let a_in: Vec<[T; 2]> = mesh.units().iter().map(|u| u.monitor_in.map(amp)).collect();
            mesh.propagate_bidirectional(&zero, &bwd)?;
            Ok(mesh
                .units()
                .iter()
                .zip(a_in)
                .map(|(u, a_in)| PortAmplitudes {
                    a_in,
                    a_out: u.monitor_out.map(amp),
                })
                .collect())
        }
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R) -> nalgebra::Matrix4<f64> {
    let g = nalgebra::Matrix4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..LAYER_SIZE {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Two-layer network with MZI-mesh synapses.
#[derive(Debug, Clone)]
pub struct ChlNetwork<T> {
    /// Input → hidden.
    pub mesh1: Mesh<T>,
    /// Hidden → output; its transpose carries the feedback.
    pub mesh2: Mesh<T>,
    pub activities_minus: Option<Activities<T>>,
    pub activities_plus: Option<Activities<T>>,
}

impl<T: Scalar> ChlNetwork<T> {
    /// Both meshes with independent uniform random `θ`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Result<Self> {
        let config = MeshConfig::default();
        let mut mesh1 = Mesh::build_rectangular(LAYER_SIZE, FieldMode::RealAmplitude, &config)?;
        let mut mesh2 = Mesh::build_rectangular(LAYER_SIZE, FieldMode::RealAmplitude, &config)?;
        for mesh in [&mut mesh1, &mut mesh2] {
            let thetas: Vec<T> = (0..mesh.unit_count())
                .map(|_| rng.random_range(T::zero()..T::two_pi()))
                .collect();
            mesh.set_thetas(&thetas)?;
        }
        Ok(Self {
            mesh1,
            mesh2,
            activities_minus: None,
            activities_plus: None,
        })
    }

    pub fn matrices(&self) -> (Array2<T>, Array2<T>) {
        (self.mesh1.real_matrix(), self.mesh2.real_matrix())
    }

    /// Largest `‖WWᵀ − I‖∞` of the two meshes.
    pub fn orthogonality_error(&self) -> T {
        let (a, b) = self.matrices();
        orthogonality_error(&a).max(orthogonality_error(&b))
    }
}

pub fn orthogonality_error<T: Scalar>(w: &Array2<T>) -> T {
    let p = w.dot(&w.t());
    p.indexed_iter().fold(T::zero(), |m, ((i, j), &v)| {
        let id = if i == j { T::one() } else { T::zero() };
        m.max((v - id).abs())
    })
}

/// Unconstrained weights used by the baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DenseNetwork<T> {
    pub w1: Array2<T>,
    pub w2: Array2<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpochStats {
    /// Free-phase RMSE over the dataset after the epoch.
    pub rmse: f64,
    /// Mean |Δw| over all applied weight changes.
    pub mean_abs_dw: f64,
    pub skipped: usize,
    pub singular: usize,
}

/// Free-phase RMSE of a weight pair over the dataset.
pub fn dataset_rmse<T: Scalar>(
    w1: &Array2<T>,
    w2: &Array2<T>,
    data: &ChlDataset<T>,
    config: &SettleConfig<T>,
) -> T {
    let mut sum = T::zero();
    for (x, y) in data.inputs.iter().zip(&data.targets) {
        let s = settle(w1, w2, x, None, config);
        for i in 0..LAYER_SIZE {
            sum = sum + (s.activities.output[i] - y[i]).powi(2);
        }
    }
    (sum / T::lit((data.len() * LAYER_SIZE) as f64)).sqrt()
}

fn settle_pair<T: Scalar>(
    w1: &Array2<T>,
    w2: &Array2<T>,
    x: &Vec4<T>,
    y: &Vec4<T>,
    config: &SettleConfig<T>,
) -> Option<(Activities<T>, Activities<T>)> {
    let minus = settle(w1, w2, x, None, config);
    let plus = settle_from(w1, w2, x, Some(y), minus.activities, config);
    (minus.converged && plus.converged).then_some((minus.activities, plus.activities))
}

/// Per-unit records of one sample for both meshes.
pub fn sample_records<T: Scalar>(
    network: &mut ChlNetwork<T>,
    x: &Vec4<T>,
    minus: &Activities<T>,
    plus: &Activities<T>,
    mode: RecordMode,
) -> Result<(Vec<PhaseLocalRecord<T>>, Vec<PhaseLocalRecord<T>>)> {
    let pair = |p: Vec<PortAmplitudes<T>>, m: Vec<PortAmplitudes<T>>| {
        p.into_iter()
            .zip(m)
            .map(|(plus, minus)| PhaseLocalRecord { plus, minus })
            .collect::<Vec<_>>()
    };
    let m1 = record_amplitudes(&mut network.mesh1, x, &minus.hidden, mode)?;
    let m2 = record_amplitudes(&mut network.mesh2, &minus.hidden, &minus.output, mode)?;
    let p1 = record_amplitudes(&mut network.mesh1, x, &plus.hidden, mode)?;
    let p2 = record_amplitudes(&mut network.mesh2, &plus.hidden, &plus.output, mode)?;
    Ok((pair(p1, m1), pair(p2, m2)))
}

/// Applies every unit's local phase change at once. Returns
/// `(sum |Δw|, weight count, singular units)`.
pub fn apply_local_updates<T: Scalar>(
    mesh: &mut Mesh<T>,
    records: &[PhaseLocalRecord<T>],
    eta: T,
    eps_sing: T,
) -> Result<(T, usize, usize)> {
    let mut thetas = mesh.thetas();
    let mut abs = T::zero();
    let mut singular = 0;
    for (theta, rec) in thetas.iter_mut().zip(records) {
        abs = rec.delta_w(eta).iter().flatten().fold(abs, |a, &w| a + w.abs());
        let (d, sing) = rec.delta_theta(*theta, eta, eps_sing);
        singular += sing as usize;
        *theta = *theta + d;
    }
    mesh.set_thetas(&thetas)?;
    Ok((abs, 4 * records.len(), singular))
}

/// One online epoch of the MZI rule. Records of every sample are passed to
/// `log` before they are applied.
pub fn chl_epoch_logged<T: Scalar>(
    network: &mut ChlNetwork<T>,
    data: &ChlDataset<T>,
    config: &ChlConfig<T>,
    mut log: impl FnMut(usize, &[PhaseLocalRecord<T>], &[PhaseLocalRecord<T>]),
) -> Result<EpochStats> {
    let mut stats = EpochStats::default();
    let (mut abs, mut count) = (T::zero(), 0usize);
    for (k, (x, y)) in data.inputs.iter().zip(&data.targets).enumerate() {
        let (w1, w2) = network.matrices();
        let Some((minus, plus)) = settle_pair(&w1, &w2, x, y, &config.settle) else {
            stats.skipped += 1;
            continue;
        };
        network.activities_minus = Some(minus);
        network.activities_plus = Some(plus);
        let (r1, r2) = sample_records(network, x, &minus, &plus, config.record_mode)?;
        log(k, &r1, &r2);
        for (mesh, recs) in [(&mut network.mesh1, &r1), (&mut network.mesh2, &r2)] {
            let (a, c, s) = apply_local_updates(mesh, recs, config.eta, config.eps_sing)?;
            abs = abs + a;
            count += c;
            stats.singular += s;
        }
    }
    let (w1, w2) = network.matrices();
    stats.rmse = dataset_rmse(&w1, &w2, data, &config.settle).as_f64();
    stats.mean_abs_dw = if count > 0 { (abs / T::lit(count as f64)).as_f64() } else { 0.0 };
    Ok(stats)
}

pub fn chl_epoch<T: Scalar>(
    network: &mut ChlNetwork<T>,
    data: &ChlDataset<T>,
    config: &ChlConfig<T>,
) -> Result<EpochStats> {
    chl_epoch_logged(network, data, config, |_, _, _| {})
}

/// One online epoch of the rule applied directly to dense matrices.
pub fn ideal_epoch<T: Scalar>(net: &mut DenseNetwork<T>, data: &ChlDataset<T>, config: &ChlConfig<T>) -> EpochStats {
    let mut stats = EpochStats::default();
    let (mut abs, mut count) = (T::zero(), 0usize);
    for (x, y) in data.inputs.iter().zip(&data.targets) {
        let Some((m, p)) = settle_pair(&net.w1, &net.w2, x, y, &config.settle) else {
            stats.skipped += 1;
            continue;
        };
        for (w, post_p, pre_p, post_m, pre_m) in [
            (&mut net.w1, &p.hidden, x, &m.hidden, x),
            (&mut net.w2, &p.output, &p.hidden, &m.output, &m.hidden),
        ] {
            for i in 0..LAYER_SIZE {
                for j in 0..LAYER_SIZE {
                    let d = chl_delta_w((post_p[i], pre_p[j]), (post_m[i], pre_m[j]), config.eta);
                    w[[i, j]] = w[[i, j]] + d;
                    abs = abs + d.abs();
                    count += 1;
                }
            }
        }
    }
    stats.rmse = dataset_rmse(&net.w1, &net.w2, data, &config.settle).as_f64();
    stats.mean_abs_dw = (abs / T::lit(count.max(1) as f64)).as_f64();
    stats
}

/// One epoch of uniform random changes on `±half_width`, one draw per
/// weight per sample.
pub fn random_epoch<T: Scalar, R: Rng + ?Sized>(
    net: &mut DenseNetwork<T>,
    data: &ChlDataset<T>,
    config: &ChlConfig<T>,
    half_width: T,
    rng: &mut R,
) -> EpochStats {
    let mut stats = EpochStats::default();
    let mut abs = T::zero();
    if half_width > T::zero() {
        for _ in 0..data.len() {
            for w in [&mut net.w1, &mut net.w2] {
                for v in w.iter_mut() {
                    let d = rng.random_range(-half_width..=half_width);
                    *v = *v + d;
                    abs = abs + d.abs();
                }
            }
        }
    }
    let count = data.len() * 2 * LAYER_SIZE * LAYER_SIZE;
    stats.rmse = dataset_rmse(&net.w1, &net.w2, data, &config.settle).as_f64();
    stats.mean_abs_dw = (abs / T::lit(count as f64)).as_f64();
    stats
}

/// Everything the three variants start from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ChlSetup<T> {
    pub dataset: ChlDataset<T>,
    pub thetas1: Vec<T>,
    pub thetas2: Vec<T>,
    pub w1: Array2<T>,
    pub w2: Array2<T>,
}

impl<T: Scalar> ChlSetup<T> {
    /// Dataset and meshes from the seed (stream 0).
    pub fn from_seed(config: &ChlConfig<T>) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let dataset = ChlDataset::generate(config.dataset_size, &mut rng);
        let net = ChlNetwork::random(&mut rng)?;
        let (w1, w2) = net.matrices();
        Ok(Self {
            dataset,
            thetas1: net.mesh1.thetas(),
            thetas2: net.mesh2.thetas(),
            w1,
            w2,
        })
    }

    pub fn network(&self) -> Result<ChlNetwork<T>> {
        let config = MeshConfig::default();
        let mut mesh1 = Mesh::build_rectangular(LAYER_SIZE, FieldMode::RealAmplitude, &config)?;
        let mut mesh2 = Mesh::build_rectangular(LAYER_SIZE, FieldMode::RealAmplitude, &config)?;
        mesh1.set_thetas(&self.thetas1)?;
        mesh2.set_thetas(&self.thetas2)?;
        Ok(ChlNetwork {
            mesh1,
            mesh2,
            activities_minus: None,
            activities_plus: None,
        })
    }

    pub fn dense(&self) -> DenseNetwork<T> {
        DenseNetwork {
            w1: self.w1.clone(),
            w2: self.w2.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantTrace {
    pub variant: Variant,
    /// Free-phase RMSE before training.
    pub initial_rmse: f64,
    /// RMSE after each epoch.
    pub rmse: Vec<f64>,
    pub mean_abs_dw: Vec<f64>,
    /// Samples skipped because settling did not converge.
    pub skipped: usize,
    /// Units whose derivatives were all below the singularity guard.
    pub singular: usize,
}

impl VariantTrace {
    /// Relative RMSE change over the run, percent.
    pub fn change_pct(&self) -> f64 {
        let last = self.rmse.last().copied().unwrap_or(self.initial_rmse);
        100.0 * (last - self.initial_rmse) / self.initial_rmse
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChlReport {
    pub seed: u64,
    pub mzi: VariantTrace,
    pub ideal: VariantTrace,
    pub random: VariantTrace,
    /// Largest mesh orthogonality error seen after any MZI epoch.
    pub max_orthogonality_error: f64,
}

impl ChlReport {
    /// Ideal < MZI < Random at the last epoch.
    pub fn ordering_holds(&self) -> bool {
        let last = |t: &VariantTrace| t.rmse.last().copied().unwrap_or(t.initial_rmse);
        last(&self.ideal) < last(&self.mzi) && last(&self.mzi) < last(&self.random)
    }
}

/// Trains the MZI network; `after_epoch` sees the network after each epoch.
pub fn train_mzi<T: Scalar>(
    setup: &ChlSetup<T>,
    config: &ChlConfig<T>,
    mut after_epoch: impl FnMut(usize, &ChlNetwork<T>),
) -> Result<(VariantTrace, ChlNetwork<T>)> {
    let mut net = setup.network()?;
    let (w1, w2) = net.matrices();
    let mut trace = VariantTrace {
        variant: Variant::MziChl,
        initial_rmse: dataset_rmse(&w1, &w2, &setup.dataset, &config.settle).as_f64(),
        rmse: Vec::with_capacity(config.epochs),
        mean_abs_dw: Vec::with_capacity(config.epochs),
        skipped: 0,
        singular: 0,
    };
    for epoch in 1..=config.epochs {
        let s = chl_epoch(&mut net, &setup.dataset, config)?;
        push(&mut trace, s);
        after_epoch(epoch, &net);
    }
    Ok((trace, net))
}

pub fn train_ideal<T: Scalar>(setup: &ChlSetup<T>, config: &ChlConfig<T>) -> VariantTrace {
    let mut net = setup.dense();
    let mut trace = dense_trace(Variant::IdealChl, &net, setup, config);
    for _ in 0..config.epochs {
        let s = ideal_epoch(&mut net, &setup.dataset, config);
        push(&mut trace, s);
    }
    trace
}

/// Random changes sized by the MZI run's per-epoch mean |Δw|.
pub fn train_random<T: Scalar>(setup: &ChlSetup<T>, config: &ChlConfig<T>, mzi_mean_abs_dw: &[f64]) -> VariantTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut net = setup.dense();
    let mut trace = dense_trace(Variant::RandomControl, &net, setup, config);
    for &m in mzi_mean_abs_dw.iter().take(config.epochs) {
        let s = random_epoch(&mut net, &setup.dataset, config, config.random_scale * T::lit(m), &mut rng);
        push(&mut trace, s);
    }
    trace
}

fn dense_trace<T: Scalar>(variant: Variant, net: &DenseNetwork<T>, setup: &ChlSetup<T>, config: &ChlConfig<T>) -> VariantTrace {
    VariantTrace {
        variant,
        initial_rmse: dataset_rmse(&net.w1, &net.w2, &setup.dataset, &config.settle).as_f64(),
        rmse: Vec::with_capacity(config.epochs),
        mean_abs_dw: Vec::with_capacity(config.epochs),
        skipped: 0,
        singular: 0,
    }
}

fn push(trace: &mut VariantTrace, s: EpochStats) {
    trace.rmse.push(s.rmse);
    trace.mean_abs_dw.push(s.mean_abs_dw);
    trace.skipped += s.skipped;
    trace.singular += s.singular;
}

/// All three variants from one seed.
pub fn run_chl<T: Scalar>(config: &ChlConfig<T>) -> Result<(ChlReport, ChlSetup<T>)> {
    config.validate()?;
    let setup = ChlSetup::from_seed(config)?;
    let mut max_orth = 0.0f64;
    let (mzi, _) = train_mzi(&setup, config, |_, net| {
        max_orth = max_orth.max(net.orthogonality_error().as_f64());
    })?;
    let ideal = train_ideal(&setup, config);
    let random = train_random(&setup, config, &mzi.mean_abs_dw);
    Ok((
        ChlReport {
            seed: config.seed,
            mzi,
            ideal,
            random,
            max_orthogonality_error: max_orth,
        },
        setup,
    ))
}

/// Outputs of the free phase for every dataset input.
pub fn predictions<T: Scalar>(w1: &Array2<T>, w2: &Array2<T>, data: &ChlDataset<T>, config: &SettleConfig<T>) -> Vec<Array1<T>> {
    data.inputs
        .iter()
        .map(|x| Array1::from(settle(w1, w2, x, None, config).activities.output.to_vec()))
        .collect()
}
