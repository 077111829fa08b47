//! Random backpropagation on a photonic MZI-mesh classifier.
//!
//! The setup mirrors an on-chip experiment: a three-stage MZI tree generates
//! each input vector from a calibrated look-up table, a rectangular mesh
//! acts as the single synaptic layer, and two output photodetectors are read
//! through a resistive transimpedance stage. The output error is projected
//! onto the heater voltages through a random matrix `B`; whenever a sample's
//! error is larger than the previous sample's, `B` is redrawn. Training runs
//! a coarse search (large `μ`) until the accuracy limit is met and then
//! continues with a fine `μ`.
//!
//! Only input-generator and output PDs are ever read; interior unit monitors
//! of the classifier mesh are left untouched.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::imperfections::{apply_crosstalk, HardwareModel, ImperfectionConfig};
use crate::iris::{confusion, Confusion, LabeledSample, N_CLASSES, N_FEATURES};
use crate::mesh::{FieldMode, Mesh, MeshConfig, MziUnit, OpticalField, PhaseActuator};
use crate::{Error, Result, Scalar};

/// Which quantity the random projection updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateTarget {
    /// Heater voltages, mapped to phase through the actuator law.
    Voltage,
    /// Phases directly (ablation).
    Phase,
}

/// Which shifters of the classifier mesh are trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainedShifters {
    Theta,
    Phi,
    Both,
}

impl TrainedShifters {
    /// Indices into the interleaved `[θ₀, φ₀, ...]` vector.
    pub fn indices(self, units: usize) -> Vec<usize> {
        match self {
            TrainedShifters::Theta => (0..units).map(|u| 2 * u).collect(),
            TrainedShifters::Phi => (0..units).map(|u| 2 * u + 1).collect(),
            TrainedShifters::Both => (0..2 * units).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct CalibrationConfig<T> {
    /// Largest accepted |P_i − x_i²| per generator output.
    pub tol: T,
    pub max_sweeps: usize,
}

impl<T: Scalar> Default for CalibrationConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-6),
            max_sweeps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default)]
pub struct RbpConfig<T> {
    pub mu_coarse: T,
    pub mu_fine: T,
    /// Correct labels (out of `n_samples`) that end the coarse search.
    pub accuracy_limit: usize,
    pub n_samples: usize,
    /// Supply voltage of the readout stage, V.
    pub v_dd: T,
    /// Load resistors of the output PDs, kΩ.
    pub resistors: Vec<T>,
    /// PD responsivity, mA/mW.
    pub responsivity: T,
    pub epochs_max: usize,
    pub seed: u64,
    pub mesh_ports: usize,
    /// Mesh ports read as class scores.
    pub output_ports: Vec<usize>,
    pub mode: FieldMode,
    pub mesh: MeshConfig<T>,
    pub update_target: UpdateTarget,
    pub trained: TrainedShifters,
    pub calibration: CalibrationConfig<T>,
    /// Store trained phases every this many epochs (0 disables).
    pub checkpoint_every: usize,
    /// Leave the mesh at the best evaluated configuration when done.
    pub restore_best: bool,
}

impl<T: Scalar> Default for RbpConfig<T> {
    fn default() -> Self {
        Self {
            mu_coarse: T::lit(0.05),
            mu_fine: T::lit(0.0025),
            accuracy_limit: 85,
            n_samples: 100,
            v_dd: T::lit(3.3),
            resistors: vec![T::lit(100.0); N_CLASSES],
            responsivity: T::one(),
            epochs_max: 200,
            seed: 0,
            mesh_ports: 6,
            output_ports: vec![0, 1],
            mode: FieldMode::RealAmplitude,
            mesh: MeshConfig::default(),
            update_target: UpdateTarget::Voltage,
            trained: TrainedShifters::Theta,
            calibration: CalibrationConfig::default(),
            checkpoint_every: 10,
            restore_best: true,
        }
    }
}

impl<T: Scalar> RbpConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if !(T::zero() < self.mu_fine && self.mu_fine < self.mu_coarse) {
            return fail("need 0 < mu_fine < mu_coarse");
        }
        if !(0 < self.accuracy_limit && self.accuracy_limit <= self.n_samples) {
            return fail("need 0 < accuracy_limit <= n_samples");
        }
        self.validate_hardware()
    }

    /// Checks that do not involve the search schedule.
    fn validate_hardware(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.mesh_ports < N_FEATURES {
            return fail(format!("mesh needs at least {N_FEATURES} ports"));
        }
        if self.output_ports.len() != N_CLASSES || self.resistors.len() != N_CLASSES {
            return fail(format!("need exactly {N_CLASSES} output ports and resistors"));
        }
        if self.output_ports.iter().any(|&p| p >= self.mesh_ports) || self.output_ports[0] == self.output_ports[1] {
            return fail("output ports must be distinct mesh ports".into());
        }
        if self.resistors.iter().any(|&r| !(r > T::zero())) || !(self.responsivity > T::zero()) {
            return fail("resistors and responsivity must be positive".into());
        }
        if !(self.mesh.tap.ratio > T::zero()) {
            return fail("tap ratio must be positive".into());
        }
        Ok(())
    }
}

/// Random backward projection, `trained shifters × classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardWeights<T> {
    pub b: Array2<T>,
    pub mu: T,
}

impl<T: Scalar> BackwardWeights<T> {
    /// I.i.d. uniform entries on `[-μ, μ]`.
    pub fn draw<R: Rng + ?Sized>(rows: usize, cols: usize, mu: T, rng: &mut R) -> Self {
        let b = if mu > T::zero() {
            Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-mu..=mu))
        } else {
            Array2::zeros((rows, cols))
        };
        Self { b, mu }
    }

    /// `B·e`.
    pub fn project(&self, error: &[T]) -> Vec<T> {
        self.b
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(error).fold(T::zero(), |a, (&b, &e)| a + b * e))
            .collect()
    }
}

/// Three MZIs in a 1→2→4 tree that turn the laser input into a
/// non-negative 4-vector of amplitudes.
#[derive(Debug, Clone)]
pub struct InputGenerator<T> {
    stages: [MziUnit<T>; 3],
    actuator: PhaseActuator<T>,
    tap_ratio: T,
}

impl<T: Scalar> InputGenerator<T> {
    pub fn new(config: &MeshConfig<T>) -> Self {
        let stage = |layer, top| MziUnit::new(layer, 0, top, config.theta_init, T::zero());
        Self {
            stages: [stage(0, 0), stage(1, 0), stage(1, 2)],
            actuator: config.theta_actuator,
            tap_ratio: config.tap.ratio,
        }
    }

    pub fn stages(&self) -> &[MziUnit<T>; 3] {
        &self.stages
    }

    pub fn thetas(&self) -> [T; 3] {
        self.stages.each_ref().map(|s| s.theta())
    }

    pub fn set_thetas(&mut self, thetas: [T; 3]) {
        for (s, t) in self.stages.iter_mut().zip(thetas) {
            s.set_theta(t);
        }
    }

    pub fn apply_voltages(&mut self, voltages: [T; 3]) {
        let a = self.actuator;
        self.set_thetas(voltages.map(|v| a.phase(v)));
    }

    pub fn voltages(&self) -> [T; 3] {
        self.thetas().map(|t| self.actuator.voltage_for(t))
    }

    /// Injects 1 √mW into the first stage; returns the four output
    /// amplitudes and refreshes the stage monitors.
    pub fn fire(&mut self) -> [T; 4] {
        let r = self.tap_ratio;
        let split = |s: &mut MziUnit<T>, a: T| {
            let [[t00, _], [t10, _]] = crate::mesh::unit_transfer_real(s.theta());
            let out = [t00 * a, t10 * a];
            s.monitor_in = [r * a * a, T::zero()];
            s.monitor_out = [r * out[0] * out[0], r * out[1] * out[1]];
            out
        };
        let [top, bottom] = split(&mut self.stages[0], T::one());
        let [x0, x1] = split(&mut self.stages[1], top);
        let [x2, x3] = split(&mut self.stages[2], bottom);
        [x0, x1, x2, x3]
    }

    /// Output powers inferred from the last-stage monitor PDs.
    pub fn monitor_powers(&self) -> [T; 4] {
        let r = self.tap_ratio;
        let [a, b] = self.stages[1].monitor_out;
        let [c, d] = self.stages[2].monitor_out;
        [a / r, b / r, c / r, d / r]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LutEntry<T> {
    pub thetas: [T; 3],
    pub voltages: [T; 3],
    /// Amplitudes measured at the generator PDs after calibration.
    pub achieved: [T; 4],
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct InputLut<T> {
    pub entries: Vec<LutEntry<T>>,
}

impl<T: Scalar> InputLut<T> {
    pub fn max_residual(&self) -> T {
        self.entries
            .iter()
            .fold(T::zero(), |m, e| m.max(e.residual))
    }
}

/// Finds generator settings for every target vector by coordinate descent
/// over the three stage phases, each coordinate minimized by golden-section
/// search on the monitored power error.
pub fn calibrate_input_lut<T: Scalar>(
    generator: &mut InputGenerator<T>,
    targets: &[[T; 4]],
    config: &CalibrationConfig<T>,
) -> Result<InputLut<T>> {
    let mut entries = Vec::with_capacity(targets.len());
    let power_tol = T::lit(1e-9).max(T::lit(64.0) * T::epsilon());
    let bracket_tol = T::lit(1e-13).max(T::lit(8.0) * T::epsilon());
    for (k, x) in targets.iter().enumerate() {
        let power = x.iter().fold(T::zero(), |a, &v| a + v * v);
        if x.iter().any(|&v| v < T::zero()) || (power - T::one()).abs() > power_tol {
            return Err(Error::Config(format!(
                "calibration target {k} must be non-negative with unit power"
            )));
        }
        let want = x.map(|v| v * v);
        let residual = |g: &mut InputGenerator<T>| {
            g.fire();
            let p = g.monitor_powers();
            (0..4).fold(T::zero(), |m, i| m.max((p[i] - want[i]).abs()))
        };
        let objective = |g: &mut InputGenerator<T>| {
            g.fire();
            let p = g.monitor_powers();
            (0..4).fold(T::zero(), |s, i| s + (p[i] - want[i]).powi(2))
        };

        let mut res = residual(generator);
        let mut sweeps = 0;
        while res > config.tol {
            if sweeps == config.max_sweeps {
                return Err(Error::Calibration {
                    sample: k,
                    residual: res.as_f64(),
                });
            }
            for stage in 0..3 {
                let best = golden_section(T::zero(), T::PI(), bracket_tol, |theta| {
                    let mut th = generator.thetas();
                    th[stage] = theta;
                    generator.set_thetas(th);
                    objective(generator)
                });
                let mut th = generator.thetas();
                th[stage] = best;
                generator.set_thetas(th);
            }
            res = residual(generator);
            sweeps += 1;
        }
        let achieved = generator.monitor_powers().map(|p| p.max(T::zero()).sqrt());
        entries.push(LutEntry {
            thetas: generator.thetas(),
            voltages: generator.voltages(),
            achieved,
            residual: res,
        });
    }
    Ok(InputLut { entries })
}

fn golden_section<T: Scalar>(mut a: T, mut b: T, tol: T, mut f: impl FnMut(T) -> T) -> T {
    let g = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let mid = (a + b) / T::lit(2.0);
    // Endpoints matter for bar/cross targets.
    [T::zero(), T::PI(), mid]
        .into_iter()
        .map(|t| (f(t), t))
        .fold((T::infinity(), mid), |best, cand| if cand.0 < best.0 { cand } else { best })
        .1
}

/// Photocurrents and normalized scores of the output PDs.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout<T> {
    /// mA.
    pub i_out: Vec<T>,
    pub y_hat: Vec<T>,
}

/// Ideal readout of output-PD powers (mW).
pub fn readout<T: Scalar>(powers: &[T], config: &RbpConfig<T>) -> Result<Readout<T>> {
    readout_with(powers, config, |p| p, |v| v)
}

/// Readout through a PD reading hook and an ADC hook: the PD current
/// develops `v_out = v_dd − R·i` across the load, the ADC samples `v_out`
/// and the photocurrent is recovered as `(v_dd − v_out)/R`.
pub fn readout_with<T: Scalar>(
    powers: &[T],
    config: &RbpConfig<T>,
    mut read_pd: impl FnMut(T) -> T,
    adc: impl Fn(T) -> T,
) -> Result<Readout<T>> {
    if powers.len() != config.resistors.len() {
        return Err(Error::DimensionMismatch {
            expected: config.resistors.len(),
            got: powers.len(),
        });
    }
    let i_out: Vec<T> = powers
        .iter()
        .zip(&config.resistors)
        .map(|(&p, &r)| {
            let i_pd = config.responsivity * read_pd(p);
            let v_out = adc(config.v_dd - r * i_pd);
            (config.v_dd - v_out) / r
        })
        .collect();
    let total = i_out.iter().fold(T::zero(), |a, &b| a + b);
    if !(total > T::zero()) {
        return Err(Error::DegenerateReadout);
    }
    let y_hat = i_out.iter().map(|&i| i / total).collect();
    Ok(Readout { i_out, y_hat })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome<T> {
    /// `|ŷ − y|²`.
    pub error: T,
    pub redrawn: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: usize,
    pub predicted: Vec<usize>,
    pub confusion: Confusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCheckpoint {
    pub epoch: usize,
    pub phases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbpReport {
    pub seed: u64,
    pub initial_accuracy: usize,
    /// Correct labels after each epoch.
    pub epoch_accuracy: Vec<usize>,
    /// Best accuracy seen up to and including each epoch.
    pub best_accuracy: Vec<usize>,
    /// `μ` used during each epoch.
    pub mu_schedule: Vec<f64>,
    /// First epoch whose evaluation met the accuracy limit.
    pub switch_epoch: Option<usize>,
    pub coarse_stuck: bool,
    /// Best accuracy over the trained epochs (the untrained baseline is
    /// not counted).
    pub final_accuracy: usize,
    pub best_epoch: Option<usize>,
    /// Confusion of the evaluation that produced `final_accuracy`.
    pub confusion: Confusion,
    pub redraws: usize,
    pub checkpoints: Vec<PhaseCheckpoint>,
    pub calibration_max_residual: f64,
}

/// Training state of one run.
pub struct RbpTrainer<'a, T: Scalar> {
    config: RbpConfig<T>,
    samples: &'a [LabeledSample<T>],
    generator: InputGenerator<T>,
    lut: InputLut<T>,
    mesh: Mesh<T>,
    /// Full interleaved heater voltages (or phases in phase mode).
    controls: Vec<T>,
    trained: Vec<usize>,
    coupling: Option<Vec<Vec<T>>>,
    backward: BackwardWeights<T>,
    prev_error: T,
    mu: T,
    redraws: usize,
    rng: ChaCha8Rng,
    hw: HardwareModel<T, ChaCha8Rng>,
}

impl<'a, T: Scalar> RbpTrainer<'a, T> {
    pub fn new(
        config: RbpConfig<T>,
        samples: &'a [LabeledSample<T>],
        imperfections: &ImperfectionConfig<T>,
    ) -> Result<Self> {
        config.validate_hardware()?;
        if samples.len() < config.n_samples {
            return Err(Error::Config(format!(
                "need {} samples, got {}",
                config.n_samples,
                samples.len()
            )));
        }
        let samples = &samples[..config.n_samples];
        let mut generator = InputGenerator::new(&config.mesh);
        let targets: Vec<[T; 4]> = samples.iter().map(|s| s.x).collect();
        let lut = calibrate_input_lut(&mut generator, &targets, &config.calibration)?;

        let mesh = Mesh::build_rectangular(config.mesh_ports, config.mode, &config.mesh)?;
        let controls = match config.update_target {
            UpdateTarget::Voltage => mesh.voltages(),
            UpdateTarget::Phase => mesh.phases(),
        };
        let trained = config.trained.indices(mesh.unit_count());
        let coupling = if imperfections.crosstalk_enabled {
            Some(imperfections.coupling(mesh.phase_count())?)
        } else {
            None
        };
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut hw_rng = ChaCha8Rng::seed_from_u64(config.seed);
        hw_rng.set_stream(1);
        let hw = HardwareModel::new(imperfections.clone(), hw_rng)?;
        let mu = config.mu_coarse;
        let backward = BackwardWeights::draw(trained.len(), N_CLASSES, mu, &mut rng);
        let mut trainer = Self {
            config,
            samples,
            generator,
            lut,
            mesh,
            controls,
            trained,
            coupling,
            backward,
            prev_error: T::infinity(),
            mu,
            redraws: 0,
            rng,
            hw,
        };
        trainer.drive_mesh()?;
        Ok(trainer)
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn lut(&self) -> &InputLut<T> {
        &self.lut
    }

    pub fn backward(&self) -> &BackwardWeights<T> {
        &self.backward
    }

    pub fn controls(&self) -> &[T] {
        &self.controls
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    /// Changes the step scale; the next redraw uses it.
    pub fn set_mu(&mut self, mu: T) {
        self.mu = mu;
    }

    pub fn redraws(&self) -> usize {
        self.redraws
    }

    /// Pushes the control vector through DAC, crosstalk and actuator law.
    fn drive_mesh(&mut self) -> Result<()> {
        let applied: Vec<T> = match self.config.update_target {
            UpdateTarget::Voltage => self.controls.iter().map(|&v| self.hw.dac(v)).collect(),
            UpdateTarget::Phase => self.controls.clone(),
        };
        let Some(coupling) = &self.coupling else {
            return match self.config.update_target {
                UpdateTarget::Voltage => self.mesh.apply_voltages(&applied),
                UpdateTarget::Phase => self.mesh.set_phases(&applied),
            };
        };
        let raw: Vec<T> = match self.config.update_target {
            UpdateTarget::Voltage => {
                let (ta, pa) = (*self.mesh.theta_actuator(), *self.mesh.phi_actuator());
                applied
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let a = if i % 2 == 0 { ta } else { pa };
                        a.theta_zero + a.alpha * v * v
                    })
                    .collect()
            }
            UpdateTarget::Phase => applied,
        };
        let mixed = apply_crosstalk(&raw, coupling)?;
        self.mesh.set_phases(&mixed)
    }

    /// Replays LUT entry `k` and returns the classifier's output readout.
    fn forward(&mut self, k: usize) -> Result<Readout<T>> {
        let entry = &self.lut.entries[k];
        let volts = entry.voltages.map(|v| self.hw.dac(v));
        self.generator.apply_voltages(volts);
        let x = self.generator.fire();
        // Verification read of the generator PDs; the run keeps going either
        // way, the noise stream just advances as on hardware.
        for p in self.generator.monitor_powers() {
            self.hw.read_power(p);
        }
        let mut input = vec![T::zero(); self.mesh.n()];
        input[..N_FEATURES].copy_from_slice(&x);
        let out = self.mesh.transmit(&OpticalField::from_real(&input))?;
        let tap = self.mesh.tap().ratio;
        let powers: Vec<T> = self
            .config
            .output_ports
            .iter()
            .map(|&p| tap * out.power(p))
            .collect();
        let hw = &mut self.hw;
        let adc_cfg = hw.config().clone();
        let adc = |v: T| {
            if adc_cfg.adc_enabled {
                crate::imperfections::quantize(v, adc_cfg.adc_bits, adc_cfg.adc_range)
                    .expect("validated quantizer")
            } else {
                v
            }
        };
        readout_with(&powers, &self.config, |p| hw.read_power(p), adc)
    }

    /// One sample of the training loop: forward pass, error, redraw if the
    /// error grew, then `controls += B·(ŷ − y)` on the trained shifters.
    pub fn step(&mut self, k: usize) -> Result<StepOutcome<T>> {
        let r = self.forward(k)?;
        let target = &self.samples[k].y;
        let signed: Vec<T> = r.y_hat.iter().zip(target).map(|(&a, &b)| a - b).collect();
        let error = signed.iter().fold(T::zero(), |a, &e| a + e * e);
        let redrawn = error > self.prev_error;
        if redrawn {
            self.backward = BackwardWeights::draw(self.trained.len(), N_CLASSES, self.mu, &mut self.rng);
            self.redraws += 1;
        }
        let delta = self.backward.project(&signed);
        for (&i, d) in self.trained.iter().zip(delta) {
            self.controls[i] = self.controls[i] + d;
        }
        self.drive_mesh()?;
        self.prev_error = error;
        Ok(StepOutcome { error, redrawn })
    }

    /// Inference over all samples; phases are not modified.
    pub fn evaluate(&mut self) -> Result<Evaluation> {
        let mut predicted = Vec::with_capacity(self.samples.len());
        for k in 0..self.samples.len() {
            let r = self.forward(k)?;
            let label = r
                .i_out
                .iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |b, (i, &x)| if x > b.1 { (i, x) } else { b })
                .0;
            predicted.push(label);
        }
        let labels: Vec<usize> = self.samples.iter().map(|s| s.label).collect();
        let accuracy = labels.iter().zip(&predicted).filter(|(l, p)| l == p).count();
        Ok(Evaluation {
            accuracy,
            confusion: confusion(&labels, &predicted),
            predicted,
        })
    }

    pub fn train_epoch(&mut self) -> Result<()> {
        for k in 0..self.samples.len() {
            self.step(k)?;
        }
        Ok(())
    }

    /// The full coarse/fine schedule.
    pub fn run(mut self) -> Result<(RbpReport, Mesh<T>)> {
        self.config.validate()?;
        let initial = self.evaluate()?;
        let mut report = RbpReport {
            seed: self.config.seed,
            initial_accuracy: initial.accuracy,
            epoch_accuracy: Vec::new(),
            best_accuracy: Vec::new(),
            mu_schedule: Vec::new(),
            switch_epoch: None,
            coarse_stuck: false,
            final_accuracy: initial.accuracy,
            best_epoch: None,
            confusion: initial.confusion,
            redraws: 0,
            checkpoints: Vec::new(),
            calibration_max_residual: self.lut.max_residual().as_f64(),
        };
        let mut best_controls = self.controls.clone();
        for epoch in 1..=self.config.epochs_max {
            report.mu_schedule.push(self.mu.as_f64());
            self.train_epoch()?;
            let eval = self.evaluate()?;
            report.epoch_accuracy.push(eval.accuracy);
            if report.best_epoch.is_none() || eval.accuracy > report.final_accuracy {
                report.final_accuracy = eval.accuracy;
                report.best_epoch = Some(epoch);
                report.confusion = eval.confusion;
                best_controls = self.controls.clone();
            }
            report.best_accuracy.push(report.final_accuracy);
            if self.config.checkpoint_every > 0 && epoch % self.config.checkpoint_every == 0 {
                report.checkpoints.push(PhaseCheckpoint {
                    epoch,
                    phases: self.mesh.phases().iter().map(|p| p.as_f64()).collect(),
                });
            }
            if report.switch_epoch.is_none() && eval.accuracy >= self.config.accuracy_limit {
                report.switch_epoch = Some(epoch);
                self.mu = self.config.mu_fine;
            }
        }
        report.coarse_stuck = report.switch_epoch.is_none();
        report.redraws = self.redraws;
        if self.config.restore_best {
            self.controls = best_controls;
            self.drive_mesh()?;
        }
        Ok((report, self.mesh))
    }
}

/// Trains a classifier mesh on `samples` with the coarse/fine schedule.
pub fn run_rbp<T: Scalar>(
    config: &RbpConfig<T>,
    samples: &[LabeledSample<T>],
    imperfections: &ImperfectionConfig<T>,
) -> Result<RbpReport> {
    config.validate()?;
    let trainer = RbpTrainer::new(config.clone(), samples, imperfections)?;
    Ok(trainer.run()?.0)
}
