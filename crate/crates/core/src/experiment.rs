//! Config-driven experiment runs.
//!
//! An [`ExperimentConfig`] names one experiment, a seed and the module
//! settings. [`run_experiment`] dispatches it, writes every artifact into the
//! output directory and returns a [`RunReport`]. Everything written is a
//! function of the config alone, so re-running a config reproduces the
//! artifacts byte for byte.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::chl::{run_chl, ChlConfig, ChlReport};
use crate::imperfections::ImperfectionConfig;
use crate::iris::{bundled_iris, linear_regression_oracle, load_iris, OracleResult};
use crate::neuron::{
    classify_pattern, excitability_threshold, isi_bimodality, run_preset, write_spike_csv, BiasPreset,
    ClassifierConfig, CurrentProfile, Pattern, PresetName, SimConfig, SpikeTrain,
};
use crate::rbp::{RbpConfig, RbpReport, RbpTrainer};
use crate::report::{write_csv, write_json};
use crate::{Error, Result, ResultExt};

pub const SCHEMA_VERSION: u32 = 1;

/// Overrides `output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "PHSNN_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    RbpIris,
    ChlMapping,
    NeuronBehaviors,
}

impl ExperimentKind {
    pub fn id(self) -> &'static str {
        match self {
            ExperimentKind::RbpIris => "rbp-iris",
            ExperimentKind::ChlMapping => "chl-mapping",
            ExperimentKind::NeuronBehaviors => "neuron-behaviors",
        }
    }
}

/// Step-current sweep over the preset library.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuronSweepConfig {
    /// Step amplitude, mA.
    pub drive_ma: f64,
    /// Step onset, model ms.
    pub onset_ms: f64,
    /// Model ms.
    pub duration_ms: f64,
    pub sim: SimConfig<f64>,
    pub classifier: ClassifierConfig<f64>,
    /// Bisection bracket for the excitability threshold, mA.
    pub threshold_range_ma: (f64, f64),
    pub threshold_tol_ma: f64,
}

impl Default for NeuronSweepConfig {
    fn default() -> Self {
        Self {
            drive_ma: 0.1,
            onset_ms: 0.0,
            duration_ms: 1000.0,
            sim: SimConfig::default(),
            classifier: ClassifierConfig::default(),
            threshold_range_ma: (0.0, 0.2),
            threshold_tol_ma: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub experiment: ExperimentKind,
    /// Seeds every random stream of the run; overrides module seeds.
    pub seed: u64,
    #[serde(default)]
    pub rbp: RbpConfig<f64>,
    #[serde(default)]
    pub chl: ChlConfig<f64>,
    #[serde(default)]
    pub neuron: NeuronSweepConfig,
    #[serde(default = "ImperfectionConfig::disabled")]
    pub imperfections: ImperfectionConfig<f64>,
    /// Iris CSV for `rbp-iris`; the bundled copy when absent.
    #[serde(default)]
    pub iris_csv: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, seed: u64) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            experiment,
            seed,
            rbp: RbpConfig::default(),
            chl: ChlConfig::default(),
            neuron: NeuronSweepConfig::default(),
            imperfections: ImperfectionConfig::disabled(),
            iris_csv: None,
            output_dir: default_output_dir(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).context(format!("config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema {}, expected {SCHEMA_VERSION}",
                self.schema
            )));
        }
        self.imperfections.validate()?;
        match self.experiment {
            ExperimentKind::RbpIris => self.rbp_config().validate(),
            ExperimentKind::ChlMapping => self.chl_config().validate(),
            ExperimentKind::NeuronBehaviors => {
                let n = &self.neuron;
                let (lo, hi) = n.threshold_range_ma;
                if !(n.duration_ms > 0.0 && lo < hi && n.threshold_tol_ma > 0.0) {
                    return Err(Error::Config(
                        "neuron sweep needs duration > 0, a non-empty threshold range and tol > 0".into(),
                    ));
                }
                if !(n.sim.dt > 0.0 && n.sim.dt <= 1.0) {
                    return Err(Error::InvalidTimeStep(n.sim.dt));
                }
                Ok(())
            }
        }
        .context(format!("experiment {}", self.experiment.id()))
    }

    pub fn rbp_config(&self) -> RbpConfig<f64> {
        RbpConfig {
            seed: self.seed,
            ..self.rbp.clone()
        }
    }

    pub fn chl_config(&self) -> ChlConfig<f64> {
        ChlConfig {
            seed: self.seed,
            ..self.chl.clone()
        }
    }

    /// `output_dir`, unless the environment override is set.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.output_dir.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbpMetrics {
    #[serde(flatten)]
    pub run: RbpReport,
    /// Least-squares baseline on the same samples.
    pub oracle: OracleResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChlMetrics {
    #[serde(flatten)]
    pub run: ChlReport,
    pub change_pct_mzi: f64,
    pub change_pct_ideal: f64,
    pub change_pct_random: f64,
    pub ordering_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronRow {
    pub preset: PresetName,
    pub pattern: Pattern,
    pub matches: bool,
    pub spikes: usize,
    /// μs.
    pub mean_isi_us: Option<f64>,
    pub bimodality: f64,
    pub threshold_ma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronMetrics {
    pub rows: Vec<NeuronRow>,
    pub all_match: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metrics {
    RbpIris(RbpMetrics),
    ChlMapping(ChlMetrics),
    NeuronBehaviors(NeuronMetrics),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub metrics: Metrics,
    /// Files written, relative to the output directory.
    pub artifacts: Vec<String>,
    /// Named convergence flags; `true` means the run behaved.
    pub convergence: Vec<(String, bool)>,
    /// Not serialized, so reports stay reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

pub const REPORT_FILE: &str = "report.json";
pub const RBP_ACCURACY_FILE: &str = "rbp_accuracy.csv";
pub const RBP_MESH_FILE: &str = "rbp_mesh_state.json";
pub const RBP_LUT_FILE: &str = "rbp_input_lut.json";
pub const CHL_RMSE_FILE: &str = "chl_rmse.csv";
pub const CHL_SETUP_FILE: &str = "chl_setup.json";
pub const SPIKES_FILE: &str = "spikes.csv";
pub const PRESETS_FILE: &str = "presets.json";

/// Runs the experiment and writes its artifacts plus `report.json`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    let start = Instant::now();
    config.validate()?;
    let dir = config.resolved_output_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let ctx = format!("experiment {}", config.experiment.id());
    let (metrics, mut artifacts, convergence) = match config.experiment {
        ExperimentKind::RbpIris => run_rbp_iris(config, &dir),
        ExperimentKind::ChlMapping => run_chl_mapping(config, &dir),
        ExperimentKind::NeuronBehaviors => run_neuron_behaviors(config, &dir),
    }
    .context(ctx.clone())?;
    artifacts.push(REPORT_FILE.to_string());
    let report = RunReport {
        experiment: config.experiment,
        config: config.clone(),
        metrics,
        artifacts,
        convergence,
        wall_time: start.elapsed(),
    };
    write_json(&dir.join(REPORT_FILE), &report).context(ctx)?;
    Ok(report)
}

type Outcome<M> = Result<(M, Vec<String>, Vec<(String, bool)>)>;

fn run_rbp_iris(config: &ExperimentConfig, dir: &Path) -> Outcome<Metrics> {
    let samples = match &config.iris_csv {
        Some(path) => load_iris::<f64>(path)?,
        None => bundled_iris(),
    };
    let oracle = linear_regression_oracle(&samples)?;
    let rbp = config.rbp_config();
    let trainer = RbpTrainer::new(rbp, &samples, &config.imperfections)?;
    let lut = trainer.lut().clone();
    let (run, mesh) = trainer.run()?;

    let rows: Vec<Vec<f64>> = run
        .epoch_accuracy
        .iter()
        .zip(&run.best_accuracy)
        .zip(&run.mu_schedule)
        .enumerate()
        .map(|(i, ((&a, &b), &mu))| vec![(i + 1) as f64, a as f64, b as f64, mu])
        .collect();
    write_csv(
        &dir.join(RBP_ACCURACY_FILE),
        &["epoch", "true_labels", "best_true_labels", "mu"],
        &rows,
    )?;
    write_json(&dir.join(RBP_MESH_FILE), &mesh.state())?;
    write_json(&dir.join(RBP_LUT_FILE), &lut)?;
    let convergence = vec![("coarse_search_finished".to_string(), !run.coarse_stuck)];
    Ok((
        Metrics::RbpIris(RbpMetrics { run, oracle }),
        vec![RBP_ACCURACY_FILE.into(), RBP_MESH_FILE.into(), RBP_LUT_FILE.into()],
        convergence,
    ))
}

fn run_chl_mapping(config: &ExperimentConfig, dir: &Path) -> Outcome<Metrics> {
    let (run, setup) = run_chl(&config.chl_config())?;
    let rows: Vec<Vec<f64>> = (0..run.mzi.rmse.len())
        .map(|i| vec![(i + 1) as f64, run.mzi.rmse[i], run.ideal.rmse[i], run.random.rmse[i]])
        .collect();
    write_csv(
        &dir.join(CHL_RMSE_FILE),
        &["epoch", "rmse_mzi", "rmse_ideal", "rmse_random"],
        &rows,
    )?;
    write_json(&dir.join(CHL_SETUP_FILE), &setup)?;
    let convergence = vec![
        ("settle_mzi".to_string(), run.mzi.skipped == 0),
        ("settle_ideal".to_string(), run.ideal.skipped == 0),
        ("settle_random".to_string(), run.random.skipped == 0),
    ];
    let metrics = ChlMetrics {
        change_pct_mzi: run.mzi.change_pct(),
        change_pct_ideal: run.ideal.change_pct(),
        change_pct_random: run.random.change_pct(),
        ordering_holds: run.ordering_holds(),
        run,
    };
    Ok((
        Metrics::ChlMapping(metrics),
        vec![CHL_RMSE_FILE.into(), CHL_SETUP_FILE.into()],
        convergence,
    ))
}

/// Runs every shipped preset under the configured step drive.
pub fn neuron_sweep(config: &NeuronSweepConfig) -> Result<(NeuronMetrics, Vec<SpikeTrain<f64>>)> {
    let input = CurrentProfile::step(config.onset_ms, config.drive_ma);
    let mut rows = Vec::new();
    let mut trains = Vec::new();
    for preset in BiasPreset::<f64>::library() {
        let train = run_preset(&preset, &input, config.duration_ms, &config.sim)?;
        let pattern = classify_pattern(&train, &config.classifier);
        let (lo, hi) = config.threshold_range_ma;
        let threshold = excitability_threshold(
            &preset,
            lo,
            hi,
            config.duration_ms,
            &config.sim,
            &config.classifier,
            config.threshold_tol_ma,
        )?;
        rows.push(NeuronRow {
            preset: preset.name,
            pattern,
            matches: pattern == Pattern::from(preset.name),
            spikes: train.len(),
            mean_isi_us: train.mean_isi(),
            bimodality: isi_bimodality(&train.isis(), config.classifier.min_cluster_fraction),
            threshold_ma: threshold,
        });
        trains.push(train);
    }
    let all_match = rows.iter().all(|r| r.matches);
    Ok((NeuronMetrics { rows, all_match }, trains))
}

fn run_neuron_behaviors(config: &ExperimentConfig, dir: &Path) -> Outcome<Metrics> {
    let (metrics, trains) = neuron_sweep(&config.neuron)?;
    let path = dir.join(SPIKES_FILE);
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_spike_csv(&trains, file)?;
    write_json(&dir.join(PRESETS_FILE), &BiasPreset::<f64>::library())?;
    let convergence = metrics
        .rows
        .iter()
        .map(|r| (format!("threshold_{:?}", r.preset), r.threshold_ma.is_some()))
        .collect();
    Ok((
        Metrics::NeuronBehaviors(metrics),
        vec![SPIKES_FILE.into(), PRESETS_FILE.into()],
        convergence,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_is_mandatory() {
        let err = ExperimentConfig::from_json(r#"{"schema": 1, "experiment": "rbp-iris"}"#);
        assert!(err.is_err());
        let ok = ExperimentConfig::from_json(r#"{"schema": 1, "experiment": "rbp-iris", "seed": 3}"#).unwrap();
        assert_eq!(ok.rbp_config().seed, 3);
        assert_eq!(ok.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn schema_and_unknown_fields_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"schema": 2, "experiment": "rbp-iris", "seed": 0}"#).is_err());
        assert!(
            ExperimentConfig::from_json(r#"{"schema": 1, "experiment": "rbp-iris", "seed": 0, "extra": 1}"#).is_err()
        );
        assert!(ExperimentConfig::from_json(r#"{"schema": 1, "experiment": "other", "seed": 0}"#).is_err());
    }

    #[test]
    fn module_errors_carry_context() {
        let mut c = ExperimentConfig::new(ExperimentKind::RbpIris, 0);
        c.rbp.mu_fine = 1.0;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("rbp-iris"), "{msg}");
    }

    #[test]
    fn config_round_trips() {
        let c = ExperimentConfig::new(ExperimentKind::ChlMapping, 11);
        let text = crate::report::to_json_string(&c).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), c);
    }
}
