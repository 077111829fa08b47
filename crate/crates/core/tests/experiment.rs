use phsnn::experiment::{
    run_experiment, ExperimentConfig, ExperimentKind, Metrics, RunReport, CHL_RMSE_FILE, RBP_ACCURACY_FILE,
    REPORT_FILE, SPIKES_FILE,
};
use phsnn::iris::IRIS_CSV;

fn config_in(kind: ExperimentKind, dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind, 5);
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn csv_rows(path: &std::path::Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn rbp_iris_writes_traces_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_in(ExperimentKind::RbpIris, dir.path());
    cfg.rbp.epochs_max = 12;
    let report = run_experiment(&cfg).unwrap();
    let rows = csv_rows(&dir.path().join(RBP_ACCURACY_FILE));
    assert_eq!(rows[0], ["epoch", "true_labels", "best_true_labels", "mu"]);
    assert_eq!(rows.len(), 13);
    assert_eq!(rows[1][0], "1");
    // Floats carry 17 significant digits.
    assert_eq!(rows[1][3], "5.0000000000000003e-2");
    let Metrics::RbpIris(m) = &report.metrics else { panic!("wrong metrics") };
    assert_eq!(m.oracle.accuracy, 94);
    assert_eq!(m.run.seed, 5);
    let text = std::fs::read_to_string(dir.path().join(REPORT_FILE)).unwrap();
    let back: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back.metrics, report.metrics);
    assert!(!text.contains("wall_time"));
}

#[test]
fn chl_mapping_writes_one_row_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_in(ExperimentKind::ChlMapping, dir.path());
    cfg.chl.epochs = 7;
    cfg.chl.dataset_size = 10;
    let report = run_experiment(&cfg).unwrap();
    let rows = csv_rows(&dir.path().join(CHL_RMSE_FILE));
    assert_eq!(rows[0], ["epoch", "rmse_mzi", "rmse_ideal", "rmse_random"]);
    assert_eq!(rows.len(), 8);
    assert!(report.artifacts.contains(&REPORT_FILE.to_string()));
}

#[test]
fn neuron_behaviors_match_presets() {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&config_in(ExperimentKind::NeuronBehaviors, dir.path())).unwrap();
    let Metrics::NeuronBehaviors(m) = &report.metrics else { panic!("wrong metrics") };
    assert!(m.all_match);
    let rows = csv_rows(&dir.path().join(SPIKES_FILE));
    assert_eq!(rows[0], ["time_us", "neuron_id"]);
    assert_eq!(rows.len() - 1, m.rows.iter().map(|r| r.spikes).sum::<usize>());
    assert!(report.convergence.iter().all(|(_, ok)| *ok));
}

#[test]
fn external_iris_file_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("iris.csv");
    std::fs::write(&csv, IRIS_CSV).unwrap();
    let mut cfg = config_in(ExperimentKind::RbpIris, &dir.path().join("out"));
    cfg.rbp.epochs_max = 2;
    cfg.iris_csv = Some(csv);
    run_experiment(&cfg).unwrap();

    cfg.iris_csv = Some(dir.path().join("missing.csv"));
    let msg = run_experiment(&cfg).unwrap_err().to_string();
    assert!(msg.contains("rbp-iris"), "{msg}");
}

#[test]
fn invalid_module_config_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config_in(ExperimentKind::ChlMapping, &dir.path().join("never"));
    cfg.chl.settle.damping = 0.0;
    assert!(run_experiment(&cfg).is_err());
    assert!(!dir.path().join("never").exists());
}
