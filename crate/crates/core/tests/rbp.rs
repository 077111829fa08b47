use phsnn::imperfections::ImperfectionConfig;
use phsnn::iris::bundled_iris;
use phsnn::mesh::{FieldMode, OpticalField};
use phsnn::rbp::{readout, run_rbp, RbpConfig, RbpTrainer, TrainedShifters, UpdateTarget};
use proptest::prelude::*;

fn quick(seed: u64) -> RbpConfig<f64> {
    RbpConfig {
        seed,
        epochs_max: 25,
        ..RbpConfig::default()
    }
}

#[test]
fn lut_reproduces_every_sample() {
    let samples = bundled_iris::<f64>();
    let trainer = RbpTrainer::new(RbpConfig::default(), &samples, &ImperfectionConfig::disabled()).unwrap();
    let lut = trainer.lut();
    assert_eq!(lut.entries.len(), 100);
    for (e, s) in lut.entries.iter().zip(&samples) {
        assert!(e.residual <= 1e-6, "residual {}", e.residual);
        for (a, x) in e.achieved.iter().zip(&s.x) {
            assert!((a * a - x * x).abs() <= 1e-6);
        }
    }
}

#[test]
fn report_traces_are_consistent() {
    let r = run_rbp(&quick(0), &bundled_iris::<f64>(), &ImperfectionConfig::disabled()).unwrap();
    assert_eq!(r.epoch_accuracy.len(), 25);
    assert_eq!(r.mu_schedule.len(), 25);
    assert!(r.best_accuracy.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*r.best_accuracy.last().unwrap(), r.final_accuracy);
    let best = r.best_epoch.unwrap();
    assert_eq!(r.epoch_accuracy[best - 1], r.final_accuracy);
    assert_eq!(r.checkpoints.iter().map(|c| c.epoch).collect::<Vec<_>>(), vec![10, 20]);
    assert_eq!(r.confusion.iter().flatten().sum::<usize>(), 100);
    assert_eq!(r.coarse_stuck, r.switch_epoch.is_none());
}

#[test]
fn runs_are_deterministic() {
    let samples = bundled_iris::<f64>();
    let imp = ImperfectionConfig::all_enabled();
    let a = run_rbp(&quick(3), &samples, &imp).unwrap();
    let b = run_rbp(&quick(3), &samples, &imp).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let c = run_rbp(&quick(4), &samples, &imp).unwrap();
    assert_ne!(a.epoch_accuracy, c.epoch_accuracy);
}

#[test]
fn restored_mesh_scores_the_best_accuracy() {
    let samples = bundled_iris::<f64>();
    let cfg = quick(1);
    let trainer = RbpTrainer::new(cfg.clone(), &samples, &ImperfectionConfig::disabled()).unwrap();
    let lut = trainer.lut().clone();
    let (report, mesh) = trainer.run().unwrap();
    // Re-score the returned mesh by hand from the calibrated inputs.
    let mut hits = 0;
    for (e, s) in lut.entries.iter().zip(&samples) {
        let mut x = vec![0.0; 6];
        x[..4].copy_from_slice(&e.achieved);
        let out = mesh.transmit(&OpticalField::from_real(&x)).unwrap();
        let r = readout(&[0.01 * out.power(0), 0.01 * out.power(1)], &cfg).unwrap();
        let pred = usize::from(r.i_out[1] > r.i_out[0]);
        hits += usize::from(pred == s.label);
    }
    assert_eq!(hits, report.final_accuracy);
}

#[test]
fn alternative_modes_train() {
    let samples = bundled_iris::<f64>();
    for (target, trained, mode) in [
        (UpdateTarget::Phase, TrainedShifters::Theta, FieldMode::RealAmplitude),
        (UpdateTarget::Voltage, TrainedShifters::Both, FieldMode::ComplexField),
        (UpdateTarget::Voltage, TrainedShifters::Phi, FieldMode::ComplexField),
    ] {
        let cfg = RbpConfig {
            update_target: target,
            trained,
            mode,
            ..quick(2)
        };
        let r = run_rbp(&cfg, &samples, &ImperfectionConfig::disabled()).unwrap();
        assert!(r.final_accuracy >= 50, "{target:?} {trained:?} {mode:?}: {}", r.final_accuracy);
    }
}

#[test]
fn f32_run_reaches_high_accuracy() {
    let samples = bundled_iris::<f32>();
    let cfg = RbpConfig::<f32> {
        epochs_max: 40,
        calibration: phsnn::rbp::CalibrationConfig {
            tol: 1e-5,
            max_sweeps: 200,
        },
        ..RbpConfig::default()
    };
    let r = run_rbp(&cfg, &samples, &ImperfectionConfig::disabled()).unwrap();
    assert!(r.final_accuracy >= 88, "{}", r.final_accuracy);
}

#[test]
fn too_few_samples_is_an_error() {
    let samples = bundled_iris::<f64>();
    assert!(run_rbp(&quick(0), &samples[..50], &ImperfectionConfig::disabled()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn readout_normalizes(p0 in 1e-6f64..1e-2, p1 in 1e-6f64..1e-2) {
        let r = readout(&[p0, p1], &RbpConfig::default()).unwrap();
        prop_assert!((r.y_hat[0] + r.y_hat[1] - 1.0).abs() < 1e-12);
        prop_assert!((r.y_hat[0] - p0 / (p0 + p1)).abs() < 1e-9);
        prop_assert_eq!(r.i_out[0] > r.i_out[1], p0 > p1);
    }
}
