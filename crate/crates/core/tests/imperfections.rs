use phsnn::imperfections::{apply_crosstalk, neighbor_coupling, quantize, HardwareModel, ImperfectionConfig};
use phsnn::iris::bundled_iris;
use phsnn::rbp::{run_rbp, RbpConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn disabled_effects_ignore_their_magnitudes() {
    let odd = ImperfectionConfig::<f64> {
        pd_noise_sigma: 0.3,
        crosstalk_leak: 0.05,
        dac_bits: 4,
        adc_bits: 4,
        ..ImperfectionConfig::disabled()
    };
    let cfg = RbpConfig::<f64> {
        epochs_max: 15,
        ..RbpConfig::default()
    };
    let samples = bundled_iris::<f64>();
    let ideal = run_rbp(&cfg, &samples, &ImperfectionConfig::disabled()).unwrap();
    let other = run_rbp(&cfg, &samples, &odd).unwrap();
    assert_eq!(serde_json::to_string(&ideal).unwrap(), serde_json::to_string(&other).unwrap());
}

#[test]
fn hardware_model_passes_values_through_when_disabled() {
    let mut hw = HardwareModel::new(ImperfectionConfig::<f64>::disabled(), ChaCha8Rng::seed_from_u64(0)).unwrap();
    for v in [-1.0, 0.0, 0.123456789, 3.0] {
        assert_eq!(hw.dac(v), v);
        assert_eq!(hw.adc(v), v);
        assert_eq!(hw.read_power(v), v);
    }
}

#[test]
fn pd_noise_has_configured_spread() {
    let cfg = ImperfectionConfig::<f64> {
        pd_noise_enabled: true,
        pd_noise_sigma: 0.01,
        ..ImperfectionConfig::default()
    };
    let mut hw = HardwareModel::new(cfg, ChaCha8Rng::seed_from_u64(4)).unwrap();
    let xs: Vec<f64> = (0..20_000).map(|_| hw.read_power(2.0)).collect();
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
    assert!((mean - 2.0).abs() < 1e-3, "{mean}");
    assert!((sd - 0.02).abs() < 1e-3, "{sd}");
}

#[test]
fn invalid_configs_are_rejected() {
    let bad_bits = ImperfectionConfig::<f64> {
        dac_bits: 2,
        ..ImperfectionConfig::default()
    };
    assert!(bad_bits.validate().is_err());
    let bad_matrix = ImperfectionConfig::<f64> {
        crosstalk: Some(vec![vec![0.5, 0.4], vec![0.0, 1.0]]),
        ..ImperfectionConfig::default()
    };
    assert!(bad_matrix.validate().is_err());
    assert!(apply_crosstalk(&[1.0, 2.0, 3.0], &neighbor_coupling(2, 0.01)).is_err());
}

proptest! {
    #[test]
    fn crosstalk_fixes_uniform_phases(n in 1usize..40, leak in 0.0f64..0.05, p in 0.0f64..6.0) {
        let c = neighbor_coupling(n, leak);
        for row in &c {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let out = apply_crosstalk(&vec![p; n], &c).unwrap();
        for v in out {
            prop_assert!((v - p).abs() < 1e-12);
        }
    }

    #[test]
    fn crosstalk_without_leak_is_identity(phases in prop::collection::vec(0.0f64..6.3, 1..30)) {
        let out = apply_crosstalk(&phases, &neighbor_coupling(phases.len(), 0.0)).unwrap();
        prop_assert_eq!(out, phases);
    }

    #[test]
    fn quantizer_error_is_half_a_step(v in -5.0f64..5.0, bits in 4u32..=16) {
        let q = quantize(v, bits, (-5.0, 5.0)).unwrap();
        let step = 10.0 / (1u64 << bits) as f64;
        prop_assert!((q - v).abs() <= step / 2.0 + 1e-12);
        prop_assert_eq!(quantize(q, bits, (-5.0, 5.0)).unwrap(), q);
    }
}
