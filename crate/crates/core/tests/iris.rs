use phsnn::iris::{bundled_iris, linear_regression_oracle, parse_iris, LabeledSample, IRIS_CSV};

/// Independent oracle: build XᵀX and XᵀY by hand and solve with Gaussian
/// elimination and partial pivoting.
fn normal_equations(samples: &[LabeledSample<f64>]) -> Vec<[f64; 2]> {
    let rows: Vec<[f64; 5]> = samples
        .iter()
        .map(|s| [s.x[0], s.x[1], s.x[2], s.x[3], 1.0])
        .collect();
    let mut a = [[0.0f64; 7]; 5];
    for (r, s) in rows.iter().zip(samples) {
        for i in 0..5 {
            for j in 0..5 {
                a[i][j] += r[i] * r[j];
            }
            a[i][5] += r[i] * s.y[0];
            a[i][6] += r[i] * s.y[1];
        }
    }
    for col in 0..5 {
        let p = (col..5).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, p);
        for r in 0..5 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..7 {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..5).map(|i| [a[i][5] / a[i][i], a[i][6] / a[i][i]]).collect()
}

#[test]
fn oracle_matches_normal_equations() {
    let samples = bundled_iris::<f64>();
    let r = linear_regression_oracle(&samples).unwrap();
    let expected = normal_equations(&samples);
    assert_eq!(r.weights.len(), 5);
    for (got, want) in r.weights.iter().zip(&expected) {
        for k in 0..2 {
            assert!((got[k] - want[k]).abs() < 1e-8 * want[k].abs().max(1.0), "{got:?} vs {want:?}");
        }
    }
    assert!(!r.ridge_used);
    assert_eq!(r.accuracy, 94);
    let predicted: usize = r.confusion.iter().flatten().sum();
    assert_eq!(predicted, 100);
}

#[test]
fn bundled_set_is_two_balanced_classes_of_unit_power() {
    let samples = bundled_iris::<f64>();
    assert_eq!(samples.len(), 100);
    assert_eq!(samples.iter().filter(|s| s.label == 0).count(), 50);
    for s in &samples {
        assert!((s.power() - 1.0).abs() < 1e-12);
        assert!(s.x.iter().all(|&v| v >= 0.0));
    }
    assert_eq!(parse_iris::<f64, _>(IRIS_CSV.as_bytes()).unwrap(), samples);
}

#[test]
fn malformed_input_is_rejected() {
    assert!(parse_iris::<f64, _>("".as_bytes()).is_err());
    let truncated: String = IRIS_CSV.lines().take(20).collect::<Vec<_>>().join("\n");
    assert!(parse_iris::<f64, _>(truncated.as_bytes()).is_err());
    let bad = IRIS_CSV.replacen("5.1", "five", 1);
    let err = parse_iris::<f64, _>(bad.as_bytes()).unwrap_err().to_string();
    assert!(err.contains("line"), "{err}");
}

#[test]
fn separable_set_is_classified_perfectly() {
    let samples: Vec<_> = (0..20)
        .map(|i| {
            let t = i as f64 / 20.0;
            let label = i % 2;
            let x = if label == 0 { [1.0, t, 0.1, 0.0] } else { [0.1, t, 1.0, 0.2] };
            let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            LabeledSample::new(x.map(|v| v / n), label)
        })
        .collect();
    assert_eq!(linear_regression_oracle(&samples).unwrap().accuracy, 20);
}

#[test]
fn duplicated_features_fall_back_to_ridge() {
    let samples: Vec<_> = bundled_iris::<f64>()
        .into_iter()
        .map(|s| LabeledSample::new([s.x[0], s.x[0], s.x[2], s.x[3]], s.label))
        .collect();
    let r = linear_regression_oracle(&samples).unwrap();
    assert!(r.ridge_used);
    assert!(r.weights.iter().flatten().all(|w| w.is_finite()));
}
