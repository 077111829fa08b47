//! Two-class Iris task and its least-squares baseline.
//!
//! Setosa is linearly separable from the other two species and is dropped,
//! leaving 50 versicolor (label 0) and 50 virginica (label 1) samples in
//! file order. Each feature is divided by its maximum over those 100 samples
//! and each sample is then scaled to unit power, so it can be injected as a
//! non-negative coherent amplitude vector.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// The vendored dataset (150 rows plus header).
pub const IRIS_CSV: &str = include_str!("../data/iris.csv");

pub const N_FEATURES: usize = 4;
pub const N_CLASSES: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LabeledSample<T> {
    /// Unit-power input amplitudes.
    pub x: [T; N_FEATURES],
    /// One-hot target.
    pub y: [T; N_CLASSES],
    pub label: usize,
}

impl<T: Scalar> LabeledSample<T> {
    pub fn new(x: [T; N_FEATURES], label: usize) -> Self {
        let mut y = [T::zero(); N_CLASSES];
        y[label] = T::one();
        Self { x, y, label }
    }

    pub fn power(&self) -> T {
        self.x.iter().fold(T::zero(), |a, &v| a + v * v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Species {
    Setosa,
    Versicolor,
    Virginica,
}

fn parse_species(s: &str) -> Option<Species> {
    let s = s.trim().trim_matches('"');
    let s = s.strip_prefix("Iris-").unwrap_or(s);
    match s.to_ascii_lowercase().as_str() {
        "setosa" | "0" => Some(Species::Setosa),
        "versicolor" | "1" => Some(Species::Versicolor),
        "virginica" | "2" => Some(Species::Virginica),
        _ => None,
    }
}

pub fn load_iris<T: Scalar>(path: &Path) -> Result<Vec<LabeledSample<T>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_iris(file)
}

/// The vendored copy, preprocessed.
pub fn bundled_iris<T: Scalar>() -> Vec<LabeledSample<T>> {
    parse_iris(IRIS_CSV.as_bytes()).expect("bundled iris.csv is well-formed")
}

/// Parses a 150-row Iris CSV (`4 features, species`, optional header).
pub fn parse_iris<T: Scalar, R: Read>(reader: R) -> Result<Vec<LabeledSample<T>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<([f64; N_FEATURES], Species)> = Vec::with_capacity(150);
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::Ingestion {
            line,
            msg: e.to_string(),
        })?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rec.len() != N_FEATURES + 1 {
            return Err(Error::Ingestion {
                line,
                msg: format!("expected 5 fields, found {}", rec.len()),
            });
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            rec.iter().take(N_FEATURES).map(str::parse::<f64>).collect();
        let feats = match parsed {
            Ok(v) => v,
            // A non-numeric first line is a header.
            Err(_) if line == 1 => continue,
            Err(e) => {
                return Err(Error::Ingestion {
                    line,
                    msg: format!("bad feature value: {e}"),
                })
            }
        };
        if feats.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Ingestion {
                line,
                msg: "features must be positive and finite".into(),
            });
        }
        let species = parse_species(&rec[N_FEATURES]).ok_or_else(|| Error::Ingestion {
            line,
            msg: format!("unknown class {:?}", &rec[N_FEATURES]),
        })?;
        rows.push(([feats[0], feats[1], feats[2], feats[3]], species));
    }
    if rows.len() != 150 {
        return Err(Error::Ingestion {
            line: rows.len(),
            msg: format!("expected 150 samples, found {}", rows.len()),
        });
    }

    let kept: Vec<_> = rows
        .into_iter()
        .filter_map(|(f, s)| match s {
            Species::Setosa => None,
            Species::Versicolor => Some((f, 0)),
            Species::Virginica => Some((f, 1)),
        })
        .collect();
    if kept.len() != 100 {
        return Err(Error::Ingestion {
            line: 0,
            msg: format!("expected 100 non-setosa samples, found {}", kept.len()),
        });
    }

    let mut max = [0.0f64; N_FEATURES];
    for (f, _) in &kept {
        for j in 0..N_FEATURES {
            max[j] = max[j].max(f[j]);
        }
    }
    Ok(kept
        .into_iter()
        .map(|(f, label)| {
            let scaled: Vec<f64> = (0..N_FEATURES).map(|j| f[j] / max[j]).collect();
            let norm = scaled.iter().map(|v| v * v).sum::<f64>().sqrt();
            let x = [0, 1, 2, 3].map(|j| T::lit(scaled[j] / norm));
            LabeledSample::new(x, label)
        })
        .collect())
}

/// Confusion counts, `[true label][predicted label]`.
pub type Confusion = [[usize; N_CLASSES]; N_CLASSES];

pub fn confusion(labels: &[usize], predicted: &[usize]) -> Confusion {
    let mut c = [[0; N_CLASSES]; N_CLASSES];
    for (&l, &p) in labels.iter().zip(predicted) {
        c[l][p] += 1;
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub accuracy: usize,
    pub confusion: Confusion,
    /// `(N_FEATURES + 1) × N_CLASSES`, bias row last.
    pub weights: Vec<Vec<f64>>,
    /// The normal equations were singular and a 1e-8 ridge was added.
    pub ridge_used: bool,
}

/// Ordinary least squares of the one-hot targets on `[x; 1]`, classified by
/// argmax.
pub fn linear_regression_oracle<T: Scalar>(samples: &[LabeledSample<T>]) -> Result<OracleResult> {
    if samples.is_empty() {
        return Err(Error::Config("oracle needs at least one sample".into()));
    }
    let d = N_FEATURES + 1;
    let a = DMatrix::from_fn(samples.len(), d, |i, j| {
        if j < N_FEATURES {
            samples[i].x[j].as_f64()
        } else {
            1.0
        }
    });
    let t = DMatrix::from_fn(samples.len(), N_CLASSES, |i, j| samples[i].y[j].as_f64());
    let ata = a.transpose() * &a;
    let att = a.transpose() * &t;
    let scale = ata.diagonal().max();
    let well_posed = |ch: &nalgebra::Cholesky<f64, nalgebra::Dyn>| {
        ch.l_dirty().diagonal().iter().all(|&l| l * l > 1e-12 * scale)
    };
    let (w, ridge_used) = match ata.clone().cholesky().filter(well_posed) {
        Some(ch) => (ch.solve(&att), false),
        None => {
            let ridged = ata + DMatrix::identity(d, d) * 1e-8;
            let ch = ridged
                .cholesky()
                .ok_or_else(|| Error::Config("normal equations singular even with ridge".into()))?;
            (ch.solve(&att), true)
        }
    };
    let scores = &a * &w;
    let predicted: Vec<usize> = (0..samples.len())
        .map(|i| argmax(&DVector::from_iterator(N_CLASSES, scores.row(i).iter().copied())))
        .collect();
    let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let accuracy = labels.iter().zip(&predicted).filter(|(l, p)| l == p).count();
    Ok(OracleResult {
        accuracy,
        confusion: confusion(&labels, &predicted),
        weights: (0..d).map(|i| w.row(i).iter().copied().collect()).collect(),
        ridge_used,
    })
}

fn argmax(v: &DVector<f64>) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}
