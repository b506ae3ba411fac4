use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::TaskError;

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix shape mismatch");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn select(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(indices.len(), self.cols, data)
    }
}

/// Labelled classification data. Class tokens are mapped to dense indices
/// in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: Matrix,
    labels: Vec<usize>,
    classes: Vec<String>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self, TaskError> {
        let name = name.into();
        if rows.len() != labels.len() {
            return Err(TaskError::Dataset(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if rows.is_empty() {
            return Err(TaskError::Dataset("no rows".into()));
        }
        let d = rows[0].len();
        if d == 0 {
            return Err(TaskError::Dataset("no feature columns".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(TaskError::Dataset(format!(
                    "row {i} has {} features, expected {d}",
                    r.len()
                )));
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(TaskError::Dataset(format!("row {i} has a missing or non-finite value")));
            }
        }
        let mut classes: Vec<String> = Vec::new();
        let labels: Vec<usize> = labels
            .into_iter()
            .map(|l| match classes.iter().position(|c| *c == l) {
                Some(i) => i,
                None => {
                    classes.push(l);
                    classes.len() - 1
                }
            })
            .collect();
        if classes.len() < 2 {
            return Err(TaskError::Dataset("need at least two classes".into()));
        }
        Ok(Self {
            name,
            features: Matrix::from_rows(&rows),
            labels,
            classes,
        })
    }

    /// Headerless CSV; the last column is the class label.
    pub fn from_csv(path: &Path) -> Result<Self, TaskError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(TaskError::Dataset(format!(
                    "line {}: need features and a label",
                    line + 1
                )));
            }
            let label = rec[rec.len() - 1].to_owned();
            let row = rec
                .iter()
                .take(rec.len() - 1)
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| TaskError::Dataset(format!("line {}: bad number `{f}`", line + 1)))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            rows.push(row);
            labels.push(label);
        }
        let name = path
            .file_stem()
            .map_or_else(|| "csv".to_owned(), |s| s.to_string_lossy().into_owned());
        Self::new(name, rows, labels)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn subset(&self, indices: &[usize]) -> (Matrix, Vec<usize>) {
        (
            self.features.select(indices),
            indices.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// Two Gaussian blobs, unit variance, centers about 7σ apart.
    TwoClusters,
    /// Uniform points in `[-1, 1]²` labelled by quadrant parity.
    Xor,
    /// Two noisy concentric rings.
    Rings,
}

/// Generates `n` samples with two informative features, followed by
/// `noise_features` standard-normal columns. Classes alternate so the data
/// is balanced.
pub fn generate(kind: GeneratorKind, n: usize, noise_features: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("valid normal");
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let (x, y) = match kind {
            GeneratorKind::TwoClusters => {
                let c = if class == 0 { -2.5 } else { 2.5 };
                (c + std.sample(&mut rng), c + std.sample(&mut rng))
            }
            GeneratorKind::Xor => {
                // draw inside the quadrants that match the class
                let sx = if rng.random::<bool>() { 1.0 } else { -1.0 };
                let sy = if class == 0 { sx } else { -sx };
                (sx * rng.random::<f64>(), sy * rng.random::<f64>())
            }
            GeneratorKind::Rings => {
                let radius = if class == 0 { 1.0 } else { 2.0 };
                let r = radius + 0.35 * std.sample(&mut rng);
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                (r * theta.cos(), r * theta.sin())
            }
        };
        let mut row = vec![x, y];
        row.extend((0..noise_features).map(|_| std.sample(&mut rng)));
        rows.push(row);
        labels.push(class.to_string());
    }
    let name = match kind {
        GeneratorKind::TwoClusters => "two-clusters",
        GeneratorKind::Xor => "xor",
        GeneratorKind::Rings => "rings",
    };
    Dataset::new(name, rows, labels).expect("generated data is well formed")
}
