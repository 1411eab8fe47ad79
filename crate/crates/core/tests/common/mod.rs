#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use ehrsynth::data::{FeatureSchema, RecordMatrix};
use ehrsynth::nn::{Matrix, RandomSource};

pub const BIN: &str = env!("CARGO_BIN_EXE_ehrsynth");

pub fn ehrsynth<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(BIN)
        .args(args)
        .env_remove("EHRSYNTH_CONFIG")
        .output()
        .expect("binary runs")
}

/// Two-component Bernoulli mixture over `width` binary features.
pub struct BernoulliMixture {
    pub weight: f64,
    /// Per-component success probabilities.
    pub probs: [Vec<f64>; 2],
}

impl BernoulliMixture {
    /// Component probabilities drawn uniformly from `[lo, hi]`, equal weights.
    pub fn random(width: usize, lo: f64, hi: f64, seed: u64) -> Self {
        let mut rng = RandomSource::new(seed);
        let mut draw = || (0..width).map(|_| rng.uniform_range(lo, hi)).collect::<Vec<_>>();
        let a = draw();
        let b = draw();
        Self { weight: 0.5, probs: [a, b] }
    }

    pub fn width(&self) -> usize {
        self.probs[0].len()
    }

    pub fn prevalence(&self) -> Vec<f64> {
        self.probs[0]
            .iter()
            .zip(&self.probs[1])
            .map(|(a, b)| self.weight * a + (1.0 - self.weight) * b)
            .collect()
    }

    pub fn sample(&self, n: usize, rng: &mut RandomSource) -> Matrix<f64> {
        let c = self.width();
        let mut data = Vec::with_capacity(n * c);
        for _ in 0..n {
            let k = usize::from(rng.uniform() >= self.weight);
            data.extend(self.probs[k].iter().map(|&p| f64::from(u8::from(rng.uniform() < p))));
        }
        Matrix::from_vec(n, c, data).unwrap()
    }
}

pub fn binary_records(m: Matrix<f64>) -> RecordMatrix {
    let c = m.cols();
    RecordMatrix::new(m, Arc::new(FeatureSchema::all_binary(c))).unwrap()
}

pub fn write_schema(path: &Path, schema: &FeatureSchema) {
    std::fs::write(path, schema.to_string()).unwrap();
}

/// Writes a 0/1 matrix as a headed CSV using the schema's column names.
pub fn write_binary_csv(path: &Path, m: &Matrix<f64>, schema: &FeatureSchema) {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(schema.columns().iter().map(|c| c.name.as_str())).unwrap();
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| if *v >= 0.5 { "1" } else { "0" })).unwrap();
    }
    w.flush().unwrap();
}

pub fn file(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}
