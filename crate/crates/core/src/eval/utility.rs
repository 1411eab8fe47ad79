use serde::Serialize;

use crate::data::RecordMatrix;
use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::stats::{
    auc, binary_entropy, correlation_matrix, elbow_from_curve, f1_score, fixed_histogram, inertia_curve,
    logistic_fit, pca_fit, pearson,
};

pub(crate) fn check_compatible(a: &RecordMatrix, b: &RecordMatrix) -> Result<()> {
    if a.schema() != b.schema() {
        return Err(Error::Schema("record matrices use different schemas".into()));
    }
    Ok(())
}

/// Per-column empirical mean.
pub fn prevalence(matrix: &RecordMatrix) -> Result<Vec<f64>> {
    let n = matrix.row_count();
    if n == 0 {
        return Err(Error::InvalidArgument("prevalence of an empty matrix".into()));
    }
    let mut sums = vec![0.0; matrix.col_count()];
    for row in matrix.data().row_iter() {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    Ok(sums.into_iter().map(|s| s / n as f64).collect())
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct PrevalenceComparison {
    pub correlation: f64,
    /// `(real, synthetic)` prevalence per encoded column.
    pub pairs: Vec<(f64, f64)>,
}

/// Pearson correlation between real and synthetic prevalence vectors.
pub fn prevalence_correlation(real: &RecordMatrix, synth: &RecordMatrix) -> Result<PrevalenceComparison> {
    check_compatible(real, synth)?;
    let pr = prevalence(real)?;
    let ps = prevalence(synth)?;
    let correlation = pearson(&pr, &ps)?;
    Ok(PrevalenceComparison {
        correlation,
        pairs: pr.into_iter().zip(ps).collect(),
    })
}

/// Number of binary code columns holding at least one positive entry.
pub fn non_zero_columns(synth: &RecordMatrix) -> usize {
    synth
        .schema()
        .binary_coordinates()
        .into_iter()
        .filter(|&c| synth.data().row_iter().any(|r| r[c] >= 0.5))
        .count()
}

/// Mean over all `C^2` entries of `|corr_real(i, j) - corr_synth(i, j)|`.
pub fn correlation_matrix_distance(real: &RecordMatrix, synth: &RecordMatrix) -> Result<f64> {
    check_compatible(real, synth)?;
    let c = real.col_count();
    if c == 0 {
        return Ok(0.0);
    }
    let a = correlation_matrix(real.data());
    let b = correlation_matrix(synth.data());
    let total: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).abs()).sum();
    Ok(total / (c * c) as f64)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct PredictionTask {
    pub column: String,
    pub entropy: f64,
    pub real_f1: f64,
    pub synth_f1: f64,
    pub real_degenerate: bool,
    pub synth_degenerate: bool,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct DimensionwisePrediction {
    pub tasks: Vec<PredictionTask>,
    /// Pearson correlation of the paired F1 scores; `None` with fewer than 2 tasks.
    pub correlation: Option<f64>,
    /// Fewer binary columns were available than tasks requested.
    pub truncated: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifierOptions {
    /// L2 penalty; `None` means `1 / N` for an `N`-row training set.
    pub l2: Option<f64>,
    pub max_iter: usize,
}

impl Default for ClassifierOptions {
    fn default() -> Self {
        Self { l2: None, max_iter: 500 }
    }
}

fn labels(matrix: &Matrix<f64>, coord: usize) -> Vec<bool> {
    matrix.row_iter().map(|r| r[coord] >= 0.5).collect()
}

fn without(width: usize, coord: usize) -> Vec<usize> {
    (0..width).filter(|&c| c != coord).collect()
}

/// Binary columns ordered by entropy of their real-train prevalence,
/// highest first; ties keep schema order.
pub fn entropy_ranking(real_train: &RecordMatrix) -> Result<Vec<(usize, f64)>> {
    let prev = prevalence(real_train)?;
    let mut ranked: Vec<(usize, f64)> = real_train
        .schema()
        .binary_coordinates()
        .into_iter()
        .map(|c| (c, binary_entropy(prev[c])))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(ranked)
}

/// For each of the `tasks` highest-entropy binary columns, trains a logistic
/// model predicting it from every other column on real and on synthetic
/// data, and scores both on the real test set with F1.
pub fn dimensionwise_prediction(
    real_train: &RecordMatrix,
    real_test: &RecordMatrix,
    synth: &RecordMatrix,
    tasks: usize,
    classifier: ClassifierOptions,
) -> Result<DimensionwisePrediction> {
    check_compatible(real_train, real_test)?;
    check_compatible(real_train, synth)?;
    let ranked = entropy_ranking(real_train)?;
    let truncated = ranked.len() < tasks;
    let schema = real_train.schema();
    let width = real_train.col_count();
    let name_of = |coord: usize| {
        schema
            .columns()
            .iter()
            .enumerate()
            .find(|(i, _)| schema.offset(*i) == coord)
            .map(|(_, c)| c.name.clone())
            .unwrap_or_default()
    };
    let results: Vec<PredictionTask> = ranked
        .iter()
        .take(tasks)
        .map(|&(coord, entropy)| {
            let predictors = without(width, coord);
            let x_test = real_test.data().select_cols(&predictors);
            let y_test = labels(real_test.data(), coord);
            let score = |train: &RecordMatrix| -> Result<(f64, bool)> {
                let x = train.data().select_cols(&predictors);
                let y = labels(train.data(), coord);
                let l2 = classifier.l2.unwrap_or(1.0 / train.row_count() as f64);
                let model = logistic_fit(&x, &y, l2, classifier.max_iter)?;
                Ok((f1_score(&model.predict(&x_test)?, &y_test)?, model.degenerate))
            };
            let (real_f1, real_degenerate) = score(real_train)?;
            let (synth_f1, synth_degenerate) = score(synth)?;
            Ok(PredictionTask {
                column: name_of(coord),
                entropy,
                real_f1,
                synth_f1,
                real_degenerate,
                synth_degenerate,
            })
        })
        .collect::<Result<_>>()?;
    let correlation = if results.len() >= 2 {
        let r: Vec<f64> = results.iter().map(|t| t.real_f1).collect();
        let s: Vec<f64> = results.iter().map(|t| t.synth_f1).collect();
        Some(pearson(&r, &s)?)
    } else {
        None
    };
    Ok(DimensionwisePrediction {
        tasks: results,
        correlation,
        truncated,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatentOptions {
    /// Keep the fewest components explaining at least this variance fraction.
    pub variance_fraction: f64,
    pub max_components: usize,
    /// Candidate cluster counts for the elbow search.
    pub k_range: Vec<usize>,
    /// Skip the elbow search and use this many clusters.
    pub fixed_k: Option<usize>,
}

impl Default for LatentOptions {
    fn default() -> Self {
        Self {
            variance_fraction: 0.8,
            max_components: 10,
            k_range: (2..=8).collect(),
            fixed_k: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct LatentDistance {
    pub value: f64,
    pub k: usize,
    pub components: usize,
    /// Real fraction of each cluster.
    pub real_fractions: Vec<f64>,
}

/// Argument floor for the logarithm; perfectly balanced clusters report
/// `ln(1e-12)` instead of negative infinity.
pub const LATENT_LOG_FLOOR: f64 = 1e-12;

/// `log(mean_i (n_i_real / n_i - 0.5)^2)` over clusters of the PCA-projected,
/// stacked real and synthetic records.
pub fn latent_cluster_distance(
    real: &RecordMatrix,
    synth: &RecordMatrix,
    opts: &LatentOptions,
    seed: u64,
) -> Result<LatentDistance> {
    check_compatible(real, synth)?;
    let stacked = real.data().vstack(synth.data())?;
    let n = stacked.rows();
    let pca = pca_fit(&stacked)?;
    let components = pca.components_for_variance(opts.variance_fraction, opts.max_components);
    let latent = pca.transform(&stacked, components)?;
    let clusters = match opts.fixed_k {
        Some(k) => inertia_curve(&latent, &[k], seed)?.pop().expect("one entry per k"),
        None => {
            let ks: Vec<usize> = opts.k_range.iter().copied().filter(|&k| k <= n).collect();
            let curve = inertia_curve(&latent, &ks, seed)?;
            let k = elbow_from_curve(&ks, &curve)?;
            curve.into_iter().find(|c| c.k == k).expect("chosen k is on the curve")
        }
    };
    let k = clusters.k;
    let mut totals = vec![0usize; k];
    let mut reals = vec![0usize; k];
    for (i, &a) in clusters.assignments.iter().enumerate() {
        totals[a] += 1;
        if i < real.row_count() {
            reals[a] += 1;
        }
    }
    let real_fractions: Vec<f64> = totals
        .iter()
        .zip(&reals)
        .map(|(&t, &r)| if t == 0 { 0.5 } else { r as f64 / t as f64 })
        .collect();
    let mean_sq = real_fractions.iter().map(|f| (f - 0.5) * (f - 0.5)).sum::<f64>() / k as f64;
    Ok(LatentDistance {
        value: mean_sq.max(LATENT_LOG_FLOOR).ln(),
        k,
        components,
        real_fractions,
    })
}

/// Total-variation-style distance between histograms of positive-code counts
/// per record: `sum_i |h_real(i) - h_synth(i)| / (2N)`.
pub fn mca_distance(real: &RecordMatrix, synth: &RecordMatrix, bins: usize) -> Result<f64> {
    check_compatible(real, synth)?;
    let n = real.row_count();
    if synth.row_count() != n {
        return Err(Error::InvalidArgument(format!(
            "abundance distance needs equal sample counts, got {n} real and {} synthetic",
            synth.row_count()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("abundance distance of empty data".into()));
    }
    let coords = real.schema().binary_coordinates();
    let hi = coords.len().max(1) as f64;
    let counts = |m: &RecordMatrix| -> Vec<f64> {
        m.data()
            .row_iter()
            .map(|r| coords.iter().filter(|&&c| r[c] >= 0.5).count() as f64)
            .collect()
    };
    let hr = fixed_histogram(&counts(real), bins, 0.0, hi)?;
    let hs = fixed_histogram(&counts(synth), bins, 0.0, hi)?;
    let diff: u64 = hr.counts.iter().zip(&hs.counts).map(|(a, b)| a.abs_diff(*b)).sum();
    Ok(diff as f64 / (2 * n) as f64)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct DownstreamAuc {
    pub auc_real: f64,
    pub auc_synth: f64,
    pub real_degenerate: bool,
    pub synth_degenerate: bool,
    /// Synthetic rows used for training, capped at the real training size.
    pub synth_rows: usize,
}

/// Trains the substitute classifier for `label` on real and on synthetic
/// data and scores both on the real test set. A single-class training set
/// yields AUC 0.5 with its degenerate flag set.
pub fn downstream_auc(
    real_train: &RecordMatrix,
    real_test: &RecordMatrix,
    synth: &RecordMatrix,
    label: usize,
    classifier: ClassifierOptions,
) -> Result<DownstreamAuc> {
    check_compatible(real_train, real_test)?;
    check_compatible(real_train, synth)?;
    if !real_train.schema().binary_coordinates().contains(&label) {
        return Err(Error::InvalidArgument(format!("label coordinate {label} is not a binary column")));
    }
    let predictors = without(real_train.col_count(), label);
    let x_test = real_test.data().select_cols(&predictors);
    let y_test = labels(real_test.data(), label);
    let synth_rows = synth.row_count().min(real_train.row_count());
    let synth = synth.select_rows(&(0..synth_rows).collect::<Vec<_>>());
    let score = |train: &RecordMatrix| -> Result<(f64, bool)> {
        let x = train.data().select_cols(&predictors);
        let y = labels(train.data(), label);
        let l2 = classifier.l2.unwrap_or(1.0 / train.row_count() as f64);
        let model = logistic_fit(&x, &y, l2, classifier.max_iter)?;
        if model.degenerate {
            return Ok((0.5, true));
        }
        Ok((auc(&model.predict_proba(&x_test)?, &y_test)?, false))
    };
    let (auc_real, real_degenerate) = score(real_train)?;
    let (auc_synth, synth_degenerate) = score(&synth)?;
    Ok(DownstreamAuc {
        auc_real,
        auc_synth,
        real_degenerate,
        synth_degenerate,
        synth_rows,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::data::FeatureSchema;
    use crate::nn::RandomSource;

    fn binary(m: Matrix<f64>) -> RecordMatrix {
        let c = m.cols();
        RecordMatrix::new(m, Arc::new(FeatureSchema::all_binary(c))).unwrap()
    }

    /// Rows where column 1 copies column 0 and column 2 copies it 90% of the time.
    fn correlated(n: usize, seed: u64) -> RecordMatrix {
        let mut rng = RandomSource::new(seed);
        let mut data = Vec::with_capacity(n * 4);
        for _ in 0..n {
            let a = (rng.uniform() < 0.4) as u8 as f64;
            let c = if rng.uniform() < 0.9 { a } else { 1.0 - a };
            data.extend([a, a, c, (rng.uniform() < 0.3) as u8 as f64]);
        }
        binary(Matrix::from_vec(n, 4, data).unwrap())
    }

    /// Same prevalences as `m` but every column shuffled independently.
    fn decorrelate(m: &RecordMatrix, seed: u64) -> RecordMatrix {
        let mut rng = RandomSource::new(seed);
        let (n, c) = (m.row_count(), m.col_count());
        let mut out = m.data().clone();
        for j in 0..c {
            let perm = rng.permutation(n);
            for i in 0..n {
                out.set(i, j, m.data().get(perm[i], j));
            }
        }
        binary(out)
    }

    #[test]
    fn prevalence_examples() {
        let m = binary(Matrix::from_vec(4, 2, vec![1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0]).unwrap());
        assert_eq!(prevalence(&m).unwrap(), vec![1.0, 0.5]);
        let shuffled = m.select_rows(&[2, 0, 3, 1]);
        assert_eq!(prevalence(&shuffled).unwrap(), prevalence(&m).unwrap());
        assert!(prevalence(&RecordMatrix::empty(m.schema().clone())).is_err());
    }

    #[test]
    fn prevalence_correlation_self_and_reversed() {
        let real = correlated(500, 1);
        assert!((prevalence_correlation(&real, &real).unwrap().correlation - 1.0).abs() < 1e-12);
        let mut cols: Vec<usize> = (0..4).collect();
        cols.reverse();
        let p = prevalence(&real).unwrap();
        let reversed = binary(real.data().select_cols(&cols));
        // oracle: Pearson of p with p reversed, computed directly
        let q: Vec<f64> = p.iter().rev().copied().collect();
        let (mp, mq) = (p.iter().sum::<f64>() / 4.0, q.iter().sum::<f64>() / 4.0);
        let cov: f64 = p.iter().zip(&q).map(|(a, b)| (a - mp) * (b - mq)).sum();
        let vp: f64 = p.iter().map(|a| (a - mp).powi(2)).sum();
        let vq: f64 = q.iter().map(|b| (b - mq).powi(2)).sum();
        let expected = cov / (vp * vq).sqrt();
        let got = prevalence_correlation(&real, &reversed).unwrap();
        assert!(expected < 0.0);
        assert!((got.correlation - expected).abs() < 1e-12);
        assert_eq!(got.pairs.len(), 4);
    }

    #[test]
    fn nzc_counts() {
        let real = correlated(200, 2);
        assert_eq!(non_zero_columns(&real), 4);
        assert_eq!(non_zero_columns(&binary(Matrix::zeros(5, 3))), 0);
    }

    #[test]
    fn cmd_examples() {
        let real = correlated(2000, 3);
        assert_eq!(correlation_matrix_distance(&real, &real).unwrap(), 0.0);
        assert!(correlation_matrix_distance(&real, &decorrelate(&real, 4)).unwrap() > 0.1);

        let a = binary(Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [1.0, 1.0]]).unwrap());
        let b = binary(Matrix::from_rows(&[[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]).unwrap());
        assert!((correlation_matrix_distance(&a, &b).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn entropy_rank_prefers_balanced_columns() {
        let mut data = Vec::new();
        for i in 0..100 {
            data.extend([(i < 1) as u8 as f64, (i < 50) as u8 as f64, (i < 99) as u8 as f64]);
        }
        let m = binary(Matrix::from_vec(100, 3, data).unwrap());
        assert_eq!(entropy_ranking(&m).unwrap()[0].0, 1);
    }

    #[test]
    fn prediction_self_comparison() {
        let train = correlated(400, 5);
        let test = correlated(400, 6);
        let p = dimensionwise_prediction(&train, &test, &train, 30, ClassifierOptions::default()).unwrap();
        assert!(p.truncated);
        assert_eq!(p.tasks.len(), 4);
        for t in &p.tasks {
            assert_eq!(t.real_f1, t.synth_f1);
        }
        assert!((p.correlation.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_noise_loses_predictive_power() {
        let train = correlated(1000, 7);
        let test = correlated(1000, 8);
        let noise = decorrelate(&train, 9);
        let p = dimensionwise_prediction(&train, &test, &noise, 30, ClassifierOptions::default()).unwrap();
        let target = p.tasks.iter().find(|t| t.column == "c0").unwrap();
        assert!(target.real_f1 > 0.9, "{target:?}");
        // majority class is negative at prevalence 0.4, so a baseline scores F1 0
        assert!(target.synth_f1 < 0.6, "{target:?}");
    }

    #[test]
    fn latent_disjoint_and_identical() {
        let mut rng = RandomSource::new(10);
        let n = 200;
        let real = binary(Matrix::zeros(n, 2));
        let synth = binary(Matrix::filled(n, 2, 1.0));
        let opts = LatentOptions { fixed_k: Some(2), ..LatentOptions::default() };
        let d = latent_cluster_distance(&real, &synth, &opts, 1).unwrap();
        assert!((d.value - 0.25f64.ln()).abs() < 1e-12, "{d:?}");

        let blobs = {
            let mut v = Vec::new();
            for i in 0..n {
                let hi = if i % 2 == 0 { 0.9 } else { 0.1 };
                v.extend([hi + 0.05 * rng.uniform(), hi - 0.05 * rng.uniform()]);
            }
            binary(Matrix::from_vec(n, 2, v).unwrap())
        };
        let same = latent_cluster_distance(&blobs, &blobs, &opts, 1).unwrap();
        assert!(same.real_fractions.iter().all(|f| (f - 0.5).abs() < 1e-12));
        assert!((same.value - LATENT_LOG_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn mcad_examples() {
        let real = correlated(300, 11);
        assert_eq!(mca_distance(&real, &real, 20).unwrap(), 0.0);
        let zeros = binary(Matrix::zeros(50, 6));
        let ones = binary(Matrix::filled(50, 6, 1.0));
        assert_eq!(mca_distance(&zeros, &ones, 20).unwrap(), 1.0);
        assert!(mca_distance(&zeros, &binary(Matrix::zeros(49, 6)), 20).is_err());
    }

    #[test]
    fn auc_fixed_points() {
        let train = correlated(600, 12);
        let test = correlated(600, 13);
        let a = downstream_auc(&train, &test, &train, 0, ClassifierOptions::default()).unwrap();
        assert_eq!(a.auc_real, a.auc_synth);
        assert!(a.auc_real > 0.9);

        let mut rng = RandomSource::new(14);
        let n = 2000;
        let noise = |rng: &mut RandomSource| {
            binary(Matrix::from_vec(n, 4, (0..n * 4).map(|_| (rng.uniform() < 0.5) as u8 as f64).collect()).unwrap())
        };
        let (tr, te, sy) = (noise(&mut rng), noise(&mut rng), noise(&mut rng));
        let a = downstream_auc(&tr, &te, &sy, 0, ClassifierOptions::default()).unwrap();
        assert!((a.auc_real - 0.5).abs() < 0.05, "{a:?}");
        assert!((a.auc_synth - 0.5).abs() < 0.05, "{a:?}");

        let single = binary(Matrix::zeros(20, 4));
        let d = downstream_auc(&train, &test, &single, 0, ClassifierOptions::default()).unwrap();
        assert!(d.synth_degenerate);
        assert_eq!(d.auc_synth, 0.5);
    }
}
