use rayon::prelude::*;
use serde::Serialize;

use super::utility::{check_compatible, prevalence};
use crate::data::RecordMatrix;
use crate::error::{Error, Result};
use crate::stats::{f1_score, Confusion};

/// Default size of the attacker's known feature set.
pub const DEFAULT_KNOWN_FEATURES: usize = 256;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct AttributeRisk {
    pub f1: f64,
    pub known_features: usize,
    pub unknown_features: usize,
    /// The known set is smaller than requested.
    pub truncated: bool,
}

/// Index of the nearest row of `candidates` by squared Euclidean distance over
/// `coords`; the lowest index wins ties.
fn nearest(query: &[f64], candidates: &RecordMatrix, coords: &[usize]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, row) in candidates.data().row_iter().enumerate() {
        let mut d = 0.0;
        for &c in coords {
            let diff = query[c] - row[c];
            d += diff * diff;
            if d >= best.1 {
                break;
            }
        }
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Attribute inference by a 1-nearest-neighbour attacker.
///
/// The attacker knows the `known` most prevalent binary columns of every
/// training record, finds the closest synthetic record on those, and copies
/// its remaining binary columns. Returns micro-averaged F1 over all guesses.
pub fn attribute_inference_risk(
    real_train: &RecordMatrix,
    synth: &RecordMatrix,
    known: usize,
) -> Result<AttributeRisk> {
    check_compatible(real_train, synth)?;
    if synth.row_count() == 0 {
        return Err(Error::InvalidArgument("attribute inference needs synthetic records".into()));
    }
    let binary = real_train.schema().binary_coordinates();
    if binary.len() < 2 {
        return Err(Error::InvalidArgument(
            "attribute inference needs at least 2 binary columns".into(),
        ));
    }
    let prev = prevalence(real_train)?;
    let mut ranked = binary.clone();
    ranked.sort_by(|&a, &b| prev[b].total_cmp(&prev[a]));
    let known_count = known.min(binary.len() - 1);
    let known_coords = &ranked[..known_count];
    let mut unknown_coords = ranked[known_count..].to_vec();
    unknown_coords.sort_unstable();

    let confusion = real_train
        .data()
        .as_slice()
        .par_chunks(real_train.col_count().max(1))
        .map(|row| {
            let (j, _) = nearest(row, synth, known_coords);
            let guess = synth.data().row(j);
            let mut c = Confusion::default();
            for &u in &unknown_coords {
                c.add(guess[u] >= 0.5, row[u] >= 0.5);
            }
            c
        })
        .reduce(Confusion::default, Confusion::merge);
    Ok(AttributeRisk {
        f1: confusion.f1(),
        known_features: known_count,
        unknown_features: unknown_coords.len(),
        truncated: known_count < known,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThresholdRule {
    /// Median of the pooled minimum distances.
    Median,
    Constant(f64),
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct MembershipRisk {
    pub f1: f64,
    pub threshold: f64,
    pub members: usize,
    pub non_members: usize,
}

/// Minimum Euclidean distance from each row of `pool` to any row of `synth`.
pub fn min_distances(pool: &RecordMatrix, synth: &RecordMatrix) -> Vec<f64> {
    let all: Vec<usize> = (0..pool.col_count()).collect();
    pool.data()
        .as_slice()
        .par_chunks(pool.col_count().max(1))
        .map(|row| nearest(row, synth, &all).1.sqrt())
        .collect()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Distance-threshold membership attack over the pooled training subset and
/// test records: a record is called a member iff its distance to the closest
/// synthetic record is strictly below the threshold.
pub fn membership_inference_risk(
    train_subset: &RecordMatrix,
    real_test: &RecordMatrix,
    synth: &RecordMatrix,
    rule: ThresholdRule,
) -> Result<MembershipRisk> {
    check_compatible(train_subset, real_test)?;
    check_compatible(train_subset, synth)?;
    if train_subset.row_count() == 0 || real_test.row_count() == 0 || synth.row_count() == 0 {
        return Err(Error::InvalidArgument("membership inference needs non-empty sets".into()));
    }
    let mut dist = min_distances(train_subset, synth);
    dist.extend(min_distances(real_test, synth));
    let threshold = match rule {
        ThresholdRule::Median => median(&dist),
        ThresholdRule::Constant(t) => t,
    };
    let predicted: Vec<bool> = dist.iter().map(|&d| d < threshold).collect();
    let actual: Vec<bool> = (0..dist.len()).map(|i| i < train_subset.row_count()).collect();
    Ok(MembershipRisk {
        f1: f1_score(&predicted, &actual)?,
        threshold,
        members: train_subset.row_count(),
        non_members: real_test.row_count(),
    })
}
