use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::{Matrix, RandomSource};

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterResult {
    pub k: usize,
    pub assignments: Vec<usize>,
    /// Sum of squared distances from each point to its assigned center.
    pub inertia: f64,
    /// `k x d`.
    pub centers: Matrix<f64>,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding: first center uniform, the rest drawn proportional to
/// squared distance from the nearest chosen center.
fn seed_centers(x: &Matrix<f64>, k: usize, rng: &mut RandomSource) -> Matrix<f64> {
    let n = x.rows();
    let mut centers = Vec::with_capacity(k);
    let first = rng.below(n);
    centers.push(first);
    let mut nearest: Vec<f64> = x.row_iter().map(|r| sq_dist(r, x.row(first))).collect();
    while centers.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                acc += d;
                if acc > target && *d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.below(n)
        };
        centers.push(pick);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), x.row(pick)));
        }
    }
    x.select_rows(&centers)
}

/// Assigns each point to its nearest center (lowest index on ties).
/// Returns (assignments, per-point squared distance).
fn assign(x: &Matrix<f64>, centers: &Matrix<f64>) -> (Vec<usize>, Vec<f64>) {
    x.row_iter()
        .map(|row| {
            let mut best = (0, f64::INFINITY);
            for (c, center) in centers.row_iter().enumerate() {
                let d = sq_dist(row, center);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .unzip()
}

/// Lloyd's algorithm from a k-means++ seeding.
///
/// A cluster that loses all its points is re-seeded at the point farthest from
/// its current center. Inertia never increases from one iteration to the next.
pub fn kmeans(x: &Matrix<f64>, k: usize, seed: u64, max_iter: usize) -> Result<ClusterResult> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cannot form {k} clusters from {n} points")));
    }
    let d = x.cols();
    let mut rng = RandomSource::new(seed);
    let mut centers = seed_centers(x, k, &mut rng);
    let (mut assignments, mut dists) = assign(x, &centers);
    let mut inertia: f64 = dists.iter().sum();
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let mut sums = Matrix::<f64>::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (row, &a) in x.row_iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums.row_mut(a).iter_mut().zip(row) {
                *s += v;
            }
        }
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centers.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            } else {
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("k <= n leaves a free point");
                taken[far] = true;
                centers.row_mut(c).copy_from_slice(x.row(far));
            }
        }
        let (next, next_dists) = assign(x, &centers);
        let next_inertia: f64 = next_dists.iter().sum();
        debug_assert!(
            next_inertia <= inertia * (1.0 + 1e-9) + 1e-12,
            "inertia rose from {inertia} to {next_inertia}"
        );
        let changed = next != assignments;
        assignments = next;
        dists = next_dists;
        inertia = next_inertia;
        if !changed {
            break;
        }
    }
    Ok(ClusterResult {
        k,
        assignments,
        inertia,
        centers,
        iterations,
    })
}

/// Restarts per K in [`elbow_select`]; the lowest-inertia run is kept.
const ELBOW_RESTARTS: u64 = 3;
const ELBOW_MAX_ITER: usize = 300;

/// Best-of-restarts clustering at each `k`, evaluated in parallel.
pub fn inertia_curve(x: &Matrix<f64>, k_range: &[usize], seed: u64) -> Result<Vec<ClusterResult>> {
    k_range
        .par_iter()
        .map(|&k| {
            let mut best: Option<ClusterResult> = None;
            for r in 0..ELBOW_RESTARTS {
                let run_seed = seed
                    .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                    .wrapping_add((k as u64) << 8 | r);
                let res = kmeans(x, k, run_seed, ELBOW_MAX_ITER)?;
                if best.as_ref().is_none_or(|b| res.inertia < b.inertia) {
                    best = Some(res);
                }
            }
            Ok(best.expect("at least one restart"))
        })
        .collect()
}

/// Picks the K with the largest second difference of inertia
/// `I(k-1) - 2 I(k) + I(k+1)` over the interior of `k_range`.
pub fn elbow_select(x: &Matrix<f64>, k_range: &[usize], seed: u64) -> Result<usize> {
    check_range(k_range)?;
    elbow_from_curve(k_range, &inertia_curve(x, k_range, seed)?)
}

fn check_range(k_range: &[usize]) -> Result<()> {
    if k_range.len() < 3 || k_range.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "elbow search needs an ascending range of at least 3 values".into(),
        ));
    }
    Ok(())
}

pub(crate) fn elbow_from_curve(k_range: &[usize], curve: &[ClusterResult]) -> Result<usize> {
    check_range(k_range)?;
    let inertia: Vec<f64> = curve.iter().map(|c| c.inertia).collect();
    let mut best = (k_range[1], f64::NEG_INFINITY);
    for i in 1..k_range.len() - 1 {
        let bend = inertia[i - 1] - 2.0 * inertia[i] + inertia[i + 1];
        if bend > best.1 {
            best = (k_range[i], bend);
        }
    }
    Ok(best.0)
}
