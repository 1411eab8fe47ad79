use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    /// `M + 1` ascending bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// `M` equal-width bins over `[lo, hi]`; values at or beyond the ends land in
/// the edge bins.
pub fn fixed_histogram(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("bad histogram range [{lo}, {hi}]")));
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + i as f64 * width })
        .collect();
    let mut counts = vec![0u64; bins];
    for &v in values {
        let pos = ((v - lo) / width).floor();
        let idx = if pos.is_nan() || pos < 0.0 {
            0
        } else {
            (pos as usize).min(bins - 1)
        };
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}
