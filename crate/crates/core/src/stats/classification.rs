use crate::error::{Error, Result};

/// Confusion counts for the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn from_predictions(pred: &[bool], truth: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (&p, &t) in pred.iter().zip(truth) {
            c.add(p, t);
        }
        c
    }

    #[inline]
    pub fn add(&mut self, pred: bool, truth: bool) {
        match (pred, truth) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, true) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn merge(self, other: Confusion) -> Confusion {
        Confusion {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }

    /// `2TP / (2TP + FP + FN)`, which is 0 whenever precision + recall is 0.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if self.tp == 0 || denom == 0 {
            0.0
        } else {
            (2 * self.tp) as f64 / denom as f64
        }
    }
}

/// F1 of the positive class.
pub fn f1_score(pred: &[bool], truth: &[bool]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    Ok(Confusion::from_predictions(pred, truth).f1())
}

/// Area under the ROC curve as the Mann-Whitney statistic: the probability
/// that a random positive outscores a random negative, ties counting half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // midranks over tie groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += mid_rank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok((u / (n_pos as f64 * n_neg as f64)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(v: &[u8]) -> Vec<bool> {
        v.iter().map(|&x| x == 1).collect()
    }

    #[test]
    fn f1_identities() {
        assert_eq!(f1_score(&b(&[1, 0, 1]), &b(&[1, 0, 1])).unwrap(), 1.0);
        assert_eq!(f1_score(&b(&[0, 0, 0]), &b(&[1, 0, 1])).unwrap(), 0.0);
        // TP=1, FP=1, FN=1
        assert_eq!(f1_score(&b(&[1, 1, 0, 0]), &b(&[1, 0, 1, 0])).unwrap(), 0.5);
        assert_eq!(f1_score(&b(&[0, 0]), &b(&[0, 0])).unwrap(), 0.0);
        assert!(f1_score(&b(&[0]), &b(&[0, 1])).is_err());
    }

    #[test]
    fn auc_examples() {
        let labels = b(&[0, 0, 1, 1]);
        assert_eq!(auc(&[0.0, 0.0, 1.0, 1.0], &labels).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 4], &labels).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.4, 0.35, 0.8], &labels).unwrap(), 0.75);
        assert!(matches!(auc(&[0.1, 0.2], &b(&[1, 1])), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn auc_matches_pair_enumeration() {
        let scores = [0.2, 0.2, 0.5, 0.1, 0.9, 0.5, 0.5, 0.3];
        let labels = b(&[1, 0, 1, 0, 1, 0, 0, 1]);
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..8 {
            for j in 0..8 {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        assert!((auc(&scores, &labels).unwrap() - wins / pairs).abs() < 1e-15);
    }
}
