use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Binary logistic regression `P(y = 1 | x) = sigmoid(w . x + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    /// Regularized mean negative log-likelihood at the returned parameters.
    pub objective: f64,
    /// Set when the training labels held a single class; the model then
    /// predicts a constant probability.
    pub degenerate: bool,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticModel {
    fn scores(&self, x: &Matrix<f64>) -> Vec<f64> {
        x.row_iter()
            .map(|row| row.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>() + self.intercept)
            .collect()
    }

    pub fn predict_proba(&self, x: &Matrix<f64>) -> Result<Vec<f64>> {
        if x.cols() != self.weights.len() {
            return Err(Error::shape(format!(
                "model has {} weights, input has {} features",
                self.weights.len(),
                x.cols()
            )));
        }
        Ok(self.scores(x).into_iter().map(sigmoid).collect())
    }

    /// Class predictions at probability threshold 0.5.
    pub fn predict(&self, x: &Matrix<f64>) -> Result<Vec<bool>> {
        Ok(self.predict_proba(x)?.into_iter().map(|p| p >= 0.5).collect())
    }
}

struct Problem<'a> {
    x: &'a Matrix<f64>,
    y: &'a [bool],
    l2: f64,
}

impl Problem<'_> {
    /// Objective and gradient (weights..., intercept) at `theta`.
    fn eval(&self, theta: &[f64], want_grad: bool) -> (f64, Vec<f64>) {
        let d = self.x.cols();
        let n = self.x.rows() as f64;
        let (w, b) = theta.split_at(d);
        let mut obj = 0.0;
        let mut grad = if want_grad { vec![0.0; d + 1] } else { Vec::new() };
        for (row, &label) in self.x.row_iter().zip(self.y) {
            let z = row.iter().zip(w).map(|(a, w)| a * w).sum::<f64>() + b[0];
            let yv = if label { 1.0 } else { 0.0 };
            obj += softplus(z) - yv * z;
            if want_grad {
                let r = sigmoid(z) - yv;
                for (g, a) in grad[..d].iter_mut().zip(row) {
                    *g += r * a;
                }
                grad[d] += r;
            }
        }
        obj /= n;
        obj += 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>();
        if want_grad {
            for g in &mut grad {
                *g /= n;
            }
            for (g, wv) in grad[..d].iter_mut().zip(w) {
                *g += self.l2 * wv;
            }
        }
        (obj, grad)
    }
}

const GRAD_TOL: f64 = 1e-6;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

/// Fits by full-batch gradient descent with backtracking line search on the
/// L2-regularized mean negative log-likelihood (intercept unpenalized).
///
/// Single-class labels yield a constant model with `degenerate` set rather
/// than an error.
pub fn logistic_fit(x: &Matrix<f64>, y: &[bool], l2: f64, max_iter: usize) -> Result<LogisticModel> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::shape(format!("{n} rows but {} labels", y.len())));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("logistic regression needs at least 2 rows".into()));
    }
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(Error::InvalidArgument(format!("l2 must be non-negative, got {l2}")));
    }
    let positives = y.iter().filter(|&&v| v).count();
    if positives == 0 || positives == n {
        // smoothed class frequency keeps the intercept finite
        let p = (positives as f64 + 0.5) / (n as f64 + 1.0);
        return Ok(LogisticModel {
            weights: vec![0.0; d],
            intercept: (p / (1.0 - p)).ln(),
            iterations: 0,
            objective: 0.0,
            degenerate: true,
        });
    }
    let problem = Problem { x, y, l2 };
    let mut theta = vec![0.0; d + 1];
    let (mut obj, mut grad) = problem.eval(&theta, true);
    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < max_iter {
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2.sqrt() < GRAD_TOL {
            break;
        }
        let mut accepted = false;
        while step >= MIN_STEP {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
            let (trial_obj, _) = problem.eval(&trial, false);
            if trial_obj <= obj - ARMIJO * step * gnorm2 {
                debug_assert!(trial_obj <= obj);
                theta = trial;
                obj = trial_obj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        iterations += 1;
        grad = problem.eval(&theta, true).1;
        step = (step * 2.0).min(1e6);
    }
    let intercept = theta.pop().expect("intercept slot");
    Ok(LogisticModel {
        weights: theta,
        intercept,
        iterations,
        objective: obj,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::RandomSource;

    #[test]
    fn separable_direction() {
        let x = Matrix::from_vec(6, 1, vec![-3.0, -2.0, -1.0, 1.0, 2.0, 3.0]).unwrap();
        let up = [false, false, false, true, true, true];
        let m = logistic_fit(&x, &up, 0.1, 500).unwrap();
        assert!(m.weights[0] > 0.0);
        assert_eq!(m.predict(&x).unwrap(), up.to_vec());
        let down: Vec<bool> = up.iter().map(|v| !v).collect();
        assert!(logistic_fit(&x, &down, 0.1, 500).unwrap().weights[0] < 0.0);
    }

    #[test]
    fn independent_labels_give_small_parameters() {
        let mut rng = RandomSource::new(31);
        let n = 2000;
        let x: Matrix<f64> = rng.gaussian_batch(n, 3);
        let y: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
        let m = logistic_fit(&x, &y, 1.0, 500).unwrap();
        assert!(m.intercept.abs() < 0.1);
        assert!(m.weights.iter().all(|w| w.abs() < 0.1), "{:?}", m.weights);
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = Matrix::from_vec(4, 2, vec![0.0, 1.0, 1.0, 0.0, 0.5, 0.5, 1.0, 1.0]).unwrap();
        let m = logistic_fit(&x, &[true; 4], 0.25, 500).unwrap();
        assert!(m.degenerate);
        assert!(m.predict_proba(&x).unwrap().iter().all(|p| *p > 0.85));
        assert!(m.predict(&x).unwrap().iter().all(|p| *p));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = RandomSource::new(2);
        let x: Matrix<f64> = rng.gaussian_batch(30, 3);
        let y: Vec<bool> = (0..30).map(|_| rng.uniform() < 0.4).collect();
        let p = Problem { x: &x, y: &y, l2: 0.3 };
        let theta = [0.2, -0.4, 0.7, 0.1];
        let (_, g) = p.eval(&theta, true);
        for k in 0..4 {
            let h = 1e-6;
            let mut a = theta;
            let mut b = theta;
            a[k] += h;
            b[k] -= h;
            let fd = (p.eval(&a, false).0 - p.eval(&b, false).0) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7, "coord {k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn errors() {
        let x = Matrix::<f64>::zeros(3, 2);
        assert!(logistic_fit(&x, &[true, false], 0.1, 10).is_err());
        assert!(logistic_fit(&Matrix::zeros(1, 2), &[true], 0.1, 10).is_err());
        assert!(logistic_fit(&x, &[true, false, true], -1.0, 10).is_err());
        let m = logistic_fit(&x, &[true, false, true], 0.1, 10).unwrap();
        assert!(m.predict(&Matrix::zeros(1, 3)).is_err());
    }
}
