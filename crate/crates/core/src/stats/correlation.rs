use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Product-moment correlation; 0 when either input has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("lengths {} and {} differ", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument("correlation needs at least 2 points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(0.0);
    }
    // one root of the product keeps pearson(x, x) exactly 1
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// `-p ln p - (1 - p) ln(1 - p)`, with `0 ln 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.ln() };
    term(p) + term(1.0 - p)
}

/// `C x C` matrix of column correlations under the zero-variance convention.
/// The diagonal is 1 for varying columns and 0 for constant ones.
pub fn correlation_matrix(data: &Matrix<f64>) -> Matrix<f64> {
    let (n, c) = (data.rows(), data.cols());
    let mut out = Matrix::zeros(c, c);
    if n < 2 {
        return out;
    }
    let means: Vec<f64> = (0..c)
        .map(|j| data.row_iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut centered = data.clone();
    for r in 0..n {
        for (v, m) in centered.row_mut(r).iter_mut().zip(&means) {
            *v -= m;
        }
    }
    let cov = centered.t_matmul(&centered).expect("square by construction");
    let sd: Vec<f64> = (0..c).map(|j| cov.get(j, j).sqrt()).collect();
    for i in 0..c {
        for j in 0..c {
            let v = if sd[i] == 0.0 || sd[j] == 0.0 {
                0.0
            } else {
                (cov.get(i, j) / (sd[i] * sd[j])).clamp(-1.0, 1.0)
            };
            out.set(i, j, v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson(&[3.0; 4], &x).unwrap(), 0.0);
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn entropy_values() {
        assert!((binary_entropy(0.5) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        for p in [0.013, 0.2, 0.37, 0.81] {
            assert!((binary_entropy(p) - binary_entropy(1.0 - p)).abs() < 1e-15);
        }
    }

    #[test]
    fn correlation_matrix_agrees_with_pearson() {
        let data = Matrix::from_rows(&[
            [1.0, 0.0, 1.0, 0.5],
            [0.0, 1.0, 1.0, 0.5],
            [1.0, 1.0, 1.0, 0.5],
            [0.0, 0.0, 1.0, 0.5],
            [1.0, 0.0, 1.0, 0.5],
        ])
        .unwrap();
        let m = correlation_matrix(&data);
        for i in 0..4 {
            for j in 0..4 {
                let p = pearson(&data.column(i), &data.column(j)).unwrap();
                let expect = if i == j && p == 0.0 && data.column(i).iter().all(|v| *v == data.get(0, i)) {
                    0.0
                } else {
                    p
                };
                assert!((m.get(i, j) - expect).abs() < 1e-12, "({i},{j})");
            }
        }
        assert!((m.get(0, 0) - 1.0).abs() < 1e-12);
        assert_eq!(m.get(2, 2), 0.0);
    }
}
