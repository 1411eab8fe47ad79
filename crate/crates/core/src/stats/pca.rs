use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Principal axes of a data set, strongest first.
#[derive(Clone, Debug)]
pub struct Pca {
    /// `d x d`, one orthonormal component per row.
    pub components: Matrix<f64>,
    /// Sample-covariance eigenvalue of each component, descending, non-negative.
    pub explained_variance: Vec<f64>,
    pub mean: Vec<f64>,
}

/// Eigendecomposition of the sample covariance (divisor `N - 1`).
///
/// Each component's sign is fixed so its largest-magnitude coordinate is
/// positive, which makes projections reproducible.
pub fn pca_fit(x: &Matrix<f64>) -> Result<Pca> {
    let (n, d) = (x.rows(), x.cols());
    if n < 2 {
        return Err(Error::InvalidArgument("PCA needs at least 2 rows".into()));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| x.row_iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut centered = x.clone();
    for r in 0..n {
        for (v, m) in centered.row_mut(r).iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let scatter = centered.t_matmul(&centered)?;
    let cov = DMatrix::from_row_slice(d, d, scatter.as_slice()) / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut components = Matrix::zeros(d, d);
    let mut explained_variance = Vec::with_capacity(d);
    for (row, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let pivot = (0..d)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
            .expect("d > 0 when called with columns");
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            components.set(row, j, sign * v[j]);
        }
        explained_variance.push(eig.eigenvalues[k].max(0.0));
    }
    Ok(Pca {
        components,
        explained_variance,
        mean,
    })
}

impl Pca {
    /// Smallest `k` whose leading components explain at least `fraction` of the
    /// total variance, capped at `max_k` (and at least 1).
    pub fn components_for_variance(&self, fraction: f64, max_k: usize) -> usize {
        let total: f64 = self.explained_variance.iter().sum();
        let cap = max_k.min(self.explained_variance.len()).max(1);
        if total <= 0.0 {
            return 1;
        }
        let mut acc = 0.0;
        for (i, v) in self.explained_variance.iter().enumerate() {
            acc += v;
            if acc / total >= fraction - 1e-12 {
                return (i + 1).min(cap);
            }
        }
        cap
    }

    /// Coordinates of `x` on the first `k` components.
    pub fn transform(&self, x: &Matrix<f64>, k: usize) -> Result<Matrix<f64>> {
        let d = self.mean.len();
        if x.cols() != d {
            return Err(Error::shape(format!("PCA fitted on {d} features, got {}", x.cols())));
        }
        if k > d {
            return Err(Error::shape(format!("requested {k} of {d} components")));
        }
        let mut centered = x.clone();
        for r in 0..x.rows() {
            for (v, m) in centered.row_mut(r).iter_mut().zip(&self.mean) {
                *v -= m;
            }
        }
        let basis = self.components.select_rows(&(0..k).collect::<Vec<_>>());
        centered.matmul_t(&basis)
    }

    /// Maps `k`-dimensional coordinates back to feature space (mean added back).
    pub fn inverse_transform(&self, z: &Matrix<f64>) -> Result<Matrix<f64>> {
        let k = z.cols();
        let basis = self.components.select_rows(&(0..k).collect::<Vec<_>>());
        let mut x = z.matmul(&basis)?;
        for r in 0..x.rows() {
            for (v, m) in x.row_mut(r).iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(x)
    }
}
