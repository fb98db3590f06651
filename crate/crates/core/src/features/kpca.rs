use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::{dot, Scalar};

use super::pca::Retain;

/// Eigenvalues at or below this fraction of the largest are discarded.
pub const EIGEN_FLOOR: f64 = 1e-10;

/// Double-centered Gram matrix `K' = K - 1K - K1 + 1K1`, `1` the all-`1/n`
/// matrix. Also returns the Gram column means and grand mean.
pub fn centered_gram<T: Scalar>(k: &Matrix<T>) -> (Matrix<T>, Vec<T>, T) {
    let n = k.rows();
    let nn = T::from_usize_lossy(n.max(1));
    let col_means: Vec<T> = (0..n)
        .map(|j| (0..n).map(|i| k[(i, j)]).sum::<T>() / nn)
        .collect();
    let grand = col_means.iter().copied().sum::<T>() / nn;
    let mut c = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] = k[(i, j)] - col_means[i] - col_means[j] + grand;
        }
    }
    (c, col_means, grand)
}

/// RBF kernel PCA.
#[derive(Debug, Clone, PartialEq)]
pub struct KpcaModel<T> {
    pub train: Matrix<T>,
    pub gamma: T,
    /// Retained eigenvalues of the centered Gram matrix, descending.
    pub eigenvalues: Vec<T>,
    /// Eigenvectors of the centered Gram matrix scaled by `1/sqrt(lambda)`.
    pub alphas: Vec<Vec<T>>,
    pub gram_col_means: Vec<T>,
    pub gram_mean: T,
    pub retained_k: usize,
}

impl<T: Scalar> KpcaModel<T> {
    pub fn fit(x: &Matrix<T>, gamma: T, retain: Retain) -> Result<Self> {
        let n = x.rows();
        if n < 2 {
            return Err(Error::InvalidParameter(format!("KPCA needs n >= 2 rows, got {n}")));
        }
        let kernel = Kernel::rbf(gamma)?;
        let gram = kernel.gram(x);
        let (centered, gram_col_means, gram_mean) = centered_gram(&gram);
        let eig = symmetric_eigen(&centered)?;

        let largest = eig.values.first().copied().unwrap_or(T::zero());
        let floor = T::lit(EIGEN_FLOOR) * largest;
        let positive: Vec<T> = eig
            .values
            .iter()
            .copied()
            .take_while(|&l| l > floor && l > T::zero())
            .collect();
        if positive.is_empty() {
            return Err(Error::RankDeficient(
                "centered Gram matrix has no eigenvalue above the numerical floor".into(),
            ));
        }
        let k = match retain {
            Retain::Components(k) if k > positive.len() => {
                return Err(Error::InvalidParameter(format!(
                    "requested {k} components, only {} above the floor",
                    positive.len()
                )))
            }
            r => r.count(&positive)?,
        };
        let alphas = eig.vectors[..k]
            .iter()
            .zip(&positive)
            .map(|(v, &l)| {
                let s = l.sqrt();
                v.iter().map(|&x| x / s).collect()
            })
            .collect();
        Ok(Self {
            train: x.clone(),
            gamma,
            eigenvalues: positive[..k].to_vec(),
            alphas,
            gram_col_means,
            gram_mean,
            retained_k: k,
        })
    }

    pub fn dim(&self) -> usize {
        self.train.cols()
    }

    /// Kernel row against the training set, centered with the training statistics.
    pub fn centered_kernel_row(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let kernel = Kernel::Rbf { gamma: self.gamma };
        let row: Vec<T> = self.train.iter_rows().map(|t| kernel.eval(x, t)).collect();
        let row_mean = crate::scalar::mean(&row);
        Ok(row
            .iter()
            .zip(&self.gram_col_means)
            .map(|(&k, &cm)| k - row_mean - cm + self.gram_mean)
            .collect())
    }

    pub fn transform_row(&self, x: &[T]) -> Result<Vec<T>> {
        let kc = self.centered_kernel_row(x)?;
        Ok(self.alphas.iter().map(|a| dot(a, &kc)).collect())
    }

    pub fn transform(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut out = Matrix::zeros(x.rows(), self.retained_k);
        for (i, r) in x.iter_rows().enumerate() {
            out.row_mut(i).copy_from_slice(&self.transform_row(r)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_gamma_degenerates() {
        let x = Matrix::<f64>::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let k = Kernel::Rbf { gamma: 1e-300 }.gram(&x);
        let (c, _, _) = centered_gram(&k);
        assert!(c.as_slice().iter().all(|v| v.abs() < 1e-15));
        assert!(KpcaModel::fit(&x, 1e-300, Retain::default()).is_err());
    }

    #[test]
    fn non_positive_gamma_rejected() {
        let x = Matrix::<f64>::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(KpcaModel::fit(&x, 0.0, Retain::default()).is_err());
        assert!(KpcaModel::fit(&x, -1.0, Retain::default()).is_err());
    }

    #[test]
    fn training_transform_matches_scaled_eigenvectors() {
        let x = Matrix::<f64>::from_rows(&[[0.0, 1.0], [1.0, 0.5], [2.0, 2.0], [0.5, -1.0]]).unwrap();
        let m = KpcaModel::fit(&x, 0.5, Retain::Variance(1.0)).unwrap();
        let s = m.transform(&x).unwrap();
        // score_k(x_i) = sqrt(lambda_k) * v_k[i]
        for k in 0..m.retained_k {
            let l = m.eigenvalues[k];
            for i in 0..x.rows() {
                let v = m.alphas[k][i] * l.sqrt();
                assert!((s[(i, k)] - l.sqrt() * v).abs() < 1e-12);
            }
        }
    }
}
