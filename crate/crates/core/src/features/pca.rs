use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::{dot, Scalar};

pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.95;

/// How many components a fitted projection keeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Retain {
    /// Smallest `k` whose cumulative explained variance reaches the fraction.
    Variance(f64),
    Components(usize),
}

impl Default for Retain {
    fn default() -> Self {
        Retain::Variance(DEFAULT_VARIANCE_THRESHOLD)
    }
}

impl Retain {
    /// Applies the rule to non-negative eigenvalues sorted descending.
    pub(crate) fn count<T: Scalar>(&self, eigenvalues: &[T]) -> Result<usize> {
        let d = eigenvalues.len();
        match *self {
            Retain::Components(k) => {
                if k == 0 || k > d {
                    return Err(Error::InvalidParameter(format!(
                        "cannot retain {k} of {d} components"
                    )));
                }
                Ok(k)
            }
            Retain::Variance(frac) => {
                if !(frac > 0.0 && frac <= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "variance threshold {frac} outside (0, 1]"
                    )));
                }
                let total: T = eigenvalues.iter().copied().sum();
                if total <= T::zero() {
                    return Ok(1.min(d));
                }
                let target = T::lit(frac) * total;
                let mut acc = T::zero();
                for (k, &l) in eigenvalues.iter().enumerate() {
                    acc += l;
                    // relative slack so that frac = 1.0 is reachable despite rounding
                    if acc >= target * (T::one() - T::epsilon() * T::lit(16.0)) {
                        return Ok(k + 1);
                    }
                }
                Ok(d)
            }
        }
    }
}

/// Principal component projection fitted on mean-centered data.
///
/// The covariance uses the population divisor `n`, so the variance of the
/// training scores along component `k` equals `eigenvalues[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel<T> {
    pub mean: Vec<T>,
    /// All `d` unit components, ordered by descending eigenvalue.
    pub components: Vec<Vec<T>>,
    pub eigenvalues: Vec<T>,
    pub retained_k: usize,
}

impl<T: Scalar> PcaModel<T> {
    pub fn fit(x: &Matrix<T>, retain: Retain) -> Result<Self> {
        let (n, d) = (x.rows(), x.cols());
        if n < 2 {
            return Err(Error::InvalidParameter(format!("PCA needs n >= 2 rows, got {n}")));
        }
        if d == 0 {
            return Err(Error::Empty("PCA input has no columns".into()));
        }
        let nn = T::from_usize_lossy(n);
        let mut mean = vec![T::zero(); d];
        for r in x.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nn);

        let mut cov = Matrix::<T>::zeros(d, d);
        for r in x.iter_rows() {
            for i in 0..d {
                let ci = r[i] - mean[i];
                for j in 0..=i {
                    cov[(i, j)] += ci * (r[j] - mean[j]);
                }
            }
        }
        for i in 0..d {
            for j in 0..=i {
                let v = cov[(i, j)] / nn;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }

        let eig = symmetric_eigen(&cov)?;
        let eigenvalues: Vec<T> = eig.values.iter().map(|&l| l.max(T::zero())).collect();
        let retained_k = retain.count(&eigenvalues)?;
        Ok(Self {
            mean,
            components: eig.vectors,
            eigenvalues,
            retained_k,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn explained_variance_ratio(&self) -> Vec<T> {
        let total: T = self.eigenvalues.iter().copied().sum();
        if total <= T::zero() {
            return vec![T::zero(); self.eigenvalues.len()];
        }
        self.eigenvalues.iter().map(|&l| l / total).collect()
    }

    pub fn with_retained(mut self, k: usize) -> Result<Self> {
        self.retained_k = Retain::Components(k).count(&self.eigenvalues)?;
        Ok(self)
    }

    pub fn transform_row(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let centered: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        Ok(self.components[..self.retained_k]
            .iter()
            .map(|c| dot(c, &centered))
            .collect())
    }

    pub fn transform(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        let mut out = Matrix::zeros(x.rows(), self.retained_k);
        for (i, r) in x.iter_rows().enumerate() {
            out.row_mut(i).copy_from_slice(&self.transform_row(r)?);
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, scores: &Matrix<T>) -> Result<Matrix<T>> {
        if scores.cols() != self.retained_k {
            return Err(Error::DimensionMismatch {
                expected: self.retained_k,
                got: scores.cols(),
            });
        }
        let d = self.dim();
        let mut out = Matrix::zeros(scores.rows(), d);
        for (i, s) in scores.iter_rows().enumerate() {
            let row = out.row_mut(i);
            row.copy_from_slice(&self.mean);
            for (k, &sk) in s.iter().enumerate() {
                for j in 0..d {
                    row[j] += sk * self.components[k][j];
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_have_rank_one() {
        let x = Matrix::<f64>::from_rows(&[[0.0, 0.0], [1.0, 2.0], [2.0, 4.0], [3.0, 6.0]]).unwrap();
        let p = PcaModel::fit(&x, Retain::default()).unwrap();
        let r = p.explained_variance_ratio();
        assert!((r[0] - 1.0).abs() < 1e-12);
        assert!(p.eigenvalues[1].abs() < 1e-12);
        assert_eq!(p.retained_k, 1);
        let s = 1.0 / 5f64.sqrt();
        assert!((p.components[0][0] - s).abs() < 1e-12 && (p.components[0][1] - 2.0 * s).abs() < 1e-12);
    }

    #[test]
    fn isotropic_square_has_equal_ratios() {
        let x = Matrix::<f64>::from_rows(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]).unwrap();
        let p = PcaModel::fit(&x, Retain::default()).unwrap();
        let r = p.explained_variance_ratio();
        assert!((r[0] - 0.5).abs() < 1e-12 && (r[1] - 0.5).abs() < 1e-12);
        assert_eq!(p.retained_k, 2);
    }

    #[test]
    fn single_row_rejected() {
        let x = Matrix::<f64>::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(PcaModel::fit(&x, Retain::default()).is_err());
    }

    #[test]
    fn retain_rules() {
        let ev = [3.0, 1.0, 0.0];
        assert_eq!(Retain::Variance(0.75).count(&ev).unwrap(), 1);
        assert_eq!(Retain::Variance(0.76).count(&ev).unwrap(), 2);
        assert_eq!(Retain::Variance(1.0).count(&ev).unwrap(), 2);
        assert!(Retain::Components(4).count(&ev).is_err());
        assert!(Retain::Variance(0.0).count(&ev).is_err());
    }

    #[test]
    fn full_rank_reconstruction() {
        let x = Matrix::<f64>::from_rows(&[[1.0, 2.0, 0.5], [0.3, -1.0, 2.0], [4.0, 0.0, 1.0], [2.0, 2.0, 2.0]]).unwrap();
        let p = PcaModel::fit(&x, Retain::Components(3)).unwrap();
        let back = p.inverse_transform(&p.transform(&x).unwrap()).unwrap();
        for (a, b) in back.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
