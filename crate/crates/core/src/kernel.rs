use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{dot, sq_dist, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel<T> {
    Linear,
    /// `exp(-gamma * |x - y|^2)`
    Rbf { gamma: T },
}

impl<T: Scalar> Kernel<T> {
    pub fn rbf(gamma: T) -> Result<Self> {
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "RBF gamma must be > 0, got {gamma}"
            )));
        }
        Ok(Kernel::Rbf { gamma })
    }

    pub fn eval(&self, a: &[T], b: &[T]) -> T {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => (-gamma * sq_dist(a, b)).exp(),
        }
    }

    pub fn gram(&self, x: &Matrix<T>) -> Matrix<T> {
        let n = x.rows();
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.eval(x.row(i), x.row(j));
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

/// `1 / (d * median pairwise squared distance)`; falls back to `1 / d`
/// when the median is zero.
pub fn median_heuristic_gamma<T: Scalar>(x: &Matrix<T>) -> T {
    let n = x.rows();
    let d = T::from_usize_lossy(x.cols().max(1));
    let mut dists: Vec<T> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in 0..i {
            dists.push(sq_dist(x.row(i), x.row(j)));
        }
    }
    if dists.is_empty() {
        return T::one() / d;
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        (dists[m / 2 - 1] + dists[m / 2]) / T::lit(2.0)
    };
    if median > T::zero() {
        T::one() / (d * median)
    } else {
        T::one() / d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rbf_values() {
        let k = Kernel::rbf(0.5).unwrap();
        assert_eq!(k.eval(&[1.0, 2.0], &[1.0, 2.0]), 1.0);
        assert!((k.eval(&[0.0], &[2.0]) - (-2.0f64).exp()).abs() < 1e-15);
        assert!(Kernel::rbf(0.0).is_err());
        assert!(Kernel::rbf(-1.0).is_err());
    }

    #[test]
    fn median_gamma() {
        // pairwise squared distances 1, 4, 1 -> median 1, d = 1
        let x = Matrix::<f64>::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        assert_eq!(median_heuristic_gamma(&x), 1.0);
    }
}
