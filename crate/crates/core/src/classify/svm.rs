//! Soft-margin binary SVM trained by sequential minimal optimization.
//!
//! Solves the dual
//!
//! ```text
//! max  Σ α_i − ½ Σ_ij α_i α_j y_i y_j K(x_i, x_j)
//! s.t. 0 ≤ α_i ≤ C,  Σ α_i y_i = 0
//! ```
//!
//! two multipliers at a time. The working pair is the maximal violating
//! pair: `i` maximizes `−E_i` over the multipliers free to move up, `j`
//! minimizes `−E_j` over those free to move down, which is the pair with the
//! largest `|E_i − E_j|` among feasible directions. Training stops once that
//! gap is within `tol`, which bounds every KKT residual `y_i f(x_i) − 1` by
//! `tol` on the appropriate side.

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub const DEFAULT_C: f64 = 10.0;
pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_PASSES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams<T> {
    /// Slack penalty `C`.
    pub c_penalty: T,
    pub kernel: Kernel<T>,
    /// KKT tolerance.
    pub tol: T,
    /// Iteration guard: at most `max_passes * n` pair updates.
    pub max_passes: usize,
}

impl<T: Scalar> SvmParams<T> {
    pub fn new(c_penalty: T, kernel: Kernel<T>) -> Self {
        Self {
            c_penalty,
            kernel,
            tol: T::lit(DEFAULT_TOL),
            max_passes: DEFAULT_MAX_PASSES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_penalty > T::zero()) || !self.c_penalty.is_finite() {
            return Err(Error::InvalidParameter(format!("C must be > 0, got {}", self.c_penalty)));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidParameter(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_passes == 0 {
            return Err(Error::InvalidParameter("max_passes must be >= 1".into()));
        }
        if let Kernel::Rbf { gamma } = self.kernel {
            Kernel::rbf(gamma)?;
        }
        Ok(())
    }
}

/// Trained two-class model. Only support vectors (`α > 0`) are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm<T> {
    pub kernel: Kernel<T>,
    pub support_vectors: Matrix<T>,
    /// `α_i · y_i` per support vector.
    pub dual_coef: Vec<T>,
    pub alpha: Vec<T>,
    pub bias: T,
    pub c_penalty: T,
}

/// Solver diagnostics, including the multipliers of every training point.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoReport<T> {
    pub alpha: Vec<T>,
    pub iterations: usize,
    /// Final maximal violation `m(α) − M(α)`.
    pub violation: T,
    /// Dual objective `Σα − ½ αᵀQα`.
    pub objective: T,
}

impl<T: Scalar> BinarySvm<T> {
    pub fn from_parts(
        kernel: Kernel<T>,
        support_vectors: Matrix<T>,
        dual_coef: Vec<T>,
        bias: T,
        c_penalty: T,
    ) -> Result<Self> {
        if support_vectors.rows() != dual_coef.len() {
            return Err(Error::DimensionMismatch {
                expected: support_vectors.rows(),
                got: dual_coef.len(),
            });
        }
        let alpha = dual_coef.iter().map(|c| c.abs()).collect();
        Ok(Self {
            kernel,
            support_vectors,
            dual_coef,
            alpha,
            bias,
            c_penalty,
        })
    }

    /// `f(x) = Σ α_i y_i K(x_i, x) + b`
    pub fn decision(&self, x: &[T]) -> T {
        self.support_vectors
            .iter_rows()
            .zip(&self.dual_coef)
            .map(|(sv, &c)| c * self.kernel.eval(sv, x))
            .sum::<T>()
            + self.bias
    }

    /// `+1` or `−1`; zero decisions go to `+1`.
    pub fn predict(&self, x: &[T]) -> i8 {
        if self.decision(x) >= T::zero() {
            1
        } else {
            -1
        }
    }

    pub fn dim(&self) -> usize {
        self.support_vectors.cols()
    }

    pub fn n_support(&self) -> usize {
        self.dual_coef.len()
    }
}

/// Trains a binary SVM on labels in `{−1, +1}`.
pub fn train_binary<T: Scalar>(
    x: &Matrix<T>,
    y: &[i8],
    params: &SvmParams<T>,
) -> Result<(BinarySvm<T>, SmoReport<T>)> {
    params.validate()?;
    let n = x.rows();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if n == 0 {
        return Err(Error::Empty("no training rows".into()));
    }
    if y.iter().any(|&v| v != 1 && v != -1) {
        return Err(Error::InvalidParameter("binary labels must be -1 or +1".into()));
    }
    if !(y.contains(&1) && y.contains(&-1)) {
        return Err(Error::SingleClass);
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("training rows must be finite".into()));
    }

    let c = params.c_penalty;
    let yt: Vec<T> = y.iter().map(|&v| T::lit(f64::from(v))).collect();
    let k = params.kernel.gram(x);
    let mut alpha = vec![T::zero(); n];
    // E_i = f(x_i) − y_i without bias; all multipliers start at zero
    let mut err: Vec<T> = yt.iter().map(|&v| -v).collect();

    let up = |a: T, yi: i8| (yi == 1 && a < c) || (yi == -1 && a > T::zero());
    let low = |a: T, yi: i8| (yi == 1 && a > T::zero()) || (yi == -1 && a < c);
    let tau = T::lit(1e-12);
    let max_iter = params.max_passes.saturating_mul(n);

    let mut iterations = 0;
    let violation = loop {
        let mut i_sel = None;
        let mut j_sel = None;
        let mut m_up = T::neg_infinity();
        let mut m_low = T::infinity();
        for t in 0..n {
            let v = -err[t];
            if up(alpha[t], y[t]) && v > m_up {
                m_up = v;
                i_sel = Some(t);
            }
            if low(alpha[t], y[t]) && v < m_low {
                m_low = v;
                j_sel = Some(t);
            }
        }
        let gap = m_up - m_low;
        let (Some(i), Some(j)) = (i_sel, j_sel) else {
            break T::zero();
        };
        if gap <= params.tol {
            break gap;
        }
        if iterations >= max_iter {
            return Err(Error::NotConverged {
                iterations,
                violation: gap.to_f64_lossy(),
            });
        }
        iterations += 1;

        let (ai, aj) = (alpha[i], alpha[j]);
        let (lo, hi) = if y[i] != y[j] {
            ((aj - ai).max(T::zero()), (c + aj - ai).min(c))
        } else {
            ((ai + aj - c).max(T::zero()), (ai + aj).min(c))
        };
        let eta = (k[(i, i)] + k[(j, j)] - T::lit(2.0) * k[(i, j)]).max(tau);
        let aj_new = (aj + yt[j] * (err[i] - err[j]) / eta).max(lo).min(hi);
        let ai_new = ai + yt[i] * yt[j] * (aj - aj_new);
        // snap to the box so that free/bound membership is exact
        let snap = |a: T| {
            if a < c * T::epsilon() * T::lit(8.0) {
                T::zero()
            } else if a > c * (T::one() - T::epsilon() * T::lit(8.0)) {
                c
            } else {
                a
            }
        };
        let (ai_new, aj_new) = (snap(ai_new), snap(aj_new));
        let di = (ai_new - ai) * yt[i];
        let dj = (aj_new - aj) * yt[j];
        alpha[i] = ai_new;
        alpha[j] = aj_new;
        for t in 0..n {
            err[t] += di * k[(i, t)] + dj * k[(j, t)];
        }
    };

    // bias: mean over free multipliers, otherwise midpoint of the feasible interval
    let free: Vec<usize> = (0..n).filter(|&t| alpha[t] > T::zero() && alpha[t] < c).collect();
    let bias = if free.is_empty() {
        let mut hi = T::neg_infinity();
        let mut lo = T::infinity();
        for t in 0..n {
            let v = -err[t];
            if up(alpha[t], y[t]) {
                hi = hi.max(v);
            }
            if low(alpha[t], y[t]) {
                lo = lo.min(v);
            }
        }
        match (hi.is_finite(), lo.is_finite()) {
            (true, true) => (hi + lo) / T::lit(2.0),
            (true, false) => hi,
            (false, true) => lo,
            (false, false) => T::zero(),
        }
    } else {
        free.iter().map(|&t| -err[t]).sum::<T>() / T::from_usize_lossy(free.len())
    };

    let objective = dual_objective(&alpha, &yt, &k);
    let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > T::zero()).collect();
    let data: Vec<T> = sv.iter().flat_map(|&t| x.row(t).iter().copied()).collect();
    let model = BinarySvm {
        kernel: params.kernel,
        support_vectors: Matrix::from_vec(sv.len(), x.cols(), data)?,
        dual_coef: sv.iter().map(|&t| alpha[t] * yt[t]).collect(),
        alpha: sv.iter().map(|&t| alpha[t]).collect(),
        bias,
        c_penalty: c,
    };
    Ok((
        model,
        SmoReport {
            alpha,
            iterations,
            violation,
            objective,
        },
    ))
}

/// `Σα − ½ αᵀQα` with `Q_ij = y_i y_j K_ij`.
pub fn dual_objective<T: Scalar>(alpha: &[T], y: &[T], k: &Matrix<T>) -> T {
    let n = alpha.len();
    let mut quad = T::zero();
    for i in 0..n {
        if alpha[i] == T::zero() {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[(i, j)];
        }
    }
    alpha.iter().copied().sum::<T>() - quad / T::lit(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_two_point_margin() {
        let x = Matrix::<f64>::from_rows(&[[-1.0], [1.0]]).unwrap();
        let params = SvmParams::new(1e6, Kernel::Linear);
        let (m, rep) = train_binary(&x, &[-1, 1], &params).unwrap();
        assert!(m.decision(&[0.0]).abs() < 1e-9);
        assert_eq!(m.predict(&[-1.0]), -1);
        assert_eq!(m.predict(&[1.0]), 1);
        assert!((m.decision(&[1.0]) - 1.0).abs() < 1e-3);
        assert!((m.decision(&[-1.0]) + 1.0).abs() < 1e-3);
        // w = 1 from α = 1/2 on both points
        assert!((rep.alpha[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn xor_needs_rbf() {
        let x = Matrix::<f64>::from_rows(&[[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        let y = [1, 1, -1, -1];
        let (rbf, _) = train_binary(&x, &y, &SvmParams::new(10.0, Kernel::rbf(1.0).unwrap())).unwrap();
        for (i, &yi) in y.iter().enumerate() {
            assert_eq!(rbf.predict(x.row(i)), yi);
        }
        let (lin, _) = train_binary(&x, &y, &SvmParams::new(10.0, Kernel::Linear)).unwrap();
        let correct = (0..4).filter(|&i| lin.predict(x.row(i)) == y[i]).count();
        assert!(correct < 4);
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::<f64>::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(matches!(
            train_binary(&x, &[1, 1], &SvmParams::new(1.0, Kernel::Linear)),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn iteration_guard_reports_count() {
        let x = Matrix::<f64>::from_rows(&[[0.0], [0.1], [0.2], [0.3], [1.0], [1.1]]).unwrap();
        let mut p = SvmParams::new(100.0, Kernel::rbf(5.0).unwrap());
        p.max_passes = 1;
        p.tol = 1e-12;
        match train_binary(&x, &[1, -1, 1, -1, 1, -1], &p) {
            Err(Error::NotConverged { iterations, .. }) => assert_eq!(iterations, 6),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn parameter_validation() {
        let x = Matrix::<f64>::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(train_binary(&x, &[1, -1], &SvmParams::new(0.0, Kernel::Linear)).is_err());
        let mut p = SvmParams::new(1.0, Kernel::Linear);
        p.tol = 0.0;
        assert!(train_binary(&x, &[1, -1], &p).is_err());
    }

    #[test]
    fn alphas_within_box_and_balanced() {
        let x = Matrix::<f64>::from_rows(&[[0.0, 0.0], [0.5, 0.2], [1.0, 1.0], [0.9, 0.4], [0.1, 0.8], [0.6, 0.6]]).unwrap();
        let y = [1, 1, -1, -1, 1, -1];
        let (m, rep) = train_binary(&x, &y, &SvmParams::new(2.0, Kernel::rbf(2.0).unwrap())).unwrap();
        assert!(rep.alpha.iter().all(|&a| (0.0..=2.0).contains(&a)));
        let s: f64 = rep.alpha.iter().zip(&y).map(|(a, &yi)| a * f64::from(yi)).sum();
        assert!(s.abs() < 1e-8);
        assert!(m.alpha.iter().all(|&a| a > 0.0));
    }
}
