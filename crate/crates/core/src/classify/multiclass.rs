//! One-vs-one multiclass voting over binary SVMs.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

use super::svm::{train_binary, BinarySvm, SvmParams};

/// Binary model separating `positive` (decision > 0) from `negative`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairModel<T> {
    pub positive: u8,
    pub negative: u8,
    pub model: BinarySvm<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel<T> {
    /// Sorted class labels.
    pub classes: Vec<u8>,
    /// One model per class pair `(a, b)`, `a < b`, in lexicographic order.
    pub pairs: Vec<PairModel<T>>,
}

/// Per-class votes and the summed decision magnitude of the votes won.
#[derive(Debug, Clone, PartialEq)]
pub struct Ballot<T> {
    pub class: u8,
    pub votes: usize,
    pub margin: T,
}

impl<T: Scalar> SvmModel<T> {
    pub fn train(x: &Matrix<T>, labels: &[u8], params: &SvmParams<T>) -> Result<Self> {
        if labels.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                got: labels.len(),
            });
        }
        let mut classes = labels.to_vec();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::SingleClass);
        }
        let mut pairs = Vec::new();
        for (ia, &a) in classes.iter().enumerate() {
            for &b in &classes[ia + 1..] {
                let idx: Vec<usize> = (0..labels.len())
                    .filter(|&i| labels[i] == a || labels[i] == b)
                    .collect();
                let sub: Vec<&[T]> = idx.iter().map(|&i| x.row(i)).collect();
                let xs = Matrix::from_rows(&sub)?;
                let ys: Vec<i8> = idx.iter().map(|&i| if labels[i] == a { 1 } else { -1 }).collect();
                log::debug!("training pair {a} vs {b} on {} rows", idx.len());
                let (model, report) = train_binary(&xs, &ys, params)?;
                log::debug!(
                    "pair {a} vs {b}: {} iterations, {} support vectors",
                    report.iterations,
                    model.n_support()
                );
                pairs.push(PairModel {
                    positive: a,
                    negative: b,
                    model,
                });
            }
        }
        Ok(Self { classes, pairs })
    }

    pub fn dim(&self) -> usize {
        self.pairs.first().map_or(0, |p| p.model.dim())
    }

    pub fn ballots(&self, x: &[T]) -> Vec<Ballot<T>> {
        let mut ballots: Vec<Ballot<T>> = self
            .classes
            .iter()
            .map(|&class| Ballot {
                class,
                votes: 0,
                margin: T::zero(),
            })
            .collect();
        for p in &self.pairs {
            let d = p.model.decision(x);
            let winner = if d >= T::zero() { p.positive } else { p.negative };
            if let Some(b) = ballots.iter_mut().find(|b| b.class == winner) {
                b.votes += 1;
                b.margin += d.abs();
            }
        }
        ballots
    }

    /// Majority vote; ties go to the tied class with the largest summed
    /// decision magnitude, then to the lowest label.
    pub fn predict(&self, x: &[T]) -> Result<u8> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let ballots = self.ballots(x);
        let top = ballots.iter().map(|b| b.votes).max().unwrap_or(0);
        let mut best: Option<&Ballot<T>> = None;
        for b in ballots.iter().filter(|b| b.votes == top) {
            if best.is_none_or(|cur| b.margin > cur.margin) {
                best = Some(b);
            }
        }
        best.map(|b| b.class)
            .ok_or_else(|| Error::Empty("model has no classes".into()))
    }

    pub fn predict_all(&self, x: &Matrix<T>) -> Result<Vec<u8>> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }
}
