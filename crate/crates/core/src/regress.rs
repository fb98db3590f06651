//! Quantitative estimation with a feed-forward network.
//!
//! Hidden layers use the logistic sigmoid, the single output is linear.
//! Inputs are z-scored and the target is min-max scaled to `[0, 1]` with
//! statistics from the training set. Weights are fitted by mini-batch SGD on
//! `½·MSE`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::preprocess::Standardizer;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop once the epoch loss changes by less than this.
    pub tol: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![16],
            learning_rate: 0.01,
            epochs: 500,
            batch_size: 1,
            seed: 0,
            tol: 1e-9,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::InvalidParameter("hidden layer sizes must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter("epochs and batch size must be >= 1".into()));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::InvalidParameter("tol must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    /// `out × in`
    pub weights: Matrix<T>,
    pub bias: Vec<T>,
}

/// Bare network on already-scaled inputs and targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub layers: Vec<Layer<T>>,
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Network<T> {
    /// Uniform `±1/sqrt(fan_in)` initialization.
    pub fn init(input_dim: usize, hidden: &[usize], rng: &mut impl Rng) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::InvalidParameter("input dimension must be >= 1".into()));
        }
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                let mut draw = || T::lit(rng.random_range(-bound..=bound));
                let data = (0..fan_in * fan_out).map(|_| draw()).collect();
                let bias = (0..fan_out).map(|_| draw()).collect();
                Ok(Layer {
                    weights: Matrix::from_vec(fan_out, fan_in, data)?,
                    bias,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.weights.cols())
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.as_slice().len() + l.bias.len()).sum()
    }

    /// Parameters flattened layer by layer: weights row-major, then biases.
    pub fn params(&self) -> Vec<T> {
        let mut p = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            p.extend_from_slice(l.weights.as_slice());
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn set_params(&mut self, p: &[T]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: p.len(),
            });
        }
        let mut at = 0;
        for l in &mut self.layers {
            let (r, c) = (l.weights.rows(), l.weights.cols());
            l.weights = Matrix::from_vec(r, c, p[at..at + r * c].to_vec())?;
            at += r * c;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&p[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    /// Activations of every layer, input first.
    fn activations(&self, x: &[T]) -> Vec<Vec<T>> {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (li, l) in self.layers.iter().enumerate() {
            let prev = acts.last().expect("input present");
            let z: Vec<T> = l
                .weights
                .iter_rows()
                .zip(&l.bias)
                .map(|(w, &b)| w.iter().zip(prev).map(|(&wi, &xi)| wi * xi).sum::<T>() + b)
                .collect();
            acts.push(if li == last { z } else { z.into_iter().map(sigmoid).collect() });
        }
        acts
    }

    pub fn forward(&self, x: &[T]) -> T {
        self.activations(x).last().expect("output layer")[0]
    }

    /// `½·mean((f(x) − y)²)` over the rows and its gradient with respect to
    /// [`Network::params`].
    pub fn loss_and_gradient(&self, x: &Matrix<T>, y: &[T]) -> Result<(T, Vec<T>)> {
        self.loss_and_gradient_idx(x, y, &(0..x.rows()).collect::<Vec<_>>())
    }

    fn loss_and_gradient_idx(&self, x: &Matrix<T>, y: &[T], idx: &[usize]) -> Result<(T, Vec<T>)> {
        if x.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        if y.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                got: y.len(),
            });
        }
        if idx.is_empty() {
            return Err(Error::Empty("no rows for the loss".into()));
        }
        let mut grads: Vec<(Vec<T>, Vec<T>)> = self
            .layers
            .iter()
            .map(|l| (vec![T::zero(); l.weights.as_slice().len()], vec![T::zero(); l.bias.len()]))
            .collect();
        let mut loss = T::zero();
        let inv_n = T::one() / T::from_usize_lossy(idx.len());
        for &i in idx {
            let acts = self.activations(x.row(i));
            let err = acts.last().expect("output")[0] - y[i];
            loss += err * err;
            // dL/dz for the output layer
            let mut delta = vec![err * inv_n];
            for li in (0..self.layers.len()).rev() {
                let l = &self.layers[li];
                let input = &acts[li];
                let cols = l.weights.cols();
                let (gw, gb) = &mut grads[li];
                for (o, &d) in delta.iter().enumerate() {
                    gb[o] += d;
                    for (c, &a) in input.iter().enumerate() {
                        gw[o * cols + c] += d * a;
                    }
                }
                if li > 0 {
                    delta = (0..cols)
                        .map(|c| {
                            let back: T = delta
                                .iter()
                                .enumerate()
                                .map(|(o, &d)| d * l.weights[(o, c)])
                                .sum();
                            let a = input[c];
                            back * a * (T::one() - a)
                        })
                        .collect();
                }
            }
        }
        let grad = grads.into_iter().flat_map(|(w, b)| w.into_iter().chain(b)).collect();
        Ok((loss * inv_n / T::lit(2.0), grad))
    }

    /// Plain mean squared error over all rows.
    pub fn mse(&self, x: &Matrix<T>, y: &[T]) -> T {
        let n = T::from_usize_lossy(x.rows().max(1));
        x.iter_rows()
            .zip(y)
            .map(|(r, &t)| {
                let e = self.forward(r) - t;
                e * e
            })
            .sum::<T>()
            / n
    }
}

/// Trained regressor including its input and target scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T> {
    pub network: Network<T>,
    pub input: Standardizer<T>,
    pub target_min: T,
    pub target_max: T,
}

/// Training outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    /// Training-set MSE (scaled target) after each epoch.
    pub loss: Vec<f64>,
    pub converged: bool,
}

impl TrainTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss\n");
        for (e, l) in self.loss.iter().enumerate() {
            s.push_str(&format!("{},{l:e}\n", e + 1));
        }
        s
    }
}

impl<T: Scalar> MlpModel<T> {
    pub fn train(x: &Matrix<T>, y: &[T], cfg: &MlpConfig) -> Result<(Self, TrainTrace)> {
        cfg.validate()?;
        if x.rows() == 0 {
            return Err(Error::Empty("no training rows".into()));
        }
        if y.len() != x.rows() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                got: y.len(),
            });
        }
        if x.as_slice().iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("training data must be finite".into()));
        }
        let input = Standardizer::fit(x)?;
        let xs = input.transform(x)?;
        let target_min = y.iter().copied().fold(T::infinity(), T::min);
        let target_max = y.iter().copied().fold(T::neg_infinity(), T::max);
        let mut model = Self {
            network: Network::init(x.cols(), &cfg.hidden, &mut ChaCha8Rng::seed_from_u64(cfg.seed))?,
            input,
            target_min,
            target_max,
        };
        let ys: Vec<T> = y.iter().map(|&v| model.scale_target(v)).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
        let mut order: Vec<usize> = (0..xs.rows()).collect();
        let lr = T::lit(cfg.learning_rate);
        let mut trace = TrainTrace {
            loss: Vec::new(),
            converged: false,
        };
        let mut params = model.network.params();
        for epoch in 1..=cfg.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size) {
                let (_, g) = model.network.loss_and_gradient_idx(&xs, &ys, batch)?;
                for (p, gi) in params.iter_mut().zip(g) {
                    *p -= lr * gi;
                }
                model.network.set_params(&params)?;
            }
            let loss = model.network.mse(&xs, &ys).to_f64_lossy();
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            let prev = trace.loss.last().copied();
            trace.loss.push(loss);
            if prev.is_some_and(|p| (p - loss).abs() < cfg.tol) {
                trace.converged = true;
                break;
            }
        }
        log::debug!(
            "mlp: {} epochs, final loss {:e}",
            trace.loss.len(),
            trace.loss.last().copied().unwrap_or(f64::NAN)
        );
        Ok((model, trace))
    }

    fn target_span(&self) -> T {
        let span = self.target_max - self.target_min;
        if span > T::zero() {
            span
        } else {
            T::one()
        }
    }

    pub fn scale_target(&self, y: T) -> T {
        (y - self.target_min) / self.target_span()
    }

    pub fn unscale_target(&self, s: T) -> T {
        s * self.target_span() + self.target_min
    }

    pub fn predict_row(&self, x: &[T]) -> Result<T> {
        let z = self.input.transform_row(x)?;
        Ok(self.unscale_target(self.network.forward(&z)))
    }

    pub fn predict(&self, x: &Matrix<T>) -> Result<Vec<T>> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionMetrics {
    pub rmse: f64,
    pub mae: f64,
    /// Undefined (`None`) when the true values have zero variance.
    pub r2: Option<f64>,
}

pub fn evaluate_regression(predicted: &[f64], truth: &[f64]) -> Result<RegressionMetrics> {
    if predicted.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("no predictions to evaluate".into()));
    }
    let n = truth.len() as f64;
    let sse: f64 = predicted.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    let mae = predicted.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / n;
    let mean = truth.iter().sum::<f64>() / n;
    let sst: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    Ok(RegressionMetrics {
        rmse: (sse / n).sqrt(),
        mae,
        r2: (sst > 0.0).then(|| 1.0 - sse / sst),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_a_smooth_curve() {
        let rows: Vec<[f64; 1]> = (0..40).map(|i| [i as f64 / 39.0 * 4.0 - 2.0]).collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * r[0]).collect();
        let x = Matrix::<f64>::from_rows(&rows).unwrap();
        let cfg = MlpConfig {
            hidden: vec![8],
            learning_rate: 0.1,
            epochs: 2000,
            ..MlpConfig::default()
        };
        let (m, trace) = MlpModel::train(&x, &y, &cfg).unwrap();
        assert!(trace.loss.last().unwrap() < &trace.loss[0]);
        let pred = m.predict(&x).unwrap();
        let metrics = evaluate_regression(&pred, &y).unwrap();
        assert!(metrics.r2.unwrap() > 0.9, "{metrics:?}");
    }

    #[test]
    fn same_seed_same_weights() {
        let x = Matrix::<f64>::from_rows(&[[0.0, 1.0], [1.0, 0.0], [0.5, 0.5], [0.2, 0.9]]).unwrap();
        let y = [1.0, 2.0, 1.5, 1.1];
        let cfg = MlpConfig {
            epochs: 30,
            seed: 7,
            ..MlpConfig::default()
        };
        let a = MlpModel::train(&x, &y, &cfg).unwrap();
        let b = MlpModel::train(&x, &y, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gradient_of_single_weight_network() {
        // one linear layer: f(x) = w x + b, L = ½ (w x + b − y)²
        let mut net = Network::<f64> {
            layers: vec![Layer {
                weights: Matrix::<f64>::from_rows(&[[2.0]]).unwrap(),
                bias: vec![0.5],
            }],
        };
        let x = Matrix::<f64>::from_rows(&[[3.0]]).unwrap();
        let (l, g) = net.loss_and_gradient(&x, &[1.0]).unwrap();
        assert!((l - 0.5 * 5.5f64.powi(2)).abs() < 1e-12);
        assert!((g[0] - 5.5 * 3.0).abs() < 1e-12);
        assert!((g[1] - 5.5).abs() < 1e-12);
        net.set_params(&[1.0, 0.0]).unwrap();
        assert_eq!(net.forward(&[4.0]), 4.0);
    }

    #[test]
    fn divergence_is_reported() {
        let x = Matrix::<f64>::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let cfg = MlpConfig {
            hidden: vec![],
            learning_rate: 1e6,
            epochs: 200,
            ..MlpConfig::default()
        };
        assert!(matches!(
            MlpModel::train(&x, &[0.0, 1.0, 2.0, 3.0], &cfg),
            Err(Error::Diverged { .. })
        ));
    }

    #[test]
    fn metrics_and_undefined_r2() {
        let m = evaluate_regression(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]).unwrap();
        assert!((m.rmse - (4.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((m.mae - 2.0 / 3.0).abs() < 1e-12);
        assert!(m.r2.is_some());
        assert_eq!(evaluate_regression(&[1.0, 2.0], &[3.0, 3.0]).unwrap().r2, None);
    }

    #[test]
    fn invalid_configs() {
        let x = Matrix::<f64>::from_rows(&[[0.0], [1.0]]).unwrap();
        for cfg in [
            MlpConfig { learning_rate: 0.0, ..MlpConfig::default() },
            MlpConfig { epochs: 0, ..MlpConfig::default() },
            MlpConfig { hidden: vec![0], ..MlpConfig::default() },
        ] {
            assert!(MlpModel::train(&x, &[0.0, 1.0], &cfg).is_err());
        }
    }
}
