//! Electronic-nose toolkit: simulate a four-channel metal-oxide gas sensor
//! array, ingest and clean its ADC stream, extract features, and identify or
//! quantify gases with SVMs and a small neural network.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, with `*F32` variants for single precision.

pub mod acquisition;
pub mod classify;
pub mod config;
pub mod error;
pub mod features;
pub mod kernel;
pub mod linalg;
pub mod model_io;
pub mod preprocess;
pub mod scalar;
pub mod sim;
pub mod bench;
pub mod pipeline;
pub mod regress;
pub mod tables;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Mat = linalg::Matrix<f64>;
pub type MatF32 = linalg::Matrix<f32>;
pub type Pca = features::PcaModel<f64>;
pub type PcaF32 = features::PcaModel<f32>;
pub type Kpca = features::KpcaModel<f64>;
pub type KpcaF32 = features::KpcaModel<f32>;
pub type Svm = classify::SvmModel<f64>;
pub type SvmF32 = classify::SvmModel<f32>;
pub type Scaler = preprocess::Standardizer<f64>;
pub type ScalerF32 = preprocess::Standardizer<f32>;
pub type Mlp = regress::MlpModel<f64>;
pub type MlpF32 = regress::MlpModel<f32>;
