//! Qualitative gas identification with SVMs.

pub mod multiclass;
pub mod svm;

pub use multiclass::{Ballot, PairModel, SvmModel};
pub use svm::{dual_objective, train_binary, BinarySvm, SmoReport, SvmParams, DEFAULT_C, DEFAULT_TOL};
