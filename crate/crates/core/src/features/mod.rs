//! Feature vectors from processed sessions and dimensionality reduction.

mod extract;
pub mod kpca;
pub mod pca;

pub use extract::{
    extract_features, extract_with_window, feature_matrix, features_from_csv, features_to_csv,
    FeatureVector, FEATURES_PER_CHANNEL, FEATURE_DIM, FEATURE_HEADER, STEADY_FRACTION,
};
pub use kpca::{centered_gram, KpcaModel};
pub use pca::{PcaModel, Retain, DEFAULT_VARIANCE_THRESHOLD};
