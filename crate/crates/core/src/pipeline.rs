//! Feature-space classifier: standardize, project, then one-vs-one SVM.

use std::fmt;
use std::str::FromStr;

use crate::classify::{SvmModel, SvmParams, DEFAULT_C, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::features::{KpcaModel, PcaModel, Retain};
use crate::kernel::{median_heuristic_gamma, Kernel};
use crate::linalg::Matrix;
use crate::preprocess::Standardizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureMethod {
    #[default]
    Pca,
    Kpca,
    /// Standardized features without projection.
    Raw,
}

impl FeatureMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMethod::Pca => "pca",
            FeatureMethod::Kpca => "kpca",
            FeatureMethod::Raw => "raw",
        }
    }
}

impl fmt::Display for FeatureMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(FeatureMethod::Pca),
            "kpca" => Ok(FeatureMethod::Kpca),
            "raw" => Ok(FeatureMethod::Raw),
            _ => Err(Error::InvalidParameter(format!("unknown feature method `{s}`"))),
        }
    }
}

/// `auto` resolves with the median heuristic on the training inputs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Gamma {
    #[default]
    Auto,
    Value(f64),
}

impl Gamma {
    pub fn resolve(self, x: &Matrix<f64>) -> f64 {
        match self {
            Gamma::Auto => median_heuristic_gamma(x),
            Gamma::Value(g) => g,
        }
    }
}

impl fmt::Display for Gamma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gamma::Auto => f.write_str("auto"),
            Gamma::Value(g) => write!(f, "{g}"),
        }
    }
}

impl FromStr for Gamma {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Gamma::Auto);
        }
        let g: f64 = s
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("gamma must be `auto` or a number, got `{s}`")))?;
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {g}")));
        }
        Ok(Gamma::Value(g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelKind {
    Linear,
    #[default]
    Rbf,
}

impl FromStr for KernelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(KernelKind::Linear),
            "rbf" => Ok(KernelKind::Rbf),
            _ => Err(Error::InvalidParameter(format!("unknown kernel `{s}`"))),
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Linear => "linear",
            KernelKind::Rbf => "rbf",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub features: FeatureMethod,
    pub retain: Retain,
    /// KPCA kernel width.
    pub kpca_gamma: Gamma,
    pub c_penalty: f64,
    pub kernel: KernelKind,
    pub svm_gamma: Gamma,
    pub tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            features: FeatureMethod::Pca,
            retain: Retain::default(),
            kpca_gamma: Gamma::Auto,
            c_penalty: DEFAULT_C,
            kernel: KernelKind::Rbf,
            svm_gamma: Gamma::Auto,
            tol: DEFAULT_TOL,
        }
    }
}

impl PipelineConfig {
    /// `key,value` pairs describing the configuration.
    pub fn echo(&self) -> Vec<(String, String)> {
        let retain = match self.retain {
            Retain::Variance(f) => format!("variance:{f}"),
            Retain::Components(k) => format!("components:{k}"),
        };
        let mut out = vec![
            ("features".to_string(), self.features.to_string()),
            ("retain".to_string(), retain),
        ];
        if self.features == FeatureMethod::Kpca {
            out.push(("kpca_gamma".to_string(), self.kpca_gamma.to_string()));
        }
        out.push(("svm_c".to_string(), self.c_penalty.to_string()));
        out.push(("svm_kernel".to_string(), self.kernel.to_string()));
        if self.kernel == KernelKind::Rbf {
            out.push(("svm_gamma".to_string(), self.svm_gamma.to_string()));
        }
        out.push(("svm_tol".to_string(), self.tol.to_string()));
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Projection {
    Identity,
    Pca(PcaModel<f64>),
    Kpca(KpcaModel<f64>),
}

impl Projection {
    pub fn transform_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Projection::Identity => Ok(x.to_vec()),
            Projection::Pca(p) => p.transform_row(x),
            Projection::Kpca(k) => k.transform_row(x),
        }
    }

    pub fn transform(&self, x: &Matrix<f64>) -> Result<Matrix<f64>> {
        match self {
            Projection::Identity => Ok(x.clone()),
            Projection::Pca(p) => p.transform(x),
            Projection::Kpca(k) => k.transform(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierPipeline {
    pub scaler: Standardizer<f64>,
    pub projection: Projection,
    pub svm: SvmModel<f64>,
}

impl ClassifierPipeline {
    pub fn fit(x: &Matrix<f64>, labels: &[u8], cfg: &PipelineConfig) -> Result<Self> {
        let scaler = Standardizer::fit(x)?;
        let z = scaler.transform(x)?;
        let projection = match cfg.features {
            FeatureMethod::Raw => Projection::Identity,
            FeatureMethod::Pca => Projection::Pca(PcaModel::fit(&z, cfg.retain)?),
            FeatureMethod::Kpca => {
                let g = cfg.kpca_gamma.resolve(&z);
                Projection::Kpca(KpcaModel::fit(&z, g, cfg.retain)?)
            }
        };
        let p = projection.transform(&z)?;
        let kernel = match cfg.kernel {
            KernelKind::Linear => Kernel::Linear,
            KernelKind::Rbf => Kernel::rbf(cfg.svm_gamma.resolve(&p))?,
        };
        let mut params = SvmParams::new(cfg.c_penalty, kernel);
        params.tol = cfg.tol;
        log::info!("training SVM on {} rows in {} dimensions", p.rows(), p.cols());
        let svm = SvmModel::train(&p, labels, &params)?;
        Ok(Self {
            scaler,
            projection,
            svm,
        })
    }

    /// Projected coordinates of a raw feature row.
    pub fn embed_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.projection.transform_row(&self.scaler.transform_row(x)?)
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<u8> {
        self.svm.predict(&self.embed_row(x)?)
    }

    pub fn predict(&self, x: &Matrix<f64>) -> Result<Vec<u8>> {
        x.iter_rows().map(|r| self.predict_row(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_options() {
        assert_eq!("auto".parse::<Gamma>().unwrap(), Gamma::Auto);
        assert_eq!("0.5".parse::<Gamma>().unwrap(), Gamma::Value(0.5));
        assert!("-1".parse::<Gamma>().is_err());
        assert!("x".parse::<Gamma>().is_err());
        assert_eq!("kpca".parse::<FeatureMethod>().unwrap(), FeatureMethod::Kpca);
        assert!("lda".parse::<FeatureMethod>().is_err());
        assert_eq!("linear".parse::<KernelKind>().unwrap(), KernelKind::Linear);
    }

    #[test]
    fn fits_three_blobs_with_each_projection() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (label, c) in [(1u8, [0.0, 0.0, 1.0]), (2, [4.0, 0.0, 1.0]), (3, [0.0, 4.0, 1.0])] {
            for k in 0..8 {
                let d = (k as f64 - 3.5) * 0.1;
                rows.push([c[0] + d, c[1] - d, c[2] + d * 0.5]);
                labels.push(label);
            }
        }
        let x = Matrix::from_rows(&rows).unwrap();
        for features in [FeatureMethod::Pca, FeatureMethod::Kpca, FeatureMethod::Raw] {
            let cfg = PipelineConfig {
                features,
                ..PipelineConfig::default()
            };
            let p = ClassifierPipeline::fit(&x, &labels, &cfg).unwrap();
            assert_eq!(p.predict(&x).unwrap(), labels, "{features}");
        }
    }
}
