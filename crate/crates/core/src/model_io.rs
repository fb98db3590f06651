//! Versioned plain-text model files.
//!
//! Every file starts with a `<kind> v<version>` line followed by
//! `key = value` lines; vectors are space separated. Floats are written in
//! shortest round-trip form so save/load is lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::classify::{BinarySvm, PairModel, SvmModel};
use crate::error::{Error, Result};
use crate::features::{KpcaModel, PcaModel};
use crate::kernel::Kernel;
use crate::linalg::Matrix;
use crate::pipeline::{ClassifierPipeline, Projection};
use crate::preprocess::Standardizer;
use crate::regress::{Layer, MlpModel, Network};

pub const CLASSIFIER_MAGIC: &str = "enose-classifier";
pub const MLP_MAGIC: &str = "enose-mlp";
pub const FORMAT_VERSION: u32 = 1;

struct Writer(String);

impl Writer {
    fn new(magic: &str) -> Self {
        Self(format!("{magic} v{FORMAT_VERSION}\n"))
    }

    fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.0, "{key} = {value}");
    }

    fn list<T: std::fmt::Display>(&mut self, key: &str, values: &[T]) {
        let joined: Vec<String> = values.iter().map(T::to_string).collect();
        self.kv(key, joined.join(" "));
    }

    fn matrix(&mut self, key: &str, m: &Matrix<f64>) {
        self.kv(&format!("{key}.shape"), format!("{} {}", m.rows(), m.cols()));
        for r in m.iter_rows() {
            self.list(key, r);
        }
    }

    fn scaler(&mut self, s: &Standardizer<f64>) {
        self.list("scaler.mean", &s.mean);
        self.list("scaler.std", &s.std);
        let flags: Vec<u8> = s.constant.iter().map(|&c| u8::from(c)).collect();
        self.list("scaler.constant", &flags);
    }
}

struct Reader<'a> {
    lines: Vec<(usize, &'a str, &'a str)>,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str, magic: &str) -> Result<Self> {
        let mut it = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, header) = it.next().ok_or_else(|| Error::Format("empty model file".into()))?;
        let expected = format!("{magic} v{FORMAT_VERSION}");
        if header != expected {
            return Err(Error::Format(format!("expected header `{expected}`, found `{header}`")));
        }
        let lines = it
            .map(|(n, l)| {
                let (k, v) = l
                    .split_once('=')
                    .ok_or_else(|| Error::parse(n, format!("expected `key = value`, got `{l}`")))?;
                Ok((n, k.trim(), v.trim()))
            })
            .collect::<Result<_>>()?;
        Ok(Self { lines, pos: 0 })
    }

    fn next(&mut self, key: &str) -> Result<(usize, &'a str)> {
        match self.lines.get(self.pos) {
            Some(&(n, k, v)) if k == key => {
                self.pos += 1;
                Ok((n, v))
            }
            Some(&(n, k, _)) => Err(Error::parse(n, format!("expected key `{key}`, found `{k}`"))),
            None => Err(Error::Format(format!("missing key `{key}`"))),
        }
    }

    fn value<T: FromStr>(&mut self, key: &str) -> Result<T> {
        let (n, v) = self.next(key)?;
        v.parse().map_err(|_| Error::parse(n, format!("bad value `{v}` for `{key}`")))
    }

    fn str(&mut self, key: &str) -> Result<&'a str> {
        Ok(self.next(key)?.1)
    }

    fn list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>> {
        let (n, v) = self.next(key)?;
        v.split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::parse(n, format!("bad number `{t}` in `{key}`"))))
            .collect()
    }

    fn list_of_len<T: FromStr>(&mut self, key: &str, len: usize) -> Result<Vec<T>> {
        let v = self.list(key)?;
        if v.len() != len {
            return Err(Error::Format(format!("`{key}` has {} values, expected {len}", v.len())));
        }
        Ok(v)
    }

    fn matrix(&mut self, key: &str) -> Result<Matrix<f64>> {
        let shape: Vec<usize> = self.list_of_len(&format!("{key}.shape"), 2)?;
        let (r, c) = (shape[0], shape[1]);
        let mut data = Vec::with_capacity(r * c);
        for _ in 0..r {
            data.extend(self.list_of_len::<f64>(key, c)?);
        }
        Matrix::from_vec(r, c, data)
    }

    fn scaler(&mut self) -> Result<Standardizer<f64>> {
        let mean: Vec<f64> = self.list("scaler.mean")?;
        let std = self.list_of_len("scaler.std", mean.len())?;
        let constant = self
            .list_of_len::<u8>("scaler.constant", mean.len())?
            .into_iter()
            .map(|f| f != 0)
            .collect();
        Ok(Standardizer { mean, std, constant })
    }

    fn finish(&self) -> Result<()> {
        match self.lines.get(self.pos) {
            Some(&(n, k, _)) => Err(Error::parse(n, format!("unexpected trailing key `{k}`"))),
            None => Ok(()),
        }
    }
}

fn write_kernel(w: &mut Writer, k: &Kernel<f64>) {
    match k {
        Kernel::Linear => w.kv("kernel", "linear"),
        Kernel::Rbf { gamma } => w.kv("kernel", format!("rbf {gamma}")),
    }
}

fn read_kernel(r: &mut Reader) -> Result<Kernel<f64>> {
    let v = r.str("kernel")?;
    let mut parts = v.split_whitespace();
    match (parts.next(), parts.next(), parts.next()) {
        (Some("linear"), None, _) => Ok(Kernel::Linear),
        (Some("rbf"), Some(g), None) => Kernel::rbf(
            g.parse()
                .map_err(|_| Error::Format(format!("bad gamma `{g}`")))?,
        ),
        _ => Err(Error::Format(format!("unknown kernel `{v}`"))),
    }
}

pub fn classifier_to_string(p: &ClassifierPipeline) -> String {
    let mut w = Writer::new(CLASSIFIER_MAGIC);
    w.scaler(&p.scaler);
    match &p.projection {
        Projection::Identity => w.kv("projection", "identity"),
        Projection::Pca(m) => {
            w.kv("projection", "pca");
            w.list("pca.mean", &m.mean);
            w.list("pca.eigenvalues", &m.eigenvalues);
            w.kv("pca.retained", m.retained_k);
            for c in &m.components {
                w.list("pca.component", c);
            }
        }
        Projection::Kpca(m) => {
            w.kv("projection", "kpca");
            w.kv("kpca.gamma", m.gamma);
            w.matrix("kpca.train", &m.train);
            w.list("kpca.col_means", &m.gram_col_means);
            w.kv("kpca.grand_mean", m.gram_mean);
            w.list("kpca.eigenvalues", &m.eigenvalues);
            for a in &m.alphas {
                w.list("kpca.alpha", a);
            }
        }
    }
    w.list("svm.classes", &p.svm.classes);
    w.kv("svm.pairs", p.svm.pairs.len());
    for pair in &p.svm.pairs {
        w.kv("pair", format!("{} {}", pair.positive, pair.negative));
        write_kernel(&mut w, &pair.model.kernel);
        w.kv("c", pair.model.c_penalty);
        w.kv("bias", pair.model.bias);
        w.list("dual_coef", &pair.model.dual_coef);
        w.matrix("sv", &pair.model.support_vectors);
    }
    w.0
}

pub fn classifier_from_str(text: &str) -> Result<ClassifierPipeline> {
    let mut r = Reader::new(text, CLASSIFIER_MAGIC)?;
    let scaler = r.scaler()?;
    let d = scaler.dim();
    let projection = match r.str("projection")? {
        "identity" => Projection::Identity,
        "pca" => {
            let mean = r.list_of_len("pca.mean", d)?;
            let eigenvalues = r.list_of_len("pca.eigenvalues", d)?;
            let retained_k: usize = r.value("pca.retained")?;
            if retained_k == 0 || retained_k > d {
                return Err(Error::Format(format!("pca.retained {retained_k} out of 1..={d}")));
            }
            let components = (0..d)
                .map(|_| r.list_of_len("pca.component", d))
                .collect::<Result<_>>()?;
            Projection::Pca(PcaModel {
                mean,
                components,
                eigenvalues,
                retained_k,
            })
        }
        "kpca" => {
            let gamma: f64 = r.value("kpca.gamma")?;
            Kernel::rbf(gamma)?;
            let train = r.matrix("kpca.train")?;
            if train.cols() != d {
                return Err(Error::Format("kpca.train width differs from the scaler".into()));
            }
            let n = train.rows();
            let gram_col_means = r.list_of_len("kpca.col_means", n)?;
            let gram_mean = r.value("kpca.grand_mean")?;
            let eigenvalues: Vec<f64> = r.list("kpca.eigenvalues")?;
            let alphas = (0..eigenvalues.len())
                .map(|_| r.list_of_len("kpca.alpha", n))
                .collect::<Result<_>>()?;
            Projection::Kpca(KpcaModel {
                train,
                gamma,
                retained_k: eigenvalues.len(),
                eigenvalues,
                alphas,
                gram_col_means,
                gram_mean,
            })
        }
        other => return Err(Error::Format(format!("unknown projection `{other}`"))),
    };
    let classes: Vec<u8> = r.list("svm.classes")?;
    let n_pairs: usize = r.value("svm.pairs")?;
    if n_pairs != classes.len() * classes.len().saturating_sub(1) / 2 {
        return Err(Error::Format(format!("{n_pairs} pair models for {} classes", classes.len())));
    }
    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let ab: Vec<u8> = r.list_of_len("pair", 2)?;
        let kernel = read_kernel(&mut r)?;
        let c = r.value("c")?;
        let bias = r.value("bias")?;
        let dual_coef: Vec<f64> = r.list("dual_coef")?;
        let sv = r.matrix("sv")?;
        if sv.rows() != dual_coef.len() {
            return Err(Error::Format("support vector count differs from coefficients".into()));
        }
        pairs.push(PairModel {
            positive: ab[0],
            negative: ab[1],
            model: BinarySvm::from_parts(kernel, sv, dual_coef, bias, c)?,
        });
    }
    r.finish()?;
    Ok(ClassifierPipeline {
        scaler,
        projection,
        svm: SvmModel { classes, pairs },
    })
}

pub fn mlp_to_string(m: &MlpModel<f64>) -> String {
    let mut w = Writer::new(MLP_MAGIC);
    w.scaler(&m.input);
    w.kv("target.min", m.target_min);
    w.kv("target.max", m.target_max);
    w.kv("layers", m.network.layers.len());
    for l in &m.network.layers {
        w.matrix("weights", &l.weights);
        w.list("bias", &l.bias);
    }
    w.0
}

pub fn mlp_from_str(text: &str) -> Result<MlpModel<f64>> {
    let mut r = Reader::new(text, MLP_MAGIC)?;
    let input = r.scaler()?;
    let target_min = r.value("target.min")?;
    let target_max = r.value("target.max")?;
    let n: usize = r.value("layers")?;
    let mut layers: Vec<Layer<f64>> = Vec::with_capacity(n);
    let mut width = input.dim();
    for _ in 0..n {
        let weights = r.matrix("weights")?;
        if weights.cols() != width {
            return Err(Error::Format(format!(
                "layer expects {} inputs, previous width is {width}",
                weights.cols()
            )));
        }
        let bias = r.list_of_len("bias", weights.rows())?;
        width = weights.rows();
        layers.push(Layer { weights, bias });
    }
    if n == 0 || width != 1 {
        return Err(Error::Format("network must end in a single output".into()));
    }
    r.finish()?;
    Ok(MlpModel {
        network: Network { layers },
        input,
        target_min,
        target_max,
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn save_classifier(p: &ClassifierPipeline, path: &Path) -> Result<()> {
    write(path, &classifier_to_string(p))
}

pub fn load_classifier(path: &Path) -> Result<ClassifierPipeline> {
    classifier_from_str(&read(path)?)
}

pub fn save_mlp(m: &MlpModel<f64>, path: &Path) -> Result<()> {
    write(path, &mlp_to_string(m))
}

pub fn load_mlp(path: &Path) -> Result<MlpModel<f64>> {
    mlp_from_str(&read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{FeatureMethod, PipelineConfig};
    use crate::regress::MlpConfig;

    fn blobs() -> (Matrix<f64>, Vec<u8>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (label, c) in [(1u8, 0.0), (2, 3.0), (3, 6.0)] {
            for k in 0..5 {
                let d = k as f64 * 0.2;
                rows.push([c + d, c - d, d * d]);
                labels.push(label);
            }
        }
        (Matrix::from_rows(&rows).unwrap(), labels)
    }

    #[test]
    fn classifier_round_trip() {
        let (x, y) = blobs();
        for features in [FeatureMethod::Pca, FeatureMethod::Kpca, FeatureMethod::Raw] {
            let cfg = PipelineConfig {
                features,
                ..PipelineConfig::default()
            };
            let p = ClassifierPipeline::fit(&x, &y, &cfg).unwrap();
            let text = classifier_to_string(&p);
            let back = classifier_from_str(&text).unwrap();
            assert_eq!(back, p);
            assert_eq!(classifier_to_string(&back), text);
        }
    }

    #[test]
    fn mlp_round_trip() {
        let (x, _) = blobs();
        let y: Vec<f64> = x.iter_rows().map(|r| r[0] * 2.0).collect();
        let cfg = MlpConfig {
            hidden: vec![4, 3],
            epochs: 5,
            ..MlpConfig::default()
        };
        let (m, _) = MlpModel::train(&x, &y, &cfg).unwrap();
        assert_eq!(mlp_from_str(&mlp_to_string(&m)).unwrap(), m);
    }

    #[test]
    fn rejects_wrong_header_and_truncation() {
        assert!(matches!(classifier_from_str("enose-classifier v2\n"), Err(Error::Format(_))));
        assert!(mlp_from_str("enose-classifier v1\n").is_err());
        let (x, y) = blobs();
        let p = ClassifierPipeline::fit(&x, &y, &PipelineConfig::default()).unwrap();
        let text = classifier_to_string(&p);
        let cut: String = text.lines().take(text.lines().count() - 2).map(|l| format!("{l}\n")).collect();
        assert!(classifier_from_str(&cut).is_err());
    }
}
