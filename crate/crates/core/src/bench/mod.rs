//! End-to-end experiments: simulate a table, build features, split, train,
//! evaluate, and write reports.

mod report;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::FlatConfig;
use crate::error::{Error, Result, StageExt};
use crate::features::{extract_features, feature_matrix, FeatureVector, Retain};
use crate::linalg::Matrix;
use crate::pipeline::{ClassifierPipeline, FeatureMethod, PipelineConfig};
use crate::preprocess::{preprocess_session, FilterConfig};
use crate::regress::{evaluate_regression, MlpConfig, MlpModel, RegressionMetrics, TrainTrace};
use crate::sim::{generate_sessions, SimConfig};
use crate::tables::ExperimentTable;

pub use report::{
    class_index_svg, emit_regression_report, emit_report, index_plot_svg, read_metrics, scatter_svg,
    TIMING_FILE,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub table: ExperimentTable,
    pub seed: u64,
    pub sim: SimConfig,
    pub filter: FilterConfig,
    pub pipeline: PipelineConfig,
    pub mlp: MlpConfig,
}

impl ExperimentConfig {
    pub fn new(table: ExperimentTable, seed: u64) -> Self {
        Self {
            table,
            seed,
            sim: SimConfig::default(),
            filter: FilterConfig::default(),
            pipeline: PipelineConfig::default(),
            mlp: MlpConfig {
                seed,
                ..MlpConfig::default()
            },
        }
    }

    /// Applies flat-config overrides. Keys without a prefix below go to the
    /// simulator; the others are `window_m`, `baseline_degree`, `features`,
    /// `retain_variance`, `retain_components`, `kpca_gamma`, `svm_c`,
    /// `svm_kernel`, `svm_gamma`, `svm_tol`, `mlp_hidden`, `mlp_lr`,
    /// `mlp_epochs`, `mlp_batch`.
    pub fn apply(mut self, cfg: &FlatConfig) -> Result<Self> {
        let mut sim_cfg = FlatConfig::default();
        for key in cfg.keys() {
            let value = cfg.get_str(key).unwrap_or_default();
            match key {
                "window_m" => self.filter.window_m = parse(key, value)?,
                "baseline_degree" => self.filter.baseline_degree = parse(key, value)?,
                "features" => self.pipeline.features = value.parse()?,
                "retain_variance" => self.pipeline.retain = Retain::Variance(parse(key, value)?),
                "retain_components" => self.pipeline.retain = Retain::Components(parse(key, value)?),
                "kpca_gamma" => self.pipeline.kpca_gamma = value.parse()?,
                "svm_c" => self.pipeline.c_penalty = parse(key, value)?,
                "svm_kernel" => self.pipeline.kernel = value.parse()?,
                "svm_gamma" => self.pipeline.svm_gamma = value.parse()?,
                "svm_tol" => self.pipeline.tol = parse(key, value)?,
                "mlp_hidden" => {
                    self.mlp.hidden = value
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| parse(key, s.trim()))
                        .collect::<Result<_>>()?
                }
                "mlp_lr" => self.mlp.learning_rate = parse(key, value)?,
                "mlp_epochs" => self.mlp.epochs = parse(key, value)?,
                "mlp_batch" => self.mlp.batch_size = parse(key, value)?,
                _ => sim_cfg.set(key, value),
            }
        }
        self.sim = self.sim.apply(&sim_cfg)?;
        self.filter.validate()?;
        self.mlp.validate()?;
        Ok(self)
    }

    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("table".to_string(), self.table.name.clone()),
            ("seed".to_string(), self.seed.to_string()),
            ("n_train".to_string(), self.table.n_train.to_string()),
            ("n_test".to_string(), self.table.n_test.to_string()),
            ("sample_rate_hz".to_string(), self.sim.sample_rate_hz.to_string()),
            ("noise_sigma".to_string(), self.sim.specs[0].noise_sigma.to_string()),
            ("drift_rate".to_string(), self.sim.specs[0].drift_rate.to_string()),
            ("window_m".to_string(), self.filter.window_m.to_string()),
            ("baseline_degree".to_string(), self.filter.baseline_degree.to_string()),
        ];
        out.extend(self.pipeline.echo());
        out
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("bad value `{value}` for `{key}`")))
}

/// Simulates the table and turns every session into a feature vector.
pub fn build_features(cfg: &ExperimentConfig) -> Result<Vec<FeatureVector>> {
    let counts = cfg.table.per_row_counts();
    let sessions = generate_sessions(&cfg.table, &counts, cfg.seed, &cfg.sim).stage("simulate")?;
    sessions
        .iter()
        .map(|s| {
            let p = preprocess_session(s, &cfg.filter).stage("preprocess")?;
            extract_features(&p).stage("features")
        })
        .collect()
}

/// Stratified split with exactly `n_test` test rows.
///
/// Each class gets `floor(n_test * share)` test rows, and the leftover rows
/// go to the classes with the largest fractional parts (lowest label first
/// on ties). Rows are drawn from a seeded shuffle. Returns `(train, test)`
/// index lists, each in ascending order.
pub fn stratified_split(labels: &[u8], n_test: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    if n_test == 0 || n_test >= n {
        return Err(Error::InvalidParameter(format!(
            "test size {n_test} must be in 1..{n}"
        )));
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let members: Vec<Vec<usize>> = classes
        .iter()
        .map(|&c| (0..n).filter(|&i| labels[i] == c).collect())
        .collect();

    let mut alloc: Vec<usize> = members.iter().map(|m| m.len() * n_test / n).collect();
    let mut order: Vec<usize> = (0..classes.len()).collect();
    // fractional part numerator: (size * n_test) mod n
    order.sort_by_key(|&k| std::cmp::Reverse((members[k].len() * n_test) % n));
    let mut left = n_test - alloc.iter().sum::<usize>();
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if alloc[k] < members[k].len() {
            alloc[k] += 1;
            left -= 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(n - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (m, &k) in members.iter().zip(&alloc) {
        let mut idx = m.clone();
        idx.shuffle(&mut rng);
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

fn select_rows(x: &Matrix<f64>, idx: &[usize]) -> Result<Matrix<f64>> {
    let rows: Vec<&[f64]> = idx.iter().map(|&i| x.row(i)).collect();
    Matrix::from_rows(&rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class: u8,
    /// `None` when the class was never predicted.
    pub precision: Option<f64>,
    /// `None` when the class has no test rows.
    pub recall: Option<f64>,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Index of the session within the generated dataset.
    pub index: usize,
    pub truth: u8,
    pub predicted: u8,
    /// Coordinates in the projected feature space.
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub table: String,
    pub seed: u64,
    pub config: Vec<(String, String)>,
    pub classes: Vec<u8>,
    /// `confusion[i][j]`: rows of class `classes[i]` predicted as `classes[j]`.
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub n_train: usize,
    pub n_test: usize,
    pub notes: Vec<String>,
    pub predictions: Vec<Prediction>,
    pub wall_time_s: f64,
}

/// Classification metrics from parallel truth and prediction lists.
pub fn confusion_metrics(
    classes: &[u8],
    truth: &[u8],
    predicted: &[u8],
) -> Result<(Vec<Vec<usize>>, f64, Vec<ClassMetrics>)> {
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: predicted.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("no predictions".into()));
    }
    let pos = |c: u8| {
        classes
            .iter()
            .position(|&k| k == c)
            .ok_or_else(|| Error::InvalidParameter(format!("label {c} not among classes")))
    };
    let k = classes.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        confusion[pos(t)?][pos(p)?] += 1;
    }
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
    let accuracy = correct as f64 / truth.len() as f64;
    let per_class = (0..k)
        .map(|i| {
            let tp = confusion[i][i] as f64;
            let support: usize = confusion[i].iter().sum();
            let predicted: usize = (0..k).map(|r| confusion[r][i]).sum();
            ClassMetrics {
                class: classes[i],
                precision: (predicted > 0).then(|| tp / predicted as f64),
                recall: (support > 0).then(|| tp / support as f64),
                support,
            }
        })
        .collect();
    Ok((confusion, accuracy, per_class))
}

/// Runs the classification experiment for one table.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let started = Instant::now();
    let features = build_features(cfg)?;
    let labels: Vec<u8> = features.iter().map(|f| f.label).collect();
    let x = feature_matrix(&features);
    let (train, test) = stratified_split(&labels, cfg.table.n_test, cfg.seed).stage("split")?;

    let x_train = select_rows(&x, &train)?;
    let y_train: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
    let model = ClassifierPipeline::fit(&x_train, &y_train, &cfg.pipeline).stage("train")?;

    let mut predictions = Vec::with_capacity(test.len());
    for &i in &test {
        let embedding = model.embed_row(x.row(i)).stage("classify")?;
        let predicted = model.svm.predict(&embedding).stage("classify")?;
        predictions.push(Prediction {
            index: i,
            truth: labels[i],
            predicted,
            embedding,
        });
    }
    let classes = cfg.table.classes();
    let truth: Vec<u8> = predictions.iter().map(|p| p.truth).collect();
    let predicted: Vec<u8> = predictions.iter().map(|p| p.predicted).collect();
    let (confusion, accuracy, per_class) = confusion_metrics(&classes, &truth, &predicted).stage("evaluate")?;
    let wall_time_s = started.elapsed().as_secs_f64();
    log::info!(
        "{}: accuracy {accuracy:.4} on {} test sessions in {wall_time_s:.2} s",
        cfg.table.name,
        test.len()
    );
    Ok(RunReport {
        table: cfg.table.name.clone(),
        seed: cfg.seed,
        config: cfg.echo(),
        classes,
        confusion,
        accuracy,
        per_class,
        n_train: train.len(),
        n_test: test.len(),
        notes: cfg.table.notes(),
        predictions,
        wall_time_s,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionReport {
    pub table: String,
    pub seed: u64,
    pub config: Vec<(String, String)>,
    pub metrics: RegressionMetrics,
    /// `(session index, true ppm, predicted ppm)` for every test row.
    pub predictions: Vec<(usize, f64, f64)>,
    pub trace: TrainTrace,
    pub notes: Vec<String>,
    pub wall_time_s: f64,
}

/// Estimates the acetone concentration of each test session with the MLP.
pub fn run_regression_experiment(cfg: &ExperimentConfig) -> Result<RegressionReport> {
    let started = Instant::now();
    let features = build_features(cfg)?;
    let labels: Vec<u8> = features.iter().map(|f| f.label).collect();
    let target: Vec<f64> = features
        .iter()
        .map(|f| {
            f.acetone_ppm()
                .ok_or_else(|| Error::InvalidParameter("session without concentrations".into()))
        })
        .collect::<Result<_>>()?;
    let x = feature_matrix(&features);
    let (train, test) = stratified_split(&labels, cfg.table.n_test, cfg.seed).stage("split")?;
    let x_train = select_rows(&x, &train)?;
    let y_train: Vec<f64> = train.iter().map(|&i| target[i]).collect();
    let (model, trace) = MlpModel::train(&x_train, &y_train, &cfg.mlp).stage("train-mlp")?;

    let mut predictions = Vec::with_capacity(test.len());
    for &i in &test {
        predictions.push((i, target[i], model.predict_row(x.row(i)).stage("predict")?));
    }
    let pred: Vec<f64> = predictions.iter().map(|p| p.2).collect();
    let truth: Vec<f64> = predictions.iter().map(|p| p.1).collect();
    let metrics = evaluate_regression(&pred, &truth).stage("evaluate")?;

    let mut config = cfg.echo();
    config.retain(|(k, _)| !k.starts_with("svm_") && k != "features" && k != "retain" && k != "kpca_gamma");
    config.push(("target".into(), "acetone_ppm".into()));
    config.push((
        "mlp_hidden".into(),
        cfg.mlp.hidden.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
    ));
    config.push(("mlp_lr".into(), cfg.mlp.learning_rate.to_string()));
    config.push(("mlp_epochs".into(), cfg.mlp.epochs.to_string()));
    config.push(("mlp_batch".into(), cfg.mlp.batch_size.to_string()));
    Ok(RegressionReport {
        table: cfg.table.name.clone(),
        seed: cfg.seed,
        config,
        metrics,
        predictions,
        trace,
        notes: cfg.table.notes(),
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Default configuration for the CLI's `--features`/`--noise` flags.
pub fn configure(
    table: ExperimentTable,
    seed: u64,
    features: Option<FeatureMethod>,
    noise: Option<f64>,
) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(table, seed);
    if let Some(f) = features {
        cfg.pipeline.features = f;
    }
    if let Some(s) = noise {
        cfg.sim = cfg.sim.with_noise(s);
    }
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes_are_exact_and_stratified() {
        let labels: Vec<u8> = (0..680).map(|i| if i % 3 == 0 { 2 } else { 1 }).collect();
        let (train, test) = stratified_split(&labels, 80, 5).unwrap();
        assert_eq!(train.len(), 600);
        assert_eq!(test.len(), 80);
        let n2 = test.iter().filter(|&&i| labels[i] == 2).count();
        // 227 of 680 are class 2: 80 * 227 / 680 = 26.7
        assert!(n2 == 26 || n2 == 27);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..680).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_seeded() {
        let labels: Vec<u8> = (0..50).map(|i| (i % 3 + 1) as u8).collect();
        assert_eq!(stratified_split(&labels, 10, 1).unwrap(), stratified_split(&labels, 10, 1).unwrap());
        assert_ne!(stratified_split(&labels, 10, 1).unwrap(), stratified_split(&labels, 10, 2).unwrap());
        assert!(stratified_split(&labels, 0, 1).is_err());
        assert!(stratified_split(&labels, 50, 1).is_err());
    }

    #[test]
    fn confusion_counts() {
        let (c, acc, per) = confusion_metrics(&[1, 2], &[1, 1, 2, 2], &[1, 2, 2, 2]).unwrap();
        assert_eq!(c, vec![vec![1, 1], vec![0, 2]]);
        assert!((acc - 0.75).abs() < 1e-12);
        assert_eq!(per[0].precision, Some(1.0));
        assert_eq!(per[0].recall, Some(0.5));
        assert_eq!(per[1].precision, Some(2.0 / 3.0));
        let (_, _, per) = confusion_metrics(&[1, 2, 3], &[1, 2], &[1, 1]).unwrap();
        assert_eq!(per[1].precision, None);
        assert_eq!(per[2].recall, None);
    }

    #[test]
    fn config_overrides() {
        let table = ExperimentTable::builtin(crate::tables::TableId::BinaryEthanol);
        let flat = FlatConfig::parse("svm_c = 3\nfeatures = kpca\nnoise_sigma = 0.01\nwindow_m = 7\n").unwrap();
        let cfg = ExperimentConfig::new(table, 1).apply(&flat).unwrap();
        assert_eq!(cfg.pipeline.c_penalty, 3.0);
        assert_eq!(cfg.pipeline.features, FeatureMethod::Kpca);
        assert_eq!(cfg.filter.window_m, 7);
        assert!(cfg.sim.specs.iter().all(|s| s.noise_sigma == 0.01));
        let bad = FlatConfig::parse("window_m = 4\n").unwrap();
        assert!(ExperimentConfig::new(ExperimentTable::builtin(crate::tables::TableId::Ternary), 1)
            .apply(&bad)
            .is_err());
    }
}
