use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use enose::acquisition::{load_session, meta_path, meta_to_text, save_session};
use enose::bench::{self, ExperimentConfig};
use enose::config::FlatConfig;
use enose::error::{Error, Result, StageExt};
use enose::features::{extract_features, feature_matrix, features_from_csv, features_to_csv, FeatureVector};
use enose::model_io;
use enose::pipeline::{ClassifierPipeline, FeatureMethod, Gamma, KernelKind};
use enose::preprocess::{preprocess_session, processed_to_csv};
use enose::regress::{evaluate_regression, MlpModel};
use enose::sim::generate_sessions;
use enose::tables::{ExperimentTable, TableId};

#[derive(Parser)]
#[command(name = "enose", version, about = "Gas sensor array simulation, cleaning and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    table: TableId,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    features: Option<FeatureMethod>,
    /// Multiplicative noise sigma applied to every channel.
    #[arg(long)]
    noise: Option<f64>,
    /// Flat `key = value` overrides.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate every session of a table into OUT/raw.
    Simulate(RunArgs),
    /// Parse raw session CSVs, impute gaps and write clean copies.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Remove baselines, smooth, and write processed sessions plus features.csv.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        window: Option<usize>,
        #[arg(long)]
        degree: Option<usize>,
    },
    TrainSvm {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        c: f64,
        #[arg(long, default_value = "rbf")]
        kernel: KernelKind,
        #[arg(long, default_value = "auto")]
        gamma: Gamma,
        #[arg(long, default_value = "pca")]
        features: FeatureMethod,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Train the acetone concentration regressor.
    TrainMlp {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Loss trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        hidden: Option<Vec<usize>>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Full experiment on a table; writes metrics, confusion matrix and plots.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// Also run the acetone concentration experiment.
        #[arg(long)]
        regression: bool,
    },
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    }
    fs::write(path, body).map_err(|e| Error::io(path.display().to_string(), e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

const INGEST_REPORT: &str = "ingest_report.csv";
const FEATURES_FILE: &str = "features.csv";
const REPORT_FILES: [&str; 2] = [INGEST_REPORT, FEATURES_FILE];

/// Session CSVs in a directory, sorted by name.
fn session_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .filter(|p| !p.file_name().is_some_and(|n| REPORT_FILES.iter().any(|r| n == *r)))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Empty(format!("no session CSV files in {}", dir.display())));
    }
    Ok(files)
}

fn experiment_config(run: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(ExperimentTable::builtin(run.table), run.seed);
    if let Some(path) = &run.config {
        cfg = cfg.apply(&FlatConfig::load(path)?)?;
    }
    if let Some(f) = run.features {
        cfg.pipeline.features = f;
    }
    if let Some(s) = run.noise {
        cfg.sim = cfg.sim.with_noise(s);
    }
    Ok(cfg)
}

fn load_features(path: &Path) -> Result<Vec<FeatureVector>> {
    let f = features_from_csv(&read_to_string(path)?)?;
    if f.is_empty() {
        return Err(Error::Empty(format!("{} has no rows", path.display())));
    }
    Ok(f)
}

fn simulate(run: &RunArgs) -> Result<()> {
    let cfg = experiment_config(run)?;
    let sessions = generate_sessions(&cfg.table, &cfg.table.per_row_counts(), cfg.seed, &cfg.sim)?;
    let dir = run.out.join("raw");
    create_dir(&dir)?;
    for (i, s) in sessions.iter().enumerate() {
        save_session(s, &dir.join(format!("session_{i:04}.csv")))?;
    }
    println!("wrote {} sessions to {}", sessions.len(), dir.display());
    Ok(())
}

fn ingest(input: &Path, out: &Path) -> Result<()> {
    create_dir(out)?;
    let mut summary = String::from("file,data_lines,malformed,imputed1,imputed2,imputed3,imputed4\n");
    let files = session_files(input)?;
    for path in &files {
        let (session, report) = load_session(path)?;
        if !report.malformed.is_empty() {
            log::warn!(
                "{}: skipped {} malformed lines",
                path.display(),
                report.malformed.len()
            );
        }
        let name = path.file_name().expect("listed file has a name");
        save_session(&session, &out.join(name))?;
        let [a, b, c, d] = report.imputed;
        let _ = writeln!(
            summary,
            "{},{},{},{a},{b},{c},{d}",
            name.to_string_lossy(),
            report.data_lines,
            report.malformed.len()
        );
    }
    write_file(&out.join(INGEST_REPORT), &summary)?;
    println!("ingested {} sessions into {}", files.len(), out.display());
    Ok(())
}

fn preprocess(input: &Path, out: &Path, window: Option<usize>, degree: Option<usize>) -> Result<()> {
    let mut filter = enose::preprocess::FilterConfig::default();
    if let Some(w) = window {
        filter.window_m = w;
    }
    if let Some(d) = degree {
        filter.baseline_degree = d;
    }
    filter.validate()?;
    create_dir(out)?;
    let mut features = Vec::new();
    for path in session_files(input)? {
        let (session, _) = load_session(&path)?;
        let processed = preprocess_session(&session, &filter)?;
        let name = path.file_name().expect("listed file has a name");
        let target = out.join(name);
        write_file(&target, &processed_to_csv(&processed, &filter))?;
        write_file(&meta_path(&target), &meta_to_text(&processed.meta))?;
        features.push(extract_features(&processed).stage("features")?);
    }
    let fpath = out.join(FEATURES_FILE);
    write_file(&fpath, &features_to_csv(&features))?;
    println!("processed {} sessions; features in {}", features.len(), fpath.display());
    Ok(())
}

fn train_svm(
    input: &Path,
    model: &Path,
    c: f64,
    kernel: KernelKind,
    gamma: Gamma,
    features: FeatureMethod,
    config: Option<&Path>,
) -> Result<()> {
    let rows = load_features(input)?;
    let mut cfg = ExperimentConfig::new(ExperimentTable::builtin(TableId::Ternary), 0);
    if let Some(path) = config {
        cfg = cfg.apply(&FlatConfig::load(path)?)?;
    }
    let mut p = cfg.pipeline;
    p.c_penalty = c;
    p.kernel = kernel;
    p.svm_gamma = gamma;
    p.features = features;
    let labels: Vec<u8> = rows.iter().map(|f| f.label).collect();
    let pipeline = ClassifierPipeline::fit(&feature_matrix(&rows), &labels, &p)?;
    model_io::save_classifier(&pipeline, model)?;
    println!(
        "trained {} pair models on {} rows; model in {}",
        pipeline.svm.pairs.len(),
        rows.len(),
        model.display()
    );
    Ok(())
}

fn classify(model: &Path, input: &Path, report: &Path) -> Result<()> {
    let pipeline = model_io::load_classifier(model)?;
    let rows = load_features(input)?;
    let mut out = String::from("row,predicted,true\n");
    let mut correct = 0;
    let mut labelled = 0;
    for (i, f) in rows.iter().enumerate() {
        let p = pipeline.predict_row(&f.values)?;
        if f.label != 0 {
            labelled += 1;
            correct += usize::from(p == f.label);
            let _ = writeln!(out, "{i},{p},{}", f.label);
        } else {
            let _ = writeln!(out, "{i},{p},");
        }
    }
    write_file(report, &out)?;
    if labelled > 0 {
        println!("accuracy = {}", correct as f64 / labelled as f64);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train_mlp(
    input: &Path,
    model: &Path,
    trace: Option<&Path>,
    hidden: Option<Vec<usize>>,
    lr: Option<f64>,
    epochs: Option<usize>,
    seed: u64,
    config: Option<&Path>,
) -> Result<()> {
    let rows = load_features(input)?;
    let mut cfg = ExperimentConfig::new(ExperimentTable::builtin(TableId::Ternary), seed);
    if let Some(path) = config {
        cfg = cfg.apply(&FlatConfig::load(path)?)?;
    }
    let mut m = cfg.mlp;
    m.seed = seed;
    if let Some(h) = hidden {
        m.hidden = h;
    }
    if let Some(v) = lr {
        m.learning_rate = v;
    }
    if let Some(v) = epochs {
        m.epochs = v;
    }
    let y: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(i, f)| {
            f.acetone_ppm()
                .ok_or_else(|| Error::InvalidParameter(format!("row {i} has no acetone concentration")))
        })
        .collect::<Result<_>>()?;
    let (mlp, tr) = MlpModel::train(&feature_matrix(&rows), &y, &m)?;
    model_io::save_mlp(&mlp, model)?;
    let trace_path = trace.map(Path::to_path_buf).unwrap_or_else(|| model.with_extension("loss.csv"));
    write_file(&trace_path, &tr.to_csv())?;
    println!(
        "trained for {} epochs (final loss {}); model in {}, loss trace in {}",
        tr.loss.len(),
        tr.loss.last().copied().unwrap_or(f64::NAN),
        model.display(),
        trace_path.display()
    );
    Ok(())
}

fn predict(model: &Path, input: &Path, report: &Path) -> Result<()> {
    let mlp = model_io::load_mlp(model)?;
    let rows = load_features(input)?;
    let mut out = String::from("row,predicted_ppm,true_ppm\n");
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for (i, f) in rows.iter().enumerate() {
        let p = mlp.predict_row(&f.values)?;
        match f.acetone_ppm() {
            Some(t) => {
                pred.push(p);
                truth.push(t);
                let _ = writeln!(out, "{i},{p},{t}");
            }
            None => {
                let _ = writeln!(out, "{i},{p},");
            }
        }
    }
    write_file(report, &out)?;
    if !truth.is_empty() {
        let m = evaluate_regression(&pred, &truth)?;
        let r2 = m.r2.map_or("undefined".to_string(), |v| v.to_string());
        println!("rmse = {}\nmae = {}\nr2 = {r2}", m.rmse, m.mae);
    }
    Ok(())
}

fn run_bench(run: &RunArgs, regression: bool) -> Result<()> {
    let cfg = experiment_config(run)?;
    let report = bench::run_experiment(&cfg)?;
    bench::emit_report(&report, &run.out)?;
    println!(
        "{}: accuracy {} on {} test sessions ({:.2} s)",
        report.table, report.accuracy, report.n_test, report.wall_time_s
    );
    if regression {
        let r = bench::run_regression_experiment(&cfg)?;
        bench::emit_regression_report(&r, &run.out)?;
        println!("{}: acetone rmse {} ppm", r.table, r.metrics.rmse);
    }
    println!("reports in {}", run.out.display());
    Ok(())
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(run) => simulate(&run).stage("simulate"),
        Command::Ingest { input, out } => ingest(&input, &out).stage("ingest"),
        Command::Preprocess {
            input,
            out,
            window,
            degree,
        } => preprocess(&input, &out, window, degree).stage("preprocess"),
        Command::TrainSvm {
            input,
            model,
            c,
            kernel,
            gamma,
            features,
            config,
        } => train_svm(&input, &model, c, kernel, gamma, features, config.as_deref()).stage("train-svm"),
        Command::Classify { model, input, report } => classify(&model, &input, &report).stage("classify"),
        Command::TrainMlp {
            input,
            model,
            trace,
            hidden,
            lr,
            epochs,
            seed,
            config,
        } => train_mlp(&input, &model, trace.as_deref(), hidden, lr, epochs, seed, config.as_deref())
            .stage("train-mlp"),
        Command::Predict { model, input, report } => predict(&model, &input, &report).stage("predict"),
        Command::Bench { run, regression } => run_bench(&run, regression).stage("bench"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("enose: {e}");
            ExitCode::FAILURE
        }
    }
}
