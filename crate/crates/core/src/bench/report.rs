use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::{RegressionReport, RunReport};

/// Wall-clock time goes here rather than into the metrics so that repeated
/// runs produce identical report files.
pub const TIMING_FILE: &str = "timing.txt";

const PALETTE: [&str; 4] = ["#7f7f7f", "#1f77b4", "#d62728", "#2ca02c"];

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn prepare_dir(dir: &Path) -> Result<()> {
    if dir.as_os_str().is_empty() {
        return Err(Error::InvalidParameter("output directory path is empty".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))
}

fn write(dir: &Path, name: &str, body: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(path)
}

fn metrics_csv(report: &RunReport) -> String {
    let mut s = String::from("key,value\n");
    let mut kv = |k: &str, v: &str| {
        let _ = writeln!(s, "{},{}", csv_field(k), csv_field(v));
    };
    for (k, v) in &report.config {
        kv(k, v);
    }
    kv("train_sessions", &report.n_train.to_string());
    kv("test_sessions", &report.n_test.to_string());
    kv("accuracy", &report.accuracy.to_string());
    for m in &report.per_class {
        kv(&format!("precision_{}", m.class), &opt(m.precision));
        kv(&format!("recall_{}", m.class), &opt(m.recall));
        kv(&format!("support_{}", m.class), &m.support.to_string());
    }
    for n in &report.notes {
        kv("note", n);
    }
    s
}

fn confusion_csv(report: &RunReport) -> String {
    let mut s = String::from("true\\predicted");
    for c in &report.classes {
        let _ = write!(s, ",{c}");
    }
    s.push('\n');
    for (c, row) in report.classes.iter().zip(&report.confusion) {
        let _ = write!(s, "{c}");
        for v in row {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

fn predictions_csv(report: &RunReport) -> String {
    let dims = report.predictions.first().map_or(0, |p| p.embedding.len());
    let mut s = String::from("session,true,predicted");
    for k in 0..dims {
        let _ = write!(s, ",z{}", k + 1);
    }
    s.push('\n');
    for p in &report.predictions {
        let _ = write!(s, "{},{},{}", p.index, p.truth, p.predicted);
        for z in &p.embedding {
            let _ = write!(s, ",{z}");
        }
        s.push('\n');
    }
    s
}

/// Writes `metrics.csv`, `confusion.csv`, `predictions.csv`, `scatter.svg`,
/// `index_plot.svg` and the timing file into `dir`, creating it if needed.
pub fn emit_report(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    prepare_dir(dir)?;
    Ok(vec![
        write(dir, "metrics.csv", &metrics_csv(report))?,
        write(dir, "confusion.csv", &confusion_csv(report))?,
        write(dir, "predictions.csv", &predictions_csv(report))?,
        write(dir, "scatter.svg", &scatter_svg(report))?,
        write(dir, "index_plot.svg", &class_index_svg(report))?,
        write(dir, TIMING_FILE, &format!("wall_time_s = {}\n", report.wall_time_s))?,
    ])
}

/// Writes `regression_metrics.csv`, `regression_predictions.csv`,
/// `loss.csv`, `regression_index_plot.svg` and the timing file into `dir`.
pub fn emit_regression_report(report: &RegressionReport, dir: &Path) -> Result<Vec<PathBuf>> {
    prepare_dir(dir)?;
    let mut m = String::from("key,value\n");
    for (k, v) in &report.config {
        let _ = writeln!(m, "{},{}", csv_field(k), csv_field(v));
    }
    let _ = writeln!(m, "rmse,{}", report.metrics.rmse);
    let _ = writeln!(m, "mae,{}", report.metrics.mae);
    let _ = writeln!(m, "r2,{}", opt(report.metrics.r2));
    let _ = writeln!(m, "epochs_run,{}", report.trace.loss.len());
    let _ = writeln!(m, "converged,{}", report.trace.converged);
    for n in &report.notes {
        let _ = writeln!(m, "note,{}", csv_field(n));
    }
    let mut p = String::from("session,true_ppm,predicted_ppm\n");
    for (i, t, y) in &report.predictions {
        let _ = writeln!(p, "{i},{t},{y}");
    }
    Ok(vec![
        write(dir, "regression_metrics.csv", &m)?,
        write(dir, "regression_predictions.csv", &p)?,
        write(dir, "loss.csv", &report.trace.to_csv())?,
        write(dir, "regression_index_plot.svg", &index_plot_svg(report))?,
        write(dir, "regression_timing.txt", &format!("wall_time_s = {}\n", report.wall_time_s))?,
    ])
}

/// Reads a `key,value` metrics file back, keeping order and repeated keys.
pub fn read_metrics(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let fields = split_csv(line).map_err(|m| Error::parse(i + 1, m))?;
        let [k, v]: [String; 2] = fields
            .try_into()
            .map_err(|f: Vec<String>| Error::parse(i + 1, format!("expected 2 fields, found {}", f.len())))?;
        out.push((k, v));
    }
    Ok(out)
}

fn split_csv(line: &str) -> std::result::Result<Vec<String>, String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    while let Some(c) = chars.next() {
        match (quoted, c) {
            (true, '"') if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            (true, '"') => quoted = false,
            (false, '"') if cur.is_empty() => quoted = true,
            (false, ',') => fields.push(std::mem::take(&mut cur)),
            (_, c) => cur.push(c),
        }
    }
    if quoted {
        return Err("unterminated quote".into());
    }
    fields.push(cur);
    Ok(fields)
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 40.0;

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        Self { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }
}

fn svg_open(title: &str, x_label: &str, y_label: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(s, "<title>{}</title>", xml_escape(title));
    let _ = writeln!(s, "<rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<line x1=\"{MARGIN}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>",
        b = H - MARGIN,
        r = W - MARGIN
    );
    let _ = writeln!(
        s,
        "<line x1=\"{MARGIN}\" y1=\"{MARGIN}\" x2=\"{MARGIN}\" y2=\"{b}\" stroke=\"black\"/>",
        b = H - MARGIN
    );
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{}</text>",
        W / 2.0,
        H - 8.0,
        xml_escape(x_label)
    );
    let _ = writeln!(
        s,
        "<text x=\"12\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 12 {})\">{}</text>",
        H / 2.0,
        H / 2.0,
        xml_escape(y_label)
    );
    s
}

/// Test sessions in the first two projected coordinates, one `<circle>` per
/// session colored by true class.
pub fn scatter_svg(report: &RunReport) -> String {
    let coord = |e: &[f64], k: usize| e.get(k).copied().unwrap_or(0.0);
    let frame = Frame::fit(
        report.predictions.iter().map(|p| coord(&p.embedding, 0)),
        report.predictions.iter().map(|p| coord(&p.embedding, 1)),
    );
    let mut s = svg_open(&format!("{}: test sessions", report.table), "component 1", "component 2");
    for p in &report.predictions {
        let color = PALETTE[usize::from(p.truth) % PALETTE.len()];
        let stroke = if p.truth == p.predicted { "none" } else { "black" };
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\" stroke=\"{stroke}\" data-class=\"{}\"/>",
            frame.px(coord(&p.embedding, 0)),
            frame.py(coord(&p.embedding, 1)),
            p.truth
        );
    }
    for (i, c) in report.classes.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"8\" height=\"8\" fill=\"{}\"/><text x=\"{}\" y=\"{}\" font-size=\"11\">class {c}</text>",
            W - MARGIN - 60.0,
            y - 8.0,
            PALETTE[usize::from(*c) % PALETTE.len()],
            W - MARGIN - 48.0,
            y
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Predicted (`<circle>`) and true (`<rect>`) class per test index.
pub fn class_index_svg(report: &RunReport) -> String {
    let n = report.predictions.len();
    let lo = report.classes.first().copied().unwrap_or(0);
    let hi = report.classes.last().copied().unwrap_or(1);
    let frame = Frame::fit((0..n).map(|i| i as f64), [f64::from(lo), f64::from(hi)].into_iter());
    let mut s = svg_open(&format!("{}: predicted vs true class", report.table), "test index", "class");
    for (i, p) in report.predictions.iter().enumerate() {
        let x = frame.px(i as f64);
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"6\" height=\"6\" fill=\"none\" stroke=\"#1f77b4\" class=\"true\"/>",
            x - 3.0,
            frame.py(f64::from(p.truth)) - 3.0
        );
        let _ = writeln!(
            s,
            "<circle cx=\"{x:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"#d62728\" class=\"predicted\"/>",
            frame.py(f64::from(p.predicted))
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Predicted (`<circle>`) and true (`<rect>`) concentration per test index.
pub fn index_plot_svg(report: &RegressionReport) -> String {
    let n = report.predictions.len();
    let frame = Frame::fit(
        (0..n).map(|i| i as f64),
        report.predictions.iter().flat_map(|p| [p.1, p.2]),
    );
    let mut s = svg_open(&format!("{}: acetone estimate", report.table), "test index", "ppm");
    for (i, (_, truth, pred)) in report.predictions.iter().enumerate() {
        let x = frame.px(i as f64);
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"5\" height=\"5\" fill=\"none\" stroke=\"#1f77b4\" class=\"true\"/>",
            x - 2.5,
            frame.py(*truth) - 2.5
        );
        let _ = writeln!(
            s,
            "<circle cx=\"{x:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"#d62728\" class=\"predicted\"/>",
            frame.py(*pred)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quoting_round_trip() {
        assert_eq!(split_csv("a,\"b, c\",\"d\"\"e\"").unwrap(), vec!["a", "b, c", "d\"e"]);
        assert_eq!(csv_field("x,y"), "\"x,y\"");
        assert!(split_csv("\"open").is_err());
    }

    #[test]
    fn empty_dir_rejected() {
        assert!(prepare_dir(Path::new("")).is_err());
    }
}
