//! Baseline drift removal, moving-average smoothing and z-score
//! standardization.

use std::fmt::Write as _;

use crate::acquisition::{ExposureWindow, Session, SessionMeta, SESSION_HEADER};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, Matrix};
use crate::scalar::Scalar;
use crate::sim::CHANNELS;

pub const DEFAULT_WINDOW_M: usize = 5;
pub const DEFAULT_BASELINE_DEGREE: usize = 2;
pub const MAX_BASELINE_DEGREE: usize = 5;
pub const DEFAULT_EDGE_FRACTION: f64 = 0.1;
/// Recovery time skipped before post-exposure samples count as baseline.
pub const DEFAULT_SETTLE_MS: u64 = 40_000;

/// Which samples the baseline polynomial is fitted to.
#[derive(Debug, Clone, PartialEq)]
pub enum AnchorPolicy {
    /// Leading and trailing fraction of the session.
    Edges { fraction: f64 },
    /// Samples before the exposure starts and after it has ended by `settle_ms`.
    CleanAir { window: ExposureWindow, settle_ms: u64 },
    /// Every sample.
    All,
}

impl AnchorPolicy {
    pub fn mask(&self, times_ms: &[u64]) -> Vec<bool> {
        let n = times_ms.len();
        match self {
            AnchorPolicy::All => vec![true; n],
            AnchorPolicy::Edges { fraction } => {
                let k = ((n as f64 * fraction).ceil() as usize).clamp(1, n);
                (0..n).map(|i| i < k || i >= n - k).collect()
            }
            AnchorPolicy::CleanAir { window, settle_ms } => times_ms
                .iter()
                .map(|&t| t < window.start_ms || t >= window.end_ms + settle_ms)
                .collect(),
        }
    }

    /// Clean-air anchors when the exposure window is known, edges otherwise.
    pub fn for_meta(meta: &SessionMeta) -> Self {
        match meta.exposure {
            Some(window) => AnchorPolicy::CleanAir {
                window,
                settle_ms: DEFAULT_SETTLE_MS,
            },
            None => AnchorPolicy::Edges {
                fraction: DEFAULT_EDGE_FRACTION,
            },
        }
    }

    fn describe(&self) -> String {
        match self {
            AnchorPolicy::All => "all".into(),
            AnchorPolicy::Edges { fraction } => format!("edges:{fraction}"),
            AnchorPolicy::CleanAir { window, settle_ms } => format!(
                "clean_air:{}-{}+{}",
                window.start_ms, window.end_ms, settle_ms
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    /// Moving-average window length; odd.
    pub window_m: usize,
    pub baseline_degree: usize,
    /// `None` picks per session via [`AnchorPolicy::for_meta`].
    pub anchors: Option<AnchorPolicy>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            window_m: DEFAULT_WINDOW_M,
            baseline_degree: DEFAULT_BASELINE_DEGREE,
            anchors: None,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_m == 0 || self.window_m.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "window_m must be odd and >= 1, got {}",
                self.window_m
            )));
        }
        if self.baseline_degree > MAX_BASELINE_DEGREE {
            return Err(Error::InvalidParameter(format!(
                "baseline_degree must be <= {MAX_BASELINE_DEGREE}, got {}",
                self.baseline_degree
            )));
        }
        Ok(())
    }
}

/// Centered moving average; the window shrinks at the edges.
pub fn moving_average<T: Scalar>(series: &[T], window_m: usize) -> Result<Vec<T>> {
    if series.is_empty() {
        return Err(Error::Empty("moving average of empty series".into()));
    }
    if window_m == 0 || window_m.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "window_m must be odd and >= 1, got {window_m}"
        )));
    }
    let half = window_m / 2;
    let n = series.len();
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            crate::scalar::mean(&series[lo..=hi])
        })
        .collect())
}

/// Polynomial in a normalized time variable `u = (t - center) / scale`;
/// `coeffs[k]` multiplies `u^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T> {
    pub coeffs: Vec<T>,
    pub center: T,
    pub scale: T,
}

impl<T: Scalar> Polynomial<T> {
    pub fn normalize(&self, t: T) -> T {
        (t - self.center) / self.scale
    }

    pub fn eval(&self, t: T) -> T {
        let u = self.normalize(t);
        self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * u + c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detrended<T> {
    pub residual: Vec<T>,
    pub baseline: Polynomial<T>,
}

/// Fits a least-squares polynomial of `degree` to the anchor samples and
/// subtracts it from the whole series.
pub fn remove_baseline<T: Scalar>(
    series: &[T],
    t: &[T],
    degree: usize,
    anchors: &[bool],
) -> Result<Detrended<T>> {
    if t.len() != series.len() || anchors.len() != series.len() {
        return Err(Error::DimensionMismatch {
            expected: series.len(),
            got: t.len().min(anchors.len()),
        });
    }
    if series.len() < degree + 1 {
        return Err(Error::RankDeficient(format!(
            "{} samples for a degree-{degree} fit",
            series.len()
        )));
    }
    let idx: Vec<usize> = (0..series.len()).filter(|&i| anchors[i]).collect();
    if idx.len() < degree + 1 {
        return Err(Error::RankDeficient(format!(
            "{} anchor samples for a degree-{degree} fit",
            idx.len()
        )));
    }
    let (lo, hi) = idx
        .iter()
        .fold((t[idx[0]], t[idx[0]]), |(lo, hi), &i| (lo.min(t[i]), hi.max(t[i])));
    let two = T::lit(2.0);
    let center = (lo + hi) / two;
    let half = (hi - lo) / two;
    let scale = if half > T::zero() { half } else { T::one() };

    let mut design = Matrix::zeros(idx.len(), degree + 1);
    let mut rhs = Vec::with_capacity(idx.len());
    for (r, &i) in idx.iter().enumerate() {
        let u = (t[i] - center) / scale;
        let mut p = T::one();
        for k in 0..=degree {
            design[(r, k)] = p;
            p *= u;
        }
        rhs.push(series[i]);
    }
    let coeffs = least_squares(&design, &rhs)?;
    let baseline = Polynomial {
        coeffs,
        center,
        scale,
    };
    let residual = series
        .iter()
        .zip(t)
        .map(|(&y, &ti)| y - baseline.eval(ti))
        .collect();
    Ok(Detrended { residual, baseline })
}

/// Per-feature z-score transform fitted on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
    /// Zero-variance features; passed through unchanged.
    pub constant: Vec<bool>,
}

impl<T: Scalar> Standardizer<T> {
    /// Population (divide-by-N) statistics per column.
    pub fn fit(rows: &Matrix<T>) -> Result<Self> {
        let (n, d) = (rows.rows(), rows.cols());
        if n == 0 {
            return Err(Error::Empty("standardizer needs at least one row".into()));
        }
        let nn = T::from_usize_lossy(n);
        let mut mean = vec![T::zero(); d];
        for r in rows.iter_rows() {
            for (m, &x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nn);
        let mut var = vec![T::zero(); d];
        for r in rows.iter_rows() {
            for j in 0..d {
                let z = r[j] - mean[j];
                var[j] += z * z;
            }
        }
        let std: Vec<T> = var.into_iter().map(|v| (v / nn).sqrt()).collect();
        let tiny = T::epsilon() * T::lit(64.0);
        let constant = std
            .iter()
            .zip(&mean)
            .map(|(&s, &m)| s <= tiny * m.abs().max(T::one()))
            .collect();
        Ok(Self {
            mean,
            std,
            constant,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok((0..x.len())
            .map(|j| {
                if self.constant[j] {
                    x[j]
                } else {
                    (x[j] - self.mean[j]) / self.std[j]
                }
            })
            .collect())
    }

    pub fn inverse_row(&self, z: &[T]) -> Result<Vec<T>> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok((0..z.len())
            .map(|j| {
                if self.constant[j] {
                    z[j]
                } else {
                    z[j] * self.std[j] + self.mean[j]
                }
            })
            .collect())
    }

    pub fn transform(&self, rows: &Matrix<T>) -> Result<Matrix<T>> {
        let out: Result<Vec<Vec<T>>> = rows.iter_rows().map(|r| self.transform_row(r)).collect();
        rows_to_matrix(out?, self.dim())
    }

    pub fn inverse_transform(&self, rows: &Matrix<T>) -> Result<Matrix<T>> {
        let out: Result<Vec<Vec<T>>> = rows.iter_rows().map(|r| self.inverse_row(r)).collect();
        rows_to_matrix(out?, self.dim())
    }
}

fn rows_to_matrix<T: Scalar>(rows: Vec<Vec<T>>, cols: usize) -> Result<Matrix<T>> {
    let n = rows.len();
    Matrix::from_vec(n, cols, rows.into_iter().flatten().collect())
}

/// Session after baseline removal and smoothing, in volts.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedSession {
    pub times_ms: Vec<u64>,
    pub channels: [Vec<f64>; CHANNELS],
    pub meta: SessionMeta,
}

impl ProcessedSession {
    /// Voltages without any processing.
    pub fn unprocessed(session: &Session) -> Self {
        Self {
            times_ms: session.times_ms(),
            channels: session.voltages(),
            meta: session.meta.clone(),
        }
    }
}

/// Converts to volts, removes the polynomial baseline, then smooths.
pub fn preprocess_session(session: &Session, cfg: &FilterConfig) -> Result<ProcessedSession> {
    cfg.validate()?;
    let times_ms = session.times_ms();
    let t_s: Vec<f64> = times_ms.iter().map(|&t| t as f64 / 1000.0).collect();
    let policy = cfg
        .anchors
        .clone()
        .unwrap_or_else(|| AnchorPolicy::for_meta(&session.meta));
    let mask = policy.mask(&times_ms);
    let volts = session.voltages();
    let mut channels: [Vec<f64>; CHANNELS] = Default::default();
    for (ch, v) in volts.iter().enumerate() {
        let detrended = remove_baseline(v, &t_s, cfg.baseline_degree, &mask)?;
        channels[ch] = moving_average(&detrended.residual, cfg.window_m)?;
    }
    Ok(ProcessedSession {
        times_ms,
        channels,
        meta: session.meta.clone(),
    })
}

/// Processed session as CSV: a config comment, the session header, volts.
pub fn processed_to_csv(p: &ProcessedSession, cfg: &FilterConfig) -> String {
    let anchors = cfg
        .anchors
        .clone()
        .unwrap_or_else(|| AnchorPolicy::for_meta(&p.meta));
    let mut out = format!(
        "# preprocess window_m={} baseline_degree={} anchors={}\n{SESSION_HEADER}\n",
        cfg.window_m,
        cfg.baseline_degree,
        anchors.describe()
    );
    for (i, t) in p.times_ms.iter().enumerate() {
        let _ = write!(out, "{t}");
        for ch in &p.channels {
            let _ = write!(out, ",{}", ch[i]);
        }
        out.push('\n');
    }
    out
}

/// Reads the processed CSV written by [`processed_to_csv`].
pub fn processed_from_csv(text: &str, meta: SessionMeta) -> Result<ProcessedSession> {
    let mut times_ms = Vec::new();
    let mut channels: [Vec<f64>; CHANNELS] = Default::default();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == SESSION_HEADER {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != CHANNELS + 1 {
            return Err(Error::parse(idx + 1, format!("expected 5 fields, found {}", fields.len())));
        }
        let t = fields[0]
            .trim()
            .parse::<u64>()
            .map_err(|e| Error::parse(idx + 1, e.to_string()))?;
        if times_ms.last().is_some_and(|&prev| t <= prev) {
            return Err(Error::NonMonotoneTime {
                line: idx + 1,
                prev: *times_ms.last().unwrap(),
                next: t,
            });
        }
        times_ms.push(t);
        for ch in 0..CHANNELS {
            let v = fields[ch + 1]
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::parse(idx + 1, e.to_string()))?;
            channels[ch].push(v);
        }
    }
    if times_ms.is_empty() {
        return Err(Error::Empty("processed session has no rows".into()));
    }
    Ok(ProcessedSession {
        times_ms,
        channels,
        meta,
    })
}
