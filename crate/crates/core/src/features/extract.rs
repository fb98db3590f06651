//! Response-curve features: per channel the steady response level, the
//! maximum rise rate and the area above baseline over the exposure phase.

use std::fmt::Write as _;

use crate::acquisition::ExposureWindow;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::preprocess::ProcessedSession;
use crate::sim::{GasMixture, CHANNELS};

pub const FEATURES_PER_CHANNEL: usize = 3;
pub const FEATURE_DIM: usize = CHANNELS * FEATURES_PER_CHANNEL;
/// Trailing fraction of the exposure phase averaged for the steady level.
pub const STEADY_FRACTION: f64 = 0.25;

pub const FEATURE_HEADER: &str =
    "f1,f2,f3,f4,f5,f6,f7,f8,f9,f10,f11,f12,label,acetone_ppm,ethanol_ppm,methanol_ppm";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    /// `[steady, slope, area]` for channel 0, then channel 1, ...
    pub values: [f64; FEATURE_DIM],
    pub label: u8,
    pub mixture: Option<GasMixture>,
}

impl FeatureVector {
    pub fn acetone_ppm(&self) -> Option<f64> {
        self.mixture.map(|m| m.acetone_ppm)
    }
}

pub fn extract_features(session: &ProcessedSession) -> Result<FeatureVector> {
    let window = session.meta.exposure.ok_or_else(|| {
        Error::InvalidParameter("session has no identified exposure phase".into())
    })?;
    extract_with_window(session, window)
}

pub fn extract_with_window(session: &ProcessedSession, window: ExposureWindow) -> Result<FeatureVector> {
    let t = &session.times_ms;
    if window.end_ms <= window.start_ms {
        return Err(Error::InvalidParameter(format!(
            "exposure window {}..{} ms is empty",
            window.start_ms, window.end_ms
        )));
    }
    let period_ms = (1000.0 / session.meta.sample_rate_hz).round() as u64;
    let covers = t.first().is_some_and(|&t0| t0 <= window.start_ms)
        && t.last().is_some_and(|&t1| t1 + period_ms >= window.end_ms);
    if !covers {
        return Err(Error::InvalidParameter(format!(
            "session ({} samples) does not cover the exposure phase {}..{} ms",
            t.len(),
            window.start_ms,
            window.end_ms
        )));
    }
    let first = t.partition_point(|&x| x < window.start_ms);
    let end = t.partition_point(|&x| x < window.end_ms);
    if first >= end {
        return Err(Error::InvalidParameter("no samples inside the exposure phase".into()));
    }

    let mut values = [0.0; FEATURE_DIM];
    for (ch, v) in session.channels.iter().enumerate() {
        let base = if first > 0 {
            v[..first].iter().sum::<f64>() / first as f64
        } else {
            v[first]
        };
        let exposure = &v[first..end];
        let tail = ((exposure.len() as f64 * STEADY_FRACTION).ceil() as usize).max(1);
        let steady = exposure[exposure.len() - tail..].iter().sum::<f64>() / tail as f64;

        let from = first.saturating_sub(1);
        let slope = (from..end - 1)
            .map(|k| (v[k + 1] - v[k]) * 1000.0 / (t[k + 1] - t[k]) as f64)
            .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))))
            .unwrap_or(0.0);

        let area = (first..end - 1)
            .map(|k| {
                let dt = (t[k + 1] - t[k]) as f64 / 1000.0;
                0.5 * ((v[k] - base) + (v[k + 1] - base)) * dt
            })
            .sum::<f64>();

        values[ch * FEATURES_PER_CHANNEL] = steady;
        values[ch * FEATURES_PER_CHANNEL + 1] = slope;
        values[ch * FEATURES_PER_CHANNEL + 2] = area;
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("non-finite feature".into()));
    }
    Ok(FeatureVector {
        values,
        label: session.meta.label,
        mixture: session.meta.mixture,
    })
}

pub fn feature_matrix(features: &[FeatureVector]) -> Matrix<f64> {
    let data = features.iter().flat_map(|f| f.values).collect();
    Matrix::from_vec(features.len(), FEATURE_DIM, data).expect("fixed feature width")
}

pub fn features_to_csv(features: &[FeatureVector]) -> String {
    let mut out = String::from(FEATURE_HEADER);
    out.push('\n');
    for f in features {
        for v in f.values {
            let _ = write!(out, "{v},");
        }
        let _ = write!(out, "{}", f.label);
        match f.mixture {
            Some(m) => {
                let _ = writeln!(out, ",{},{},{}", m.acetone_ppm, m.ethanol_ppm, m.methanol_ppm);
            }
            None => out.push_str(",,,\n"),
        }
    }
    out
}

pub fn features_from_csv(text: &str) -> Result<Vec<FeatureVector>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| {
        let l = l.trim();
        !l.is_empty() && !l.starts_with('#')
    });
    match lines.next() {
        Some((_, h)) if h.trim() == FEATURE_HEADER => {}
        Some((i, h)) => return Err(Error::parse(i + 1, format!("unexpected header `{h}`"))),
        None => return Err(Error::Empty("feature file is empty".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != FEATURE_DIM + 4 {
            return Err(Error::parse(i + 1, format!("expected {} fields, found {}", FEATURE_DIM + 4, fields.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::parse(i + 1, format!("`{s}`: {e}")));
        let mut values = [0.0; FEATURE_DIM];
        for (j, v) in values.iter_mut().enumerate() {
            *v = num(fields[j])?;
        }
        let label = fields[FEATURE_DIM]
            .parse::<u8>()
            .ok()
            .filter(|&l| l <= 3)
            .ok_or_else(|| Error::parse(i + 1, format!("bad label `{}`", fields[FEATURE_DIM])))?;
        let conc = &fields[FEATURE_DIM + 1..];
        let mixture = if conc.iter().all(|s| s.is_empty()) {
            None
        } else {
            let m = GasMixture::from_array([num(conc[0])?, num(conc[1])?, num(conc[2])?]);
            m.validate()?;
            Some(m)
        };
        out.push(FeatureVector {
            values,
            label,
            mixture,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::SessionMeta;

    fn session(channels: [Vec<f64>; CHANNELS], start: u64, end: u64) -> ProcessedSession {
        let n = channels[0].len();
        ProcessedSession {
            times_ms: (0..n as u64).map(|k| k * 100).collect(),
            channels,
            meta: SessionMeta {
                label: 1,
                mixture: None,
                sample_rate_hz: 10.0,
                exposure: Some(ExposureWindow { start_ms: start, end_ms: end }),
            },
        }
    }

    #[test]
    fn flat_session_has_zero_slope_and_area() {
        let s = session(std::array::from_fn(|_| vec![1.65; 100]), 2000, 5000);
        let f = extract_features(&s).unwrap();
        for ch in 0..CHANNELS {
            assert!((f.values[ch * 3] - 1.65).abs() < 1e-12);
            assert_eq!(f.values[ch * 3 + 1], 0.0);
            assert!(f.values[ch * 3 + 2].abs() < 1e-12);
        }
    }

    #[test]
    fn ramp_features() {
        // 0 before 1 s, rising 1 V/s during exposure 1..3 s
        let v: Vec<f64> = (0..40)
            .map(|k| {
                let t = k as f64 * 0.1;
                if t < 1.0 { 0.0 } else { (t - 1.0).min(2.0) }
            })
            .collect();
        let s = session(std::array::from_fn(|_| v.clone()), 1000, 3000);
        let f = extract_features(&s).unwrap();
        assert!((f.values[1] - 1.0).abs() < 1e-9);
        // samples 1.0..=2.9 s of a unit ramp: 1.9^2 / 2
        assert!((f.values[2] - 1.805).abs() < 1e-9);
    }

    #[test]
    fn short_session_rejected() {
        let s = session(std::array::from_fn(|_| vec![0.0; 30]), 2000, 5000);
        assert!(extract_features(&s).is_err());
        let mut no_window = session(std::array::from_fn(|_| vec![0.0; 30]), 0, 1);
        no_window.meta.exposure = None;
        assert!(extract_features(&no_window).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let f = FeatureVector {
            values: std::array::from_fn(|i| i as f64 * 0.1 - 0.3),
            label: 2,
            mixture: Some(GasMixture::from_array([0.5, 49.5, 0.0])),
        };
        let g = FeatureVector { mixture: None, label: 0, ..f.clone() };
        let text = features_to_csv(&[f.clone(), g.clone()]);
        assert_eq!(features_from_csv(&text).unwrap(), vec![f, g]);
    }

    #[test]
    fn csv_header_checked() {
        assert!(features_from_csv("a,b\n1,2\n").is_err());
    }
}
