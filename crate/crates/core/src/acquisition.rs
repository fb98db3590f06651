//! Raw frame ingestion, ADC conversion, gap filling, and the session CSV and
//! `.meta` sidecar formats.
//!
//! Wire/file format, one frame per line:
//!
//! ```text
//! t_ms,raw1,raw2,raw3,raw4
//! 0,2048,2051,2047,2049
//! 100,2050,2049,,2046
//! ```
//!
//! The header line and `#` comments are skipped. An empty raw field is a
//! missing sample and is filled by [`impute_missing`]; any other deviation
//! (field count, non-integer, code above 4095) marks the line malformed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sim::{GasMixture, SensorFrame, SessionTiming, CHANNELS};

/// ADC reference voltage.
pub const VREF: f64 = 3.3;
/// 12-bit conversion: codes are divided by 4096.
pub const ADC_FULL_SCALE: f64 = 4096.0;
pub const ADC_MAX: u16 = 4095;

pub const SESSION_HEADER: &str = "t_ms,raw1,raw2,raw3,raw4";

/// Largest tolerated fraction of malformed lines.
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

/// Converts a 12-bit code to volts: `raw * 3.3 / 4096`.
pub fn adc_to_voltage(raw: u32) -> Result<f64> {
    if raw > u32::from(ADC_MAX) {
        return Err(Error::OutOfRange(format!("ADC code {raw} exceeds {ADC_MAX}")));
    }
    Ok(f64::from(raw) * VREF / ADC_FULL_SCALE)
}

/// Exposure phase boundaries within a session, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExposureWindow {
    pub start_ms: u64,
    pub end_ms: u64,
}

impl ExposureWindow {
    pub fn from_timing(t: &SessionTiming) -> Self {
        Self {
            start_ms: (t.air_s * 1000.0).round() as u64,
            end_ms: ((t.air_s + t.exposure_s) * 1000.0).round() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionMeta {
    /// 0 = unknown, 1 = acetone, 2 = ethanol, 3 = methanol.
    pub label: u8,
    pub mixture: Option<GasMixture>,
    pub sample_rate_hz: f64,
    pub exposure: Option<ExposureWindow>,
}

impl Default for SessionMeta {
    fn default() -> Self {
        Self {
            label: 0,
            mixture: None,
            sample_rate_hz: crate::sim::DEFAULT_SAMPLE_RATE_HZ,
            exposure: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub frames: Vec<SensorFrame>,
    pub meta: SessionMeta,
}

impl Session {
    pub fn new(frames: Vec<SensorFrame>, meta: SessionMeta) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Empty("session has no frames".into()));
        }
        if meta.label > 3 {
            return Err(Error::OutOfRange(format!("label {}", meta.label)));
        }
        for (i, w) in frames.windows(2).enumerate() {
            if w[1].t_ms <= w[0].t_ms {
                return Err(Error::NonMonotoneTime {
                    line: i + 2,
                    prev: w[0].t_ms,
                    next: w[1].t_ms,
                });
            }
        }
        if let Some(f) = frames.iter().find(|f| f.raw.iter().any(|&r| r > ADC_MAX)) {
            return Err(Error::OutOfRange(format!("frame at {} ms: {:?}", f.t_ms, f.raw)));
        }
        Ok(Self { frames, meta })
    }

    pub fn times_ms(&self) -> Vec<u64> {
        self.frames.iter().map(|f| f.t_ms).collect()
    }

    /// Channel voltages, one vector per channel.
    pub fn voltages(&self) -> [Vec<f64>; CHANNELS] {
        std::array::from_fn(|ch| {
            self.frames
                .iter()
                .map(|f| f64::from(f.raw[ch]) * VREF / ADC_FULL_SCALE)
                .collect()
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MalformedLine {
    pub line: usize,
    pub reason: String,
}

/// What ingestion saw besides the frames themselves.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IngestReport {
    /// Non-blank data lines examined (header and comments excluded).
    pub data_lines: usize,
    pub malformed: Vec<MalformedLine>,
    /// Missing samples filled per channel.
    pub imputed: [usize; CHANNELS],
}

type RawRow = (u64, [Option<u16>; CHANNELS]);

fn parse_line(line: &str) -> std::result::Result<RawRow, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != CHANNELS + 1 {
        return Err(format!("expected 5 fields, found {}", fields.len()));
    }
    let t_ms = fields[0]
        .parse::<u64>()
        .map_err(|e| format!("timestamp `{}`: {e}", fields[0]))?;
    let mut raw = [None; CHANNELS];
    for (ch, f) in fields[1..].iter().enumerate() {
        if f.is_empty() {
            continue;
        }
        let v = f
            .parse::<u32>()
            .map_err(|e| format!("raw{} `{f}`: {e}", ch + 1))?;
        if v > u32::from(ADC_MAX) {
            return Err(format!("raw{} = {v} outside 12-bit range", ch + 1));
        }
        raw[ch] = Some(v as u16);
    }
    Ok((t_ms, raw))
}

/// Parses a frame stream into a session.
///
/// Rejects the stream when more than 10% of data lines are malformed or
/// when timestamps of well-formed lines are not strictly increasing.
pub fn parse_stream<I, S>(lines: I, meta: SessionMeta) -> Result<(Session, IngestReport)>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut report = IngestReport::default();
    let mut rows: Vec<RawRow> = Vec::new();
    let mut last: Option<(usize, u64)> = None;

    for (idx, line) in lines.into_iter().enumerate() {
        let line_no = idx + 1;
        let text = line.as_ref().trim();
        if text.is_empty() || text.starts_with('#') || text == SESSION_HEADER {
            continue;
        }
        report.data_lines += 1;
        match parse_line(text) {
            Ok(row) => {
                if let Some((_, prev)) = last {
                    if row.0 <= prev {
                        return Err(Error::NonMonotoneTime {
                            line: line_no,
                            prev,
                            next: row.0,
                        });
                    }
                }
                last = Some((line_no, row.0));
                rows.push(row);
            }
            Err(reason) => report.malformed.push(MalformedLine {
                line: line_no,
                reason,
            }),
        }
    }

    if report.data_lines == 0 {
        return Err(Error::Empty("stream has no data lines".into()));
    }
    let bad = report.malformed.len();
    if bad as f64 > MAX_MALFORMED_FRACTION * report.data_lines as f64 {
        let first = &report.malformed[0];
        return Err(Error::MalformedStream {
            malformed: bad,
            total: report.data_lines,
            first: format!("line {}: {}", first.line, first.reason),
        });
    }

    let mut filled: [Vec<u16>; CHANNELS] = Default::default();
    for ch in 0..CHANNELS {
        let series: Vec<Option<f64>> = rows.iter().map(|r| r.1[ch].map(f64::from)).collect();
        report.imputed[ch] = series.iter().filter(|v| v.is_none()).count();
        let complete = impute_missing(&series).map_err(|e| match e {
            Error::AllMissing(_) => Error::AllMissing(ch),
            other => other,
        })?;
        // means of integer codes are half-integers at worst; round half up
        filled[ch] = complete.iter().map(|v| v.round() as u16).collect();
    }
    let frames = rows
        .iter()
        .enumerate()
        .map(|(i, r)| SensorFrame {
            t_ms: r.0,
            raw: std::array::from_fn(|ch| filled[ch][i]),
        })
        .collect();
    Ok((Session::new(frames, meta)?, report))
}

/// Fills gaps with the mean of the nearest present values on either side;
/// gaps at the ends copy their single neighbor.
pub fn impute_missing<T: Scalar>(series: &[Option<T>]) -> Result<Vec<T>> {
    let present: Vec<usize> = series
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|_| i))
        .collect();
    if present.is_empty() {
        return Err(Error::AllMissing(0));
    }
    let two = T::lit(2.0);
    let mut out = Vec::with_capacity(series.len());
    let mut next = 0; // index into `present` of the first present >= i
    for (i, v) in series.iter().enumerate() {
        while next < present.len() && present[next] < i {
            next += 1;
        }
        let value = match v {
            Some(x) => *x,
            None => {
                let left = next.checked_sub(1).map(|k| series[present[k]].unwrap());
                let right = present.get(next).map(|&k| series[k].unwrap());
                match (left, right) {
                    (Some(l), Some(r)) => (l + r) / two,
                    (Some(l), None) => l,
                    (None, Some(r)) => r,
                    (None, None) => unreachable!("at least one present value"),
                }
            }
        };
        out.push(value);
    }
    Ok(out)
}

pub fn session_to_csv(session: &Session) -> String {
    let mut out = String::with_capacity(session.frames.len() * 24);
    out.push_str(SESSION_HEADER);
    out.push('\n');
    for f in &session.frames {
        let [a, b, c, d] = f.raw;
        let _ = writeln!(out, "{},{a},{b},{c},{d}", f.t_ms);
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn meta_to_text(meta: &SessionMeta) -> String {
    let m = meta.mixture;
    let mut out = format!(
        "label={}\nacetone_ppm={}\nethanol_ppm={}\nmethanol_ppm={}\nsample_rate_hz={}\n",
        meta.label,
        fmt_opt(m.map(|m| m.acetone_ppm)),
        fmt_opt(m.map(|m| m.ethanol_ppm)),
        fmt_opt(m.map(|m| m.methanol_ppm)),
        meta.sample_rate_hz
    );
    if let Some(w) = meta.exposure {
        let _ = write!(out, "exposure_start_ms={}\nexposure_end_ms={}\n", w.start_ms, w.end_ms);
    }
    out
}

pub fn parse_meta(text: &str) -> Result<SessionMeta> {
    let mut meta = SessionMeta::default();
    let mut conc: [Option<f64>; 3] = [None; 3];
    let (mut start, mut end) = (None, None);
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(idx + 1, format!("expected key=value, got `{line}`")))?;
        let v = v.trim();
        let num = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|e| Error::parse(idx + 1, format!("{k}: {e}")))
        };
        let opt = |v: &str| -> Result<Option<f64>> {
            if v.is_empty() {
                Ok(None)
            } else {
                num(v).map(Some)
            }
        };
        match k.trim() {
            "label" => {
                meta.label = v
                    .parse::<u8>()
                    .ok()
                    .filter(|&l| l <= 3)
                    .ok_or_else(|| Error::parse(idx + 1, format!("label `{v}` not in 0..3")))?
            }
            "acetone_ppm" => conc[0] = opt(v)?,
            "ethanol_ppm" => conc[1] = opt(v)?,
            "methanol_ppm" => conc[2] = opt(v)?,
            "sample_rate_hz" => meta.sample_rate_hz = num(v)?,
            "exposure_start_ms" => start = Some(num(v)? as u64),
            "exposure_end_ms" => end = Some(num(v)? as u64),
            other => return Err(Error::parse(idx + 1, format!("unknown key `{other}`"))),
        }
    }
    if conc.iter().any(Option::is_some) {
        let m = GasMixture::from_array(conc.map(|c| c.unwrap_or(0.0)));
        m.validate()?;
        meta.mixture = Some(m);
    }
    if let (Some(start_ms), Some(end_ms)) = (start, end) {
        meta.exposure = Some(ExposureWindow { start_ms, end_ms });
    }
    if !(meta.sample_rate_hz > 0.0) {
        return Err(Error::InvalidParameter("sample_rate_hz must be > 0".into()));
    }
    Ok(meta)
}

pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

/// Writes `<name>.csv` and its `<name>.meta` sidecar.
pub fn save_session(session: &Session, csv: &Path) -> Result<()> {
    std::fs::write(csv, session_to_csv(session)).map_err(|e| Error::io(csv.display().to_string(), e))?;
    let meta = meta_path(csv);
    std::fs::write(&meta, meta_to_text(&session.meta))
        .map_err(|e| Error::io(meta.display().to_string(), e))
}

/// Reads a session CSV; the sidecar is optional (defaults when absent).
pub fn load_session(csv: &Path) -> Result<(Session, IngestReport)> {
    let text =
        std::fs::read_to_string(csv).map_err(|e| Error::io(csv.display().to_string(), e))?;
    let mp = meta_path(csv);
    let meta = match std::fs::read_to_string(&mp) {
        Ok(m) => parse_meta(&m)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => SessionMeta::default(),
        Err(e) => return Err(Error::io(mp.display().to_string(), e)),
    };
    parse_stream(text.lines(), meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adc_examples() {
        assert_eq!(adc_to_voltage(0).unwrap(), 0.0);
        assert_eq!(adc_to_voltage(2048).unwrap(), 1.65);
        assert_eq!(adc_to_voltage(4095).unwrap(), 3.2991943359375);
        assert!(matches!(adc_to_voltage(4096), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn parses_single_frame() {
        let (s, rep) = parse_stream(["0,100,200,300,400"], SessionMeta::default()).unwrap();
        assert_eq!(s.frames, vec![SensorFrame { t_ms: 0, raw: [100, 200, 300, 400] }]);
        assert!(rep.malformed.is_empty());
    }

    #[test]
    fn out_of_range_code_is_malformed() {
        let mut lines: Vec<String> = (0..20).map(|i| format!("{i},1,2,3,4")).collect();
        lines.push("20,100,200,300,4096".into());
        let (s, rep) = parse_stream(&lines, SessionMeta::default()).unwrap();
        assert_eq!(s.frames.len(), 20);
        assert_eq!(rep.malformed.len(), 1);
        assert_eq!(rep.malformed[0].line, 21);
    }

    #[test]
    fn too_many_malformed_rejected_with_counts() {
        let lines: Vec<String> = (0..100)
            .map(|i| if i % 7 == 3 && i < 105 { format!("{i},x,2,3,4") } else { format!("{i},1,2,3,4") })
            .collect();
        let bad = lines.iter().filter(|l| l.contains('x')).count();
        assert!(bad as f64 / 100.0 > 0.10);
        match parse_stream(&lines, SessionMeta::default()) {
            Err(Error::MalformedStream { malformed, total, .. }) => {
                assert_eq!((malformed, total), (bad, 100))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fifteen_of_hundred_rejected_ten_accepted() {
        let make = |n_bad: usize| -> Vec<String> {
            (0..100)
                .map(|i| if i < n_bad { "garbage".to_string() } else { format!("{i},1,2,3,4") })
                .collect()
        };
        assert!(matches!(
            parse_stream(make(15), SessionMeta::default()),
            Err(Error::MalformedStream { malformed: 15, total: 100, .. })
        ));
        assert!(parse_stream(make(10), SessionMeta::default()).is_ok());
    }

    #[test]
    fn non_monotone_time_rejected() {
        let r = parse_stream(["0,1,1,1,1", "100,1,1,1,1", "100,1,1,1,1"], SessionMeta::default());
        assert!(matches!(r, Err(Error::NonMonotoneTime { line: 3, .. })));
    }

    #[test]
    fn header_comments_and_blanks_skipped() {
        let text = "t_ms,raw1,raw2,raw3,raw4\n# note\n\n0,1,2,3,4\n\n10,5,6,7,8\n";
        let (s, rep) = parse_stream(text.lines(), SessionMeta::default()).unwrap();
        assert_eq!(s.frames.len(), 2);
        assert_eq!(rep.data_lines, 2);
    }

    #[test]
    fn empty_fields_are_imputed() {
        let (s, rep) = parse_stream(["0,10,1,1,1", "1,,1,1,1", "2,30,1,1,1"], SessionMeta::default()).unwrap();
        assert_eq!(s.frames[1].raw[0], 20);
        assert_eq!(rep.imputed, [1, 0, 0, 0]);
    }

    #[test]
    fn all_missing_channel_rejected() {
        let r = parse_stream(["0,1,,1,1", "1,1,,1,1"], SessionMeta::default());
        assert!(matches!(r, Err(Error::AllMissing(1))));
    }

    #[test]
    fn impute_examples() {
        assert_eq!(impute_missing(&[Some(1.0), None, Some(3.0)]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(impute_missing(&[None, Some(5.0), Some(5.0)]).unwrap(), vec![5.0, 5.0, 5.0]);
        assert_eq!(
            impute_missing(&[Some(2.0), None, None, Some(6.0)]).unwrap(),
            vec![2.0, 4.0, 4.0, 6.0]
        );
        assert_eq!(impute_missing(&[Some(2.0), None]).unwrap(), vec![2.0, 2.0]);
        assert!(impute_missing::<f64>(&[None, None]).is_err());
    }

    #[test]
    fn meta_round_trip() {
        let meta = SessionMeta {
            label: 2,
            mixture: Some(GasMixture::new(0.5, 49.5, 0.0).unwrap()),
            sample_rate_hz: 10.0,
            exposure: Some(ExposureWindow { start_ms: 20_000, end_ms: 50_000 }),
        };
        let text = meta_to_text(&meta);
        assert!(text.starts_with("label=2\nacetone_ppm=0.5\nethanol_ppm=49.5\nmethanol_ppm=0\nsample_rate_hz=10\n"));
        assert_eq!(parse_meta(&text).unwrap(), meta);
        let unknown = parse_meta("label=0\nacetone_ppm=\nethanol_ppm=\nmethanol_ppm=\nsample_rate_hz=10\n").unwrap();
        assert_eq!(unknown.mixture, None);
    }

    #[test]
    fn meta_rejects_bad_label() {
        assert!(parse_meta("label=7\n").is_err());
    }
}
