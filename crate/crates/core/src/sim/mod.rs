//! Seeded simulator of a four-channel metal-oxide sensor array.
//!
//! Each channel's resistance relaxes (first order) toward `R_air(t) / S`,
//! where `S` is the steady sensitivity to the current gas mixture and
//! `R_air(t)` drifts linearly. Resistance is read through a divider with a
//! load equal to the channel's clean-air resistance and quantized to 12 bits.

pub mod calibration;
mod dataset;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::acquisition::{ADC_FULL_SCALE, ADC_MAX, VREF};
use crate::config::FlatConfig;
use crate::error::{Error, Result};

pub use dataset::{generate_dataset, generate_sessions, generate_with_counts, session_seed};

pub const CHANNELS: usize = 4;

/// Gases handled by the array. Discriminants are the class label codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gas {
    Acetone = 1,
    Ethanol = 2,
    Methanol = 3,
}

impl Gas {
    pub const ALL: [Gas; 3] = [Gas::Acetone, Gas::Ethanol, Gas::Methanol];

    pub fn label(self) -> u8 {
        self as u8
    }

    pub fn from_label(label: u8) -> Option<Gas> {
        match label {
            1 => Some(Gas::Acetone),
            2 => Some(Gas::Ethanol),
            3 => Some(Gas::Methanol),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Gas::Acetone => "acetone",
            Gas::Ethanol => "ethanol",
            Gas::Methanol => "methanol",
        }
    }
}

/// Concentrations in ppm.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GasMixture {
    pub acetone_ppm: f64,
    pub ethanol_ppm: f64,
    pub methanol_ppm: f64,
}

impl GasMixture {
    pub fn new(acetone_ppm: f64, ethanol_ppm: f64, methanol_ppm: f64) -> Result<Self> {
        let m = Self {
            acetone_ppm,
            ethanol_ppm,
            methanol_ppm,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn clean_air() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (gas, c) in Gas::ALL.iter().zip(self.as_array()) {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::OutOfRange(format!(
                    "{} concentration {c} ppm",
                    gas.name()
                )));
            }
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.acetone_ppm, self.ethanol_ppm, self.methanol_ppm]
    }

    pub fn from_array(c: [f64; 3]) -> Self {
        Self {
            acetone_ppm: c[0],
            ethanol_ppm: c[1],
            methanol_ppm: c[2],
        }
    }

    pub fn concentration(&self, gas: Gas) -> f64 {
        self.as_array()[gas.index()]
    }

    pub fn is_clean_air(&self) -> bool {
        self.as_array().iter().all(|&c| c == 0.0)
    }

    /// Gas with the largest concentration; ties go to the lowest label code.
    /// `None` for clean air.
    pub fn dominant_gas(&self) -> Option<Gas> {
        if self.is_clean_air() {
            return None;
        }
        let c = self.as_array();
        let mut best = Gas::Acetone;
        for gas in Gas::ALL {
            if c[gas.index()] > c[best.index()] {
                best = gas;
            }
        }
        Some(best)
    }

    /// Swaps the concentrations of two gases.
    pub fn swapped(&self, a: Gas, b: Gas) -> Self {
        let mut c = self.as_array();
        c.swap(a.index(), b.index());
        Self::from_array(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub id: usize,
    /// Clean-air resistance, kΩ.
    pub r_air: f64,
    /// Power-law coefficient per gas (acetone, ethanol, methanol).
    pub sens_coeff: [f64; 3],
    /// Power-law exponent per gas, in (0, 1].
    pub sens_exp: [f64; 3],
    /// Response time constant, s.
    pub tau_rise: f64,
    /// Recovery time constant, s.
    pub tau_fall: f64,
    /// Baseline drift as a fraction of `r_air` per hour.
    pub drift_rate: f64,
    /// Standard deviation of the multiplicative per-sample noise.
    pub noise_sigma: f64,
}

impl SensorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("sensor {}: {what}", self.id)));
        if self.id >= CHANNELS {
            return bad("channel index must be 0..3");
        }
        if !(self.r_air > 0.0 && self.r_air.is_finite()) {
            return bad("r_air must be > 0");
        }
        if !(self.tau_rise > 0.0 && self.tau_fall > 0.0) {
            return bad("time constants must be > 0");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be >= 0");
        }
        if !self.drift_rate.is_finite() {
            return bad("drift_rate must be finite");
        }
        if self.sens_coeff.iter().any(|&a| !(a >= 0.0 && a.is_finite())) {
            return bad("sensitivity coefficients must be >= 0");
        }
        if self.sens_coeff.iter().all(|&a| a == 0.0) {
            return bad("at least one gas coefficient must be > 0");
        }
        if self.sens_exp.iter().any(|&b| !(b > 0.0 && b <= 1.0)) {
            return bad("sensitivity exponents must lie in (0, 1]");
        }
        Ok(())
    }

    /// Clean-air resistance after `t_s` seconds of drift.
    pub fn r_air_at(&self, t_s: f64) -> f64 {
        self.r_air * (1.0 + self.drift_rate * t_s / 3600.0)
    }

    /// Divider output for a sensor resistance, with the load equal to `r_air`.
    pub fn divider_voltage(&self, r_sensor: f64) -> f64 {
        VREF * self.r_air / (self.r_air + r_sensor)
    }
}

/// `S = 1 + Σ a_g · C_g^b_g`; exactly 1 in clean air.
pub fn steady_sensitivity(spec: &SensorSpec, mix: &GasMixture) -> f64 {
    let c = mix.as_array();
    1.0 + (0..3)
        .filter(|&g| c[g] > 0.0)
        .map(|g| spec.sens_coeff[g] * c[g].powf(spec.sens_exp[g]))
        .sum::<f64>()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub mixture: GasMixture,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExposureProtocol {
    pub phases: Vec<Phase>,
    pub sample_rate_hz: f64,
}

impl ExposureProtocol {
    /// Clean air, then `mixture` for `exposure_s`, then clean air to recover.
    pub fn exposure(mixture: GasMixture, timing: &SessionTiming, sample_rate_hz: f64) -> Self {
        Self {
            phases: vec![
                Phase {
                    mixture: GasMixture::clean_air(),
                    duration_s: timing.air_s,
                },
                Phase {
                    mixture,
                    duration_s: timing.exposure_s,
                },
                Phase {
                    mixture: GasMixture::clean_air(),
                    duration_s: timing.recovery_s,
                },
            ],
            sample_rate_hz,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::Empty("exposure protocol has no phases".into()));
        }
        // millisecond timestamps must stay strictly increasing
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz <= 1000.0) {
            return Err(Error::InvalidParameter(format!(
                "sample rate {} Hz outside (0, 1000]",
                self.sample_rate_hz
            )));
        }
        for p in &self.phases {
            if !(p.duration_s > 0.0 && p.duration_s.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "phase duration {} s must be > 0",
                    p.duration_s
                )));
            }
            p.mixture.validate()?;
        }
        Ok(())
    }

    pub fn total_duration_s(&self) -> f64 {
        self.phases.iter().map(|p| p.duration_s).sum()
    }

    pub fn total_samples(&self) -> usize {
        (self.total_duration_s() * self.sample_rate_hz).ceil() as usize
    }

    /// Index of the phase active at `t_s`; the final phase is closed on the right.
    pub fn phase_at(&self, t_s: f64) -> usize {
        let mut end = 0.0;
        for (i, p) in self.phases.iter().enumerate() {
            end += p.duration_s;
            if t_s < end {
                return i;
            }
        }
        self.phases.len() - 1
    }

    /// Start time of phase `i`, seconds.
    pub fn phase_start_s(&self, i: usize) -> f64 {
        self.phases[..i].iter().map(|p| p.duration_s).sum()
    }

    pub fn sample_time_s(&self, k: usize) -> f64 {
        k as f64 / self.sample_rate_hz
    }
}

/// Durations of the standard air / exposure / recovery protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionTiming {
    pub air_s: f64,
    pub exposure_s: f64,
    pub recovery_s: f64,
}

impl Default for SessionTiming {
    fn default() -> Self {
        Self {
            air_s: 20.0,
            exposure_s: 30.0,
            recovery_s: 60.0,
        }
    }
}

/// One sampled reading of all four channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SensorFrame {
    pub t_ms: u64,
    pub raw: [u16; CHANNELS],
}

/// Quantizes a voltage to the nearest 12-bit code.
pub fn quantize(volts: f64) -> u16 {
    let code = (volts / VREF * ADC_FULL_SCALE).round();
    code.clamp(0.0, ADC_MAX as f64) as u16
}

/// Noise-free resistance of one channel at every sample of the protocol.
pub fn resistance_trajectory(spec: &SensorSpec, proto: &ExposureProtocol) -> Vec<f64> {
    let n = proto.total_samples();
    let dt = 1.0 / proto.sample_rate_hz;
    let sens: Vec<f64> = proto
        .phases
        .iter()
        .map(|p| steady_sensitivity(spec, &p.mixture))
        .collect();
    let tau: Vec<f64> = (0..proto.phases.len())
        .map(|i| {
            let prev = if i == 0 { sens[0] } else { sens[i - 1] };
            if sens[i] > prev {
                spec.tau_rise
            } else {
                spec.tau_fall
            }
        })
        .collect();

    let mut out = Vec::with_capacity(n);
    let mut r = spec.r_air_at(0.0) / sens[0];
    for k in 0..n {
        let t = proto.sample_time_s(k);
        let phase = proto.phase_at(t);
        let target = spec.r_air_at(t) / sens[phase];
        if k > 0 {
            r = target + (r - target) * (-dt / tau[phase]).exp();
        }
        out.push(r);
    }
    out
}

/// Runs one session: relaxation dynamics, drift, multiplicative noise,
/// divider and 12-bit quantization. Output depends only on the arguments.
pub fn simulate_session(
    specs: &[SensorSpec; CHANNELS],
    proto: &ExposureProtocol,
    seed: u64,
) -> Result<Vec<SensorFrame>> {
    proto.validate()?;
    for s in specs {
        s.validate()?;
    }
    let trajectories: Vec<Vec<f64>> = specs
        .iter()
        .map(|s| resistance_trajectory(s, proto))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<Option<Normal<f64>>> = specs
        .iter()
        .map(|s| (s.noise_sigma > 0.0).then(|| Normal::new(1.0, s.noise_sigma).expect("sigma validated")))
        .collect();

    let n = proto.total_samples();
    let mut frames = Vec::with_capacity(n);
    for k in 0..n {
        let mut raw = [0u16; CHANNELS];
        for ch in 0..CHANNELS {
            let mut r = trajectories[ch][k];
            if let Some(dist) = &noise[ch] {
                // a negative draw would flip the divider; keep resistance positive
                r *= dist.sample(&mut rng).max(1e-6);
            }
            raw[ch] = quantize(specs[ch].divider_voltage(r));
        }
        let t_ms = (k as f64 * 1000.0 / proto.sample_rate_hz).round() as u64;
        frames.push(SensorFrame { t_ms, raw });
    }
    Ok(frames)
}

/// Full simulator configuration: the four channel specs plus session timing.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub specs: [SensorSpec; CHANNELS],
    pub timing: SessionTiming,
    pub sample_rate_hz: f64,
}

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 10.0;

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            specs: calibration::default_array(),
            timing: SessionTiming::default(),
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
        }
    }
}

const GAS_KEYS: [&str; 3] = ["acetone", "ethanol", "methanol"];

impl SimConfig {
    pub fn with_noise(mut self, sigma: f64) -> Self {
        for s in &mut self.specs {
            s.noise_sigma = sigma;
        }
        self
    }

    pub fn with_drift(mut self, rate: f64) -> Self {
        for s in &mut self.specs {
            s.drift_rate = rate;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.specs.iter().enumerate() {
            if s.id != i {
                return Err(Error::InvalidParameter(format!(
                    "sensor at position {i} has id {}",
                    s.id
                )));
            }
            s.validate()?;
        }
        let t = &self.timing;
        if !(t.air_s > 0.0 && t.exposure_s > 0.0 && t.recovery_s > 0.0) {
            return Err(Error::InvalidParameter("phase durations must be > 0".into()));
        }
        Ok(())
    }

    /// Applies overrides from a flat config on top of `self`.
    ///
    /// Global keys: `sample_rate_hz`, `air_s`, `exposure_s`, `recovery_s`,
    /// `noise_sigma`, `drift_rate`. Per channel: `sensor<N>.r_air`,
    /// `sensor<N>.a_<gas>`, `sensor<N>.b_<gas>`, `sensor<N>.tau_rise`,
    /// `sensor<N>.tau_fall`, `sensor<N>.drift_rate`, `sensor<N>.noise_sigma`.
    pub fn apply(mut self, cfg: &FlatConfig) -> Result<Self> {
        cfg.reject_unknown(is_sim_key)?;
        if let Some(v) = cfg.get("sample_rate_hz")? {
            self.sample_rate_hz = v;
        }
        if let Some(v) = cfg.get("air_s")? {
            self.timing.air_s = v;
        }
        if let Some(v) = cfg.get("exposure_s")? {
            self.timing.exposure_s = v;
        }
        if let Some(v) = cfg.get("recovery_s")? {
            self.timing.recovery_s = v;
        }
        if let Some(v) = cfg.get("noise_sigma")? {
            self = self.with_noise(v);
        }
        if let Some(v) = cfg.get("drift_rate")? {
            self = self.with_drift(v);
        }
        for (i, spec) in self.specs.iter_mut().enumerate() {
            let key = |name: &str| format!("sensor{i}.{name}");
            if let Some(v) = cfg.get(&key("r_air"))? {
                spec.r_air = v;
            }
            if let Some(v) = cfg.get(&key("tau_rise"))? {
                spec.tau_rise = v;
            }
            if let Some(v) = cfg.get(&key("tau_fall"))? {
                spec.tau_fall = v;
            }
            if let Some(v) = cfg.get(&key("drift_rate"))? {
                spec.drift_rate = v;
            }
            if let Some(v) = cfg.get(&key("noise_sigma"))? {
                spec.noise_sigma = v;
            }
            for (g, gas) in GAS_KEYS.iter().enumerate() {
                if let Some(v) = cfg.get(&key(&format!("a_{gas}")))? {
                    spec.sens_coeff[g] = v;
                }
                if let Some(v) = cfg.get(&key(&format!("b_{gas}")))? {
                    spec.sens_exp[g] = v;
                }
            }
        }
        self.validate()?;
        Ok(self)
    }
}

fn is_sim_key(k: &str) -> bool {
    const GLOBAL: [&str; 6] = [
        "sample_rate_hz",
        "air_s",
        "exposure_s",
        "recovery_s",
        "noise_sigma",
        "drift_rate",
    ];
    if GLOBAL.contains(&k) {
        return true;
    }
    let Some((sensor, field)) = k.split_once('.') else {
        return false;
    };
    let valid_sensor = sensor
        .strip_prefix("sensor")
        .and_then(|n| n.parse::<usize>().ok())
        .is_some_and(|n| n < CHANNELS);
    let valid_field = matches!(field, "r_air" | "tau_rise" | "tau_fall" | "drift_rate" | "noise_sigma")
        || GAS_KEYS
            .iter()
            .any(|g| field == format!("a_{g}") || field == format!("b_{g}"));
    valid_sensor && valid_field
}
