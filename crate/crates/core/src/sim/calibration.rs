//! Canonical response curves for the default array and the power-law fit
//! that turns them into `SensorSpec` coefficients.
//!
//! Each (sensor, gas) pair has a saturating target curve
//! `S(C) = 1 + s_max · C / (C + c_half)`, sampled on the concentration
//! gradients used for sensitivity testing. The simulator's additive model
//! `S = 1 + a · C^b` is least-squares fitted to those samples.

use super::{SensorSpec, CHANNELS};

/// Acetone test gradient, ppm.
pub const ACETONE_GRADIENT_PPM: [f64; 12] = [
    1.0, 2.0, 4.0, 6.0, 8.0, 10.0, 20.0, 50.0, 100.0, 150.0, 200.0, 300.0,
];

/// Ethanol and methanol test gradient, ppm.
pub const ALCOHOL_GRADIENT_PPM: [f64; 6] = [1.0, 10.0, 20.0, 50.0, 100.0, 200.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetCurve {
    pub s_max: f64,
    pub c_half: f64,
}

impl TargetCurve {
    pub fn sensitivity(&self, ppm: f64) -> f64 {
        1.0 + self.s_max * ppm / (ppm + self.c_half)
    }

    pub fn samples(&self, gradient: &[f64]) -> Vec<(f64, f64)> {
        gradient.iter().map(|&c| (c, self.sensitivity(c))).collect()
    }
}

/// Target curves per sensor, per gas (acetone, ethanol, methanol).
///
/// Channel 0 is the TiO2-like acetone sensor; channel 1 leans to ethanol,
/// channel 2 to methanol, channel 3 responds broadly to alcohols.
pub const TARGET_CURVES: [[TargetCurve; 3]; CHANNELS] = [
    [
        TargetCurve { s_max: 12.0, c_half: 60.0 },
        TargetCurve { s_max: 2.0, c_half: 80.0 },
        TargetCurve { s_max: 1.5, c_half: 100.0 },
    ],
    [
        TargetCurve { s_max: 2.5, c_half: 80.0 },
        TargetCurve { s_max: 9.0, c_half: 50.0 },
        TargetCurve { s_max: 3.0, c_half: 90.0 },
    ],
    [
        TargetCurve { s_max: 2.0, c_half: 90.0 },
        TargetCurve { s_max: 3.0, c_half: 80.0 },
        TargetCurve { s_max: 8.0, c_half: 60.0 },
    ],
    [
        TargetCurve { s_max: 3.0, c_half: 70.0 },
        TargetCurve { s_max: 6.0, c_half: 60.0 },
        TargetCurve { s_max: 5.0, c_half: 70.0 },
    ],
];

pub const R_AIR_KOHM: [f64; CHANNELS] = [50.0, 20.0, 30.0, 40.0];
pub const DEFAULT_TAU_RISE_S: f64 = 4.0;
pub const DEFAULT_TAU_FALL_S: f64 = 10.0;
pub const DEFAULT_DRIFT_RATE: f64 = 0.2;
pub const DEFAULT_NOISE_SIGMA: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub coeff: f64,
    pub exponent: f64,
    /// Sum of squared residuals in sensitivity units.
    pub sse: f64,
}

impl PowerLawFit {
    pub fn sensitivity(&self, ppm: f64) -> f64 {
        1.0 + self.coeff * ppm.powf(self.exponent)
    }
}

const EXP_LO: f64 = 0.01;
const EXP_HI: f64 = 1.0;

/// Best nonnegative coefficient for a fixed exponent, with its SSE.
fn profile(points: &[(f64, f64)], exponent: f64) -> (f64, f64) {
    let (num, den) = points.iter().fold((0.0, 0.0), |(n, d), &(c, s)| {
        let p = c.powf(exponent);
        (n + p * (s - 1.0), d + p * p)
    });
    let coeff = if den > 0.0 { (num / den).max(0.0) } else { 0.0 };
    let sse = points
        .iter()
        .map(|&(c, s)| {
            let r = 1.0 + coeff * c.powf(exponent) - s;
            r * r
        })
        .sum();
    (coeff, sse)
}

/// Least-squares fit of `S = 1 + a · C^b`, `a >= 0`, `b` in (0, 1].
///
/// The coefficient is solved in closed form for each exponent; the exponent
/// is bracketed on a coarse grid and refined by golden-section search.
pub fn fit_power_law(points: &[(f64, f64)]) -> PowerLawFit {
    const GRID: usize = 200;
    let grid_b = |i: usize| EXP_LO + (EXP_HI - EXP_LO) * i as f64 / GRID as f64;
    let best_i = (0..=GRID)
        .min_by(|&i, &j| {
            profile(points, grid_b(i))
                .1
                .total_cmp(&profile(points, grid_b(j)).1)
        })
        .unwrap_or(GRID);

    let mut lo = grid_b(best_i.saturating_sub(1));
    let mut hi = grid_b((best_i + 1).min(GRID));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = profile(points, x1).1;
    let mut f2 = profile(points, x2).1;
    for _ in 0..100 {
        if hi - lo < 1e-13 {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = profile(points, x1).1;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = profile(points, x2).1;
        }
    }
    let exponent = 0.5 * (lo + hi);
    let (coeff, sse) = profile(points, exponent);
    PowerLawFit {
        coeff,
        exponent,
        sse,
    }
}

/// Fitted power law for one (sensor, gas) target curve.
pub fn fit_target(channel: usize, gas: usize) -> PowerLawFit {
    let gradient: &[f64] = if gas == 0 {
        &ACETONE_GRADIENT_PPM
    } else {
        &ALCOHOL_GRADIENT_PPM
    };
    fit_power_law(&TARGET_CURVES[channel][gas].samples(gradient))
}

/// The default four-channel array, with coefficients fitted to `TARGET_CURVES`.
pub fn default_array() -> [SensorSpec; CHANNELS] {
    std::array::from_fn(|id| {
        let fits: [PowerLawFit; 3] = std::array::from_fn(|g| fit_target(id, g));
        SensorSpec {
            id,
            r_air: R_AIR_KOHM[id],
            sens_coeff: fits.map(|f| f.coeff),
            sens_exp: fits.map(|f| f.exponent),
            tau_rise: DEFAULT_TAU_RISE_S,
            tau_fall: DEFAULT_TAU_FALL_S,
            drift_rate: DEFAULT_DRIFT_RATE,
            noise_sigma: DEFAULT_NOISE_SIGMA,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let pts: Vec<(f64, f64)> = ACETONE_GRADIENT_PPM
            .iter()
            .map(|&c| (c, 1.0 + 0.8 * c.powf(0.45)))
            .collect();
        let fit = fit_power_law(&pts);
        assert!((fit.coeff - 0.8).abs() < 1e-6, "{fit:?}");
        assert!((fit.exponent - 0.45).abs() < 1e-6, "{fit:?}");
    }

    #[test]
    fn default_array_is_valid_and_concave() {
        for spec in default_array() {
            spec.validate().unwrap();
            for b in spec.sens_exp {
                assert!(b < 1.0);
            }
        }
    }

    #[test]
    fn acetone_sensor_prefers_acetone() {
        let specs = default_array();
        let fifty = |gas: usize| specs[0].sens_coeff[gas] * 50f64.powf(specs[0].sens_exp[gas]);
        assert!(fifty(0) > 3.0 * fifty(1));
        assert!(fifty(0) > 3.0 * fifty(2));
    }
}
