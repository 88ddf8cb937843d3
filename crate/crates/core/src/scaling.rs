//! Finite-size scaling: power-law fits `value = kappa L^d_a`, detection of a
//! multiplicative `ln L` correction, and the critical-exponent relation
//! `d_a = 2d + 2 zeta - 2 Delta_V`.

use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_FIT_SAMPLES: usize = 4;
pub const MIN_LOG_SAMPLES: usize = 6;
/// Minimum `L_max / L_min` for log-correction detection.
pub const MIN_LOG_SPAN: f64 = 100.0;
/// The log model must shrink the maximal log-residual by this factor to win.
pub const LOG_CORRECTION_FACTOR: f64 = 2.0;
/// Window selection stops once dropping the smallest size moves `d_a` less than this.
pub const WINDOW_TOL: f64 = 0.005;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalingSample {
    pub size: f64,
    pub value: f64,
}

impl ScalingSample {
    pub fn new(size: f64, value: f64) -> Result<Self> {
        if !(size > 0.0) || !(value > 0.0) || !size.is_finite() || !value.is_finite() {
            return Err(Error::NonPositive { size, value });
        }
        if size < 2.0 {
            return Err(Error::InvalidArgument(format!("scaling sizes must be >= 2, got {size}")));
        }
        Ok(Self { size, value })
    }
}

/// Log-log slope between two neighbouring sizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalSlope {
    pub from: f64,
    pub to: f64,
    pub slope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingFit {
    pub d_a: f64,
    pub kappa: f64,
    pub r_squared: f64,
    pub log_correction: bool,
    /// Largest `|ln value - ln model|` over the fitted samples.
    pub residual_max: f64,
    pub samples_used: usize,
    pub smallest_size: f64,
    pub local_slopes: Vec<LocalSlope>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriticalExponents {
    pub d: u32,
    pub zeta: f64,
    pub delta_v: f64,
}

impl CriticalExponents {
    pub fn new(d: u32, zeta: f64, delta_v: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("spatial dimension must be >= 1".into()));
        }
        Ok(Self { d, zeta, delta_v })
    }
}

pub fn d_a_from_exponents(e: &CriticalExponents) -> f64 {
    2.0 * e.d as f64 + 2.0 * e.zeta - 2.0 * e.delta_v
}

fn validate(samples: &[ScalingSample], needed: usize) -> Result<Vec<ScalingSample>> {
    if samples.len() < needed {
        return Err(Error::TooFewSamples { needed, got: samples.len() });
    }
    for s in samples {
        if !(s.size > 0.0) || !(s.value > 0.0) {
            return Err(Error::NonPositive { size: s.size, value: s.value });
        }
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.size.total_cmp(&b.size));
    if sorted.windows(2).any(|w| w[0].size == w[1].size) {
        return Err(Error::InvalidArgument("scaling sizes must be distinct".into()));
    }
    Ok(sorted)
}

struct LineFit {
    slope: f64,
    intercept: f64,
    r_squared: f64,
    residual_max: f64,
}

fn least_squares(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - xm).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let residuals: Vec<f64> = x.iter().zip(y).map(|(a, b)| b - (intercept + slope * a)).collect();
    let ss_res: f64 = residuals.iter().map(|r| r * r).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - ym).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    let residual_max = residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    LineFit { slope, intercept, r_squared, residual_max }
}

/// Slopes of `ln value` against `ln L` between neighbouring samples, in the given order.
pub fn local_slopes(sorted: &[ScalingSample]) -> Vec<LocalSlope> {
    sorted
        .windows(2)
        .map(|w| LocalSlope {
            from: w[0].size,
            to: w[1].size,
            slope: (w[1].value / w[0].value).ln() / (w[1].size / w[0].size).ln(),
        })
        .collect()
}

fn power_fit(sorted: &[ScalingSample]) -> ScalingFit {
    let x: Vec<f64> = sorted.iter().map(|s| s.size.ln()).collect();
    let y: Vec<f64> = sorted.iter().map(|s| s.value.ln()).collect();
    let line = least_squares(&x, &y);
    ScalingFit {
        d_a: line.slope,
        kappa: line.intercept.exp(),
        r_squared: line.r_squared,
        log_correction: false,
        residual_max: line.residual_max,
        samples_used: sorted.len(),
        smallest_size: sorted[0].size,
        local_slopes: local_slopes(sorted),
    }
}

/// Least-squares fit of `ln value = d_a ln L + ln kappa` over all samples.
pub fn fit_power_law(samples: &[ScalingSample]) -> Result<ScalingFit> {
    Ok(power_fit(&validate(samples, MIN_FIT_SAMPLES)?))
}

/// Power-law fit that drops the smallest sizes until removing one more
/// changes `d_a` by less than [`WINDOW_TOL`], keeping at least
/// [`MIN_FIT_SAMPLES`] points. Local slopes always cover every sample.
pub fn fit_power_law_windowed(samples: &[ScalingSample]) -> Result<ScalingFit> {
    let sorted = validate(samples, MIN_FIT_SAMPLES)?;
    let mut start = 0;
    let mut fit = power_fit(&sorted);
    while sorted.len() - start > MIN_FIT_SAMPLES {
        let next = power_fit(&sorted[start + 1..]);
        if (next.d_a - fit.d_a).abs() < WINDOW_TOL {
            break;
        }
        start += 1;
        fit = next;
    }
    fit.local_slopes = local_slopes(&sorted);
    Ok(fit)
}

pub fn detect_log_correction(samples: &[ScalingSample]) -> Result<ScalingFit> {
    detect_log_correction_with_factor(samples, LOG_CORRECTION_FACTOR)
}

/// Compares `kappa L^a` against `kappa L^a ln L`; the log model is preferred
/// when it reduces the maximal log-residual by at least `factor`.
pub fn detect_log_correction_with_factor(samples: &[ScalingSample], factor: f64) -> Result<ScalingFit> {
    let sorted = validate(samples, MIN_LOG_SAMPLES)?;
    let span = sorted[sorted.len() - 1].size / sorted[0].size;
    if span < MIN_LOG_SPAN {
        return Err(Error::InvalidArgument(format!(
            "log-correction detection needs sizes spanning {MIN_LOG_SPAN}x, got {span:.3}x"
        )));
    }
    let pure = power_fit(&sorted);
    let x: Vec<f64> = sorted.iter().map(|s| s.size.ln()).collect();
    let y: Vec<f64> = sorted.iter().map(|s| s.value.ln() - s.size.ln().ln()).collect();
    let log = least_squares(&x, &y);
    if pure.residual_max > 0.0 && pure.residual_max >= factor * log.residual_max {
        Ok(ScalingFit {
            d_a: log.slope,
            kappa: log.intercept.exp(),
            r_squared: log.r_squared,
            log_correction: true,
            residual_max: log.residual_max,
            ..pure
        })
    } else {
        Ok(pure)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn synthetic(sizes: &[f64], f: impl Fn(f64) -> f64) -> Vec<ScalingSample> {
        sizes.iter().map(|&l| ScalingSample::new(l, f(l)).unwrap()).collect()
    }

    const SIZES: [f64; 7] = [8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 1024.0];

    #[test]
    fn exact_on_noiseless_power_law() {
        let fit = fit_power_law(&synthetic(&SIZES, |l| 2.0 * l.powf(1.5))).unwrap();
        assert_relative_eq!(fit.d_a, 1.5, max_relative = 1e-13);
        assert_relative_eq!(fit.kappa, 2.0, max_relative = 1e-12);
        assert_relative_eq!(fit.r_squared, 1.0, max_relative = 1e-12);
        assert!(fit.residual_max < 1e-12);
        assert!(!fit.log_correction);
        assert_eq!(fit.local_slopes.len(), SIZES.len() - 1);
        assert!(fit.local_slopes.iter().all(|s| (s.slope - 1.5).abs() < 1e-12));
    }

    #[test]
    fn flat_data_gives_zero_exponent() {
        let fit = fit_power_law(&synthetic(&SIZES, |_| 0.25)).unwrap();
        assert!(fit.d_a.abs() < 1e-14);
        assert_relative_eq!(fit.kappa, 0.25, max_relative = 1e-13);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn input_errors() {
        let few = synthetic(&[2.0, 4.0, 8.0], |l| l);
        assert_eq!(fit_power_law(&few).unwrap_err(), Error::TooFewSamples { needed: 4, got: 3 });
        assert!(matches!(ScalingSample::new(4.0, 0.0), Err(Error::NonPositive { .. })));
        assert!(ScalingSample::new(1.0, 3.0).is_err());
        let bad = vec![ScalingSample { size: 2.0, value: 1.0 }; 2]
            .into_iter()
            .chain(synthetic(&[4.0, 8.0], |l| l))
            .collect::<Vec<_>>();
        assert!(fit_power_law(&bad).is_err());
        let zero = vec![
            ScalingSample { size: 2.0, value: 1.0 },
            ScalingSample { size: 4.0, value: 0.0 },
            ScalingSample { size: 8.0, value: 1.0 },
            ScalingSample { size: 16.0, value: 1.0 },
        ];
        assert!(matches!(fit_power_law(&zero), Err(Error::NonPositive { .. })));
    }

    #[test]
    fn window_drops_crossover_sizes() {
        // pure power law above a crossover contaminated at small sizes
        let data = synthetic(&[4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0], |l| l * l * (1.0 + 4.0 / (l * l)));
        let global = fit_power_law(&data).unwrap();
        let windowed = fit_power_law_windowed(&data).unwrap();
        assert!((windowed.d_a - 2.0).abs() < (global.d_a - 2.0).abs());
        assert!(windowed.smallest_size > 4.0);
        assert_eq!(windowed.local_slopes.len(), 7);
        let clean = fit_power_law_windowed(&synthetic(&SIZES, |l| 3.0 * l.powf(0.7))).unwrap();
        assert_eq!(clean.samples_used, SIZES.len());
    }

    #[test]
    fn log_detector_on_synthetic_data() {
        let sizes = [16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0, 2048.0];
        let with_log = detect_log_correction(&synthetic(&sizes, |l| 0.3 * l * l * l.ln())).unwrap();
        assert!(with_log.log_correction);
        assert_relative_eq!(with_log.d_a, 2.0, max_relative = 1e-12);
        assert_relative_eq!(with_log.kappa, 0.3, max_relative = 1e-11);
        let plain = detect_log_correction(&synthetic(&sizes, |l| 0.3 * l * l)).unwrap();
        assert!(!plain.log_correction);
        assert_relative_eq!(plain.d_a, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn log_detector_preconditions() {
        let short = synthetic(&[16.0, 32.0, 64.0, 128.0, 256.0, 512.0], |l| l);
        assert!(detect_log_correction(&short).is_err());
        let few = synthetic(&[2.0, 20.0, 200.0, 2000.0, 20000.0], |l| l);
        assert!(matches!(detect_log_correction(&few), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn exponent_relation() {
        let ising = CriticalExponents::new(1, 1.0, 1.0).unwrap();
        assert_eq!(d_a_from_exponents(&ising), 2.0);
        assert_eq!(d_a_from_exponents(&CriticalExponents::new(3, 0.4, 0.4).unwrap()), 6.0);
        // zeta - Delta_V implied by d = 2, d_a = 5/2
        let implied = (2.5 - 2.0 * 2.0) / 2.0;
        assert_eq!(implied, -0.75);
        assert_eq!(d_a_from_exponents(&CriticalExponents::new(2, 0.0, 0.75).unwrap()), 2.5);
        assert!(CriticalExponents::new(0, 1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn rescaling_values_moves_only_kappa(
            a in -3.0f64..3.0,
            kappa in 1e-3f64..1e3,
            factor in 1e-4f64..1e4,
            wiggle in proptest::collection::vec(-0.05f64..0.05, 6),
        ) {
            let sizes = [4.0, 9.0, 17.0, 40.0, 77.0, 300.0];
            let data: Vec<ScalingSample> = sizes.iter().zip(&wiggle)
                .map(|(&l, w)| ScalingSample::new(l, kappa * l.powf(a) * (1.0 + w)).unwrap())
                .collect();
            let scaled: Vec<ScalingSample> = data.iter()
                .map(|s| ScalingSample::new(s.size, s.value * factor).unwrap())
                .collect();
            let f1 = fit_power_law(&data).unwrap();
            let f2 = fit_power_law(&scaled).unwrap();
            prop_assert!((f1.d_a - f2.d_a).abs() < 1e-11);
            prop_assert!((f2.kappa / f1.kappa / factor - 1.0).abs() < 1e-10);
            prop_assert!((0.0..=1.0).contains(&f1.r_squared));
        }
    }
}
