//! Comparison methods: refined multiscale entropy (zero-phase Butterworth
//! decimation followed by Sample Entropy) and the Gaussian
//! entropy-to-storage conversion.

use crate::error::{Error, Result};
use rustfft::num_complex::Complex;

/// IIR filter as feedforward/feedback coefficient vectors, `a[0] = 1`.
#[derive(Debug, Clone)]
pub struct IirFilter {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

impl IirFilter {
    /// Complex frequency response at normalized frequency `f` (cycles per
    /// sample).
    pub fn response(&self, f: f64) -> Complex<f64> {
        let w = -2.0 * std::f64::consts::PI * f;
        let z = |coeffs: &[f64]| {
            coeffs
                .iter()
                .enumerate()
                .map(|(k, &c)| Complex::from_polar(c, w * k as f64))
                .sum::<Complex<f64>>()
        };
        z(&self.b) / z(&self.a)
    }

    fn order(&self) -> usize {
        self.a.len().max(self.b.len()) - 1
    }

    /// Single forward pass (direct form II transposed) with an initial
    /// state at steady state for the first input value.
    fn filter_steady(&self, x: &[f64]) -> Vec<f64> {
        let m = self.order();
        let mut b = self.b.clone();
        let mut a = self.a.clone();
        b.resize(m + 1, 0.0);
        a.resize(m + 1, 0.0);
        // Steady-state internal state for unit input, scaled by x[0].
        let dc_num: f64 = b.iter().sum();
        let dc_den: f64 = a.iter().sum();
        let y_ss = dc_num / dc_den;
        let mut zi = vec![0.0; m];
        for i in (0..m).rev() {
            let next = if i + 1 < m { zi[i + 1] } else { 0.0 };
            zi[i] = b[i + 1] - a[i + 1] * y_ss + next;
        }
        let x0 = x.first().copied().unwrap_or(0.0);
        let mut z: Vec<f64> = zi.iter().map(|v| v * x0).collect();
        let mut y = Vec::with_capacity(x.len());
        for &xn in x {
            let yn = b[0] * xn + if m > 0 { z[0] } else { 0.0 };
            for i in 0..m {
                let next = if i + 1 < m { z[i + 1] } else { 0.0 };
                z[i] = b[i + 1] * xn + next - a[i + 1] * yn;
            }
            y.push(yn);
        }
        y
    }

    /// Zero-phase (forward-backward) application with odd-reflection
    /// padding at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let padlen = (3 * (self.order() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * padlen);
        for i in (1..=padlen).rev() {
            ext.push(2.0 * x[0] - x[i]);
        }
        ext.extend_from_slice(x);
        for i in 1..=padlen {
            ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
        }
        let mut y = self.filter_steady(&ext);
        y.reverse();
        let mut y = self.filter_steady(&y);
        y.reverse();
        y[padlen..padlen + n].to_vec()
    }
}

/// 6th-order Butterworth lowpass with DC gain 1, designed from the analog
/// prototype through the bilinear transform with cutoff prewarping.
pub fn butterworth_lowpass(cutoff: f64) -> Result<IirFilter> {
    if !(cutoff > 0.0 && cutoff < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "Butterworth cutoff {cutoff} outside (0, 0.5)"
        )));
    }
    const ORDER: usize = 6;
    let wc = (std::f64::consts::PI * cutoff).tan();
    // Left-half-plane prototype poles, scaled and mapped by z = (1+s)/(1-s).
    let mut digital_poles = Vec::with_capacity(ORDER);
    for k in 1..=ORDER {
        let theta = std::f64::consts::PI * (2 * k + ORDER - 1) as f64 / (2 * ORDER) as f64;
        let s = Complex::new(theta.cos(), theta.sin()) * wc;
        digital_poles.push((1.0 + s) / (1.0 - s));
    }
    // Denominator: product of (1 - p z^-1); numerator: (1 + z^-1)^ORDER.
    let mut a = vec![Complex::new(1.0, 0.0)];
    for p in &digital_poles {
        let mut next = vec![Complex::new(0.0, 0.0); a.len() + 1];
        for (i, &c) in a.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * p;
        }
        a = next;
    }
    let a: Vec<f64> = a.iter().map(|c| c.re).collect();
    let mut b = vec![1.0f64];
    for _ in 0..ORDER {
        let mut next = vec![0.0; b.len() + 1];
        for (i, &c) in b.iter().enumerate() {
            next[i] += c;
            next[i + 1] += c;
        }
        b = next;
    }
    // Unit DC gain.
    let gain = a.iter().sum::<f64>() / b.iter().sum::<f64>();
    for c in &mut b {
        *c *= gain;
    }
    Ok(IirFilter { b, a })
}

/// Lowpass-filters at cutoff `1/(2 tau)` (zero phase) and keeps every
/// `tau`-th sample starting at index 0. `tau = 1` returns the series
/// unchanged.
pub fn decimate(series: &[f64], tau: usize) -> Result<Vec<f64>> {
    if tau == 0 {
        return Err(Error::InvalidParameter("tau must be >= 1".into()));
    }
    if series.len() < tau {
        return Err(Error::DegenerateSeries(format!(
            "series of length {} shorter than tau={tau}",
            series.len()
        )));
    }
    if tau == 1 {
        return Ok(series.to_vec());
    }
    let filt = butterworth_lowpass(1.0 / (2.0 * tau as f64))?;
    let filtered = filt.filtfilt(series);
    Ok(filtered.iter().step_by(tau).copied().collect())
}

/// How the Sample Entropy tolerance is derived.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ToleranceBasis {
    /// `r = r_factor * SD(series)` with the SD of the analyzed (rescaled)
    /// series. Field-standard convention, the default.
    SeriesSd,
    /// `r = r_factor * value` for an externally supplied scale (e.g. a
    /// model-based innovation SD).
    Fixed(f64),
}

/// Sample Entropy parameters.
#[derive(Debug, Clone, Copy)]
pub struct SampEnConfig {
    pub m: usize,
    pub r_factor: f64,
    pub basis: ToleranceBasis,
}

impl Default for SampEnConfig {
    fn default() -> Self {
        Self {
            m: 2,
            r_factor: 0.2,
            basis: ToleranceBasis::SeriesSd,
        }
    }
}

fn population_sd(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|&v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Sample Entropy `-ln(A/B)`: B counts template pairs of length m within
/// Chebyshev distance r, A the same for length m+1; self-matches are
/// excluded and both counts run over the N-m-1 templates that admit an
/// m+1 extension.
///
/// Returns `None` ("undefined") when no pairs match at either length, or
/// when the tolerance degenerates to zero (constant input).
pub fn sample_entropy(series: &[f64], config: &SampEnConfig) -> Option<f64> {
    let m = config.m;
    let n = series.len();
    if m == 0 || n < m + 2 {
        return None;
    }
    let r = match config.basis {
        ToleranceBasis::SeriesSd => {
            // A constant series has zero spread; its tolerance collapses
            // and the entropy is undefined. The range test avoids a
            // spurious tiny SD from rounding in the mean.
            let (min, max) = series
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            if max - min <= 0.0 {
                return None;
            }
            config.r_factor * population_sd(series)
        }
        ToleranceBasis::Fixed(scale) => config.r_factor * scale,
    };
    if !(r > 0.0) {
        return None;
    }
    let templates = n - m; // templates of length m whose extension exists for i < n-m
    let mut count_m = 0u64;
    let mut count_m1 = 0u64;
    for i in 0..templates {
        for j in (i + 1)..templates {
            let mut within = true;
            for k in 0..m {
                if (series[i + k] - series[j + k]).abs() > r {
                    within = false;
                    break;
                }
            }
            if within {
                count_m += 1;
                if (series[i + m] - series[j + m]).abs() <= r {
                    count_m1 += 1;
                }
            }
        }
    }
    if count_m == 0 || count_m1 == 0 {
        return None;
    }
    // `+ 0.0` turns the -0.0 of a perfect match into plain zero.
    Some(-((count_m1 as f64 / count_m as f64).ln()) + 0.0)
}

/// One scale's entry of a refined multiscale entropy run; `storage` is
/// missing where Sample Entropy was undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseEntry {
    pub tau: usize,
    pub f_tau: f64,
    pub storage: Option<f64>,
}

/// Refined multiscale entropy profile converted to information storage.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RmseProfile {
    pub entries: Vec<RmseEntry>,
}

/// Refined multiscale entropy analysis: per scale, Butterworth-decimate,
/// compute Sample Entropy and convert to storage with the Gaussian
/// equivalence `S = 0.5 ln(2 pi e) - C`.
pub fn refined_mse_storage(series: &[f64], taus: &[usize], config: &SampEnConfig) -> RmseProfile {
    let half_ln_2pie = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
    let entries = taus
        .iter()
        .map(|&tau| {
            let storage = decimate(series, tau)
                .ok()
                .and_then(|x| sample_entropy(&x, config))
                .map(|c| half_ln_2pie - c);
            RmseEntry {
                tau,
                f_tau: 1.0 / (2.0 * tau as f64),
                storage,
            }
        })
        .collect();
    RmseProfile { entries }
}
