//! Model identification from finite time series: local Whittle estimation
//! of the differencing parameter, least-squares AR fitting with BIC order
//! selection, and the three analysis modes (eAR / eARd / eARFI).

use crate::error::{Error, Result};
use crate::fracdiff::{apply_fracdiff_filter, companion_spectral_radius, ArfiModel};
use nalgebra::{DMatrix, DVector};
use rustfft::{num_complex::Complex, FftPlanner};

const WHITTLE_MIN_N: usize = 64;
const WHITTLE_D_LO: f64 = -0.5;
const WHITTLE_D_HI: f64 = 1.0 - 1e-6;
const WHITTLE_TOL: f64 = 1e-6;

/// Estimation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitMode {
    /// Pure AR identification; long-range correlations neither removed
    /// nor modeled (d forced to 0).
    EAr,
    /// AR identification on the fractionally differenced series; the
    /// returned model carries d = 0 (long-range correlations removed).
    EArd,
    /// Full ARFI identification; the estimated d enters the model.
    #[default]
    EArfi,
}

impl FitMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FitMode::EAr => "ear",
            FitMode::EArd => "eard",
            FitMode::EArfi => "earfi",
        }
    }
}

impl std::str::FromStr for FitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ear" => Ok(FitMode::EAr),
            "eard" => Ok(FitMode::EArd),
            "earfi" => Ok(FitMode::EArfi),
            other => Err(Error::InvalidParameter(format!("unknown mode '{other}'"))),
        }
    }
}

/// Configuration of the fitting pipeline.
#[derive(Debug, Clone)]
pub struct FitConfig {
    pub mode: FitMode,
    /// Truncation lag of the fractional differencing filter.
    pub q: usize,
    pub pmin: usize,
    pub pmax: usize,
    /// Bandwidth exponent for the local Whittle estimator:
    /// `m = floor(N^exponent)` periodogram ordinates are used.
    pub whittle_bandwidth_exponent: f64,
    /// Subtract the sample mean before estimation.
    pub remove_mean: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            mode: FitMode::EArfi,
            q: crate::fracdiff::DEFAULT_TRUNCATION_LAG,
            pmin: 2,
            pmax: 16,
            whittle_bandwidth_exponent: 0.65,
            remove_mean: true,
        }
    }
}

impl FitConfig {
    fn validate(&self) -> Result<()> {
        if self.pmin < 1 || self.pmin > self.pmax {
            return Err(Error::InvalidParameter(format!(
                "order range [{}, {}] invalid",
                self.pmin, self.pmax
            )));
        }
        if self.q < 1 {
            return Err(Error::InvalidParameter("q must be >= 1".into()));
        }
        if !(self.whittle_bandwidth_exponent > 0.0 && self.whittle_bandwidth_exponent < 1.0) {
            return Err(Error::InvalidParameter(
                "whittle bandwidth exponent outside (0,1)".into(),
            ));
        }
        Ok(())
    }
}

/// Local Whittle estimate of the fractional differencing parameter.
#[derive(Debug, Clone, Copy)]
pub struct WhittleEstimate {
    pub d_hat: f64,
    pub stderr: f64,
    /// The minimizer landed at a search boundary.
    pub at_boundary: bool,
}

/// Periodogram ordinates `I(lambda_j)` at the Fourier frequencies
/// `lambda_j = 2 pi j / N`, `j = 1..=jmax`, of the mean-removed series.
fn periodogram(series: &[f64], jmax: usize) -> Vec<f64> {
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|&x| Complex::new(x - mean, 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / (2.0 * std::f64::consts::PI * n as f64);
    buf[1..=jmax].iter().map(|z| z.norm_sqr() * scale).collect()
}

/// Local Whittle semi-parametric estimator of `d`.
///
/// Minimizes `R(d) = ln(mean_j lambda_j^{2d} I_j) - 2 d mean_j ln lambda_j`
/// over `d in [-0.5, 1)` by golden-section search using the lowest
/// `floor(N^bandwidth_exponent)` periodogram ordinates.
/// The asymptotic standard error is `1 / (2 sqrt(m))`.
pub fn whittle_d(series: &[f64], bandwidth_exponent: f64) -> Result<WhittleEstimate> {
    let n = series.len();
    if n < WHITTLE_MIN_N {
        return Err(Error::SeriesTooShortForWhittle {
            need: WHITTLE_MIN_N,
            got: n,
        });
    }
    let m = ((n as f64).powf(bandwidth_exponent).floor() as usize).clamp(2, n / 2);
    let pgram = periodogram(series, m);
    if pgram.iter().all(|&p| p <= 0.0) || pgram.iter().any(|p| !p.is_finite()) {
        return Err(Error::DegeneratePeriodogram);
    }
    let log_lambda: Vec<f64> = (1..=m)
        .map(|j| (2.0 * std::f64::consts::PI * j as f64 / n as f64).ln())
        .collect();
    let mean_log_lambda = log_lambda.iter().sum::<f64>() / m as f64;
    let objective = |d: f64| -> f64 {
        let mut acc = 0.0;
        for (p, ll) in pgram.iter().zip(&log_lambda) {
            acc += (2.0 * d * ll).exp() * p;
        }
        (acc / m as f64).ln() - 2.0 * d * mean_log_lambda
    };

    // Golden-section search.
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (WHITTLE_D_LO, WHITTLE_D_HI);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = objective(x1);
    let mut f2 = objective(x2);
    while hi - lo > WHITTLE_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = objective(x2);
        }
    }
    let d_hat = 0.5 * (lo + hi);
    let at_boundary =
        d_hat - WHITTLE_D_LO < 10.0 * WHITTLE_TOL || WHITTLE_D_HI - d_hat < 10.0 * WHITTLE_TOL;
    if at_boundary {
        log::warn!("local Whittle minimizer at search boundary (d_hat={d_hat:.4})");
    }
    Ok(WhittleEstimate {
        d_hat,
        stderr: 1.0 / (2.0 * (m as f64).sqrt()),
        at_boundary,
    })
}

/// Least-squares AR fit.
#[derive(Debug, Clone)]
pub struct ArFit {
    pub coefficients: Vec<f64>,
    pub sigma2: f64,
    /// False when the fitted polynomial has roots on or inside the unit
    /// circle; the fit is still returned for diagnostics.
    pub stable: bool,
}

/// OLS regression of `x[n]` on its `p` lags over `n = start..N`, where
/// `start >= p`. Residual variance uses the `N - p` denominator.
fn ols_ar_from(series: &[f64], p: usize, start: usize) -> Result<ArFit> {
    let n = series.len();
    if n <= 2 * p + 1 || start >= n {
        return Err(Error::DegenerateSeries(format!(
            "need more than {} samples for AR({p}) fit, got {n}",
            2 * p + 1
        )));
    }
    let rows = n - start;
    // Normal equations accumulated directly: X'X and X'y.
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    let mut xty = DVector::<f64>::zeros(p);
    for t in start..n {
        for i in 0..p {
            let xi = series[t - 1 - i];
            xty[i] += xi * series[t];
            for j in i..p {
                xtx[(i, j)] += xi * series[t - 1 - j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            xtx[(i, j)] = xtx[(j, i)];
        }
    }
    let chol = match xtx.clone().cholesky() {
        Some(c) => c,
        None => {
            return Err(Error::DegenerateSeries(
                "rank-deficient regressor matrix".into(),
            ))
        }
    };
    let coef = chol.solve(&xty);
    let mut rss = 0.0;
    for t in start..n {
        let mut pred = 0.0;
        for i in 0..p {
            pred += coef[i] * series[t - 1 - i];
        }
        let e = series[t] - pred;
        rss += e * e;
    }
    let sigma2 = rss / (rows as f64 - p as f64).max(1.0);
    if sigma2 <= 0.0 || !sigma2.is_finite() {
        return Err(Error::DegenerateSeries("zero residual variance".into()));
    }
    let coefficients: Vec<f64> = coef.iter().copied().collect();
    let stable = companion_spectral_radius(&coefficients) < crate::statespace::STABILITY_LIMIT;
    if !stable {
        log::warn!("OLS AR({p}) fit unstable; returned for diagnostics only");
    }
    Ok(ArFit {
        coefficients,
        sigma2,
        stable,
    })
}

/// OLS estimation of an AR(p) model over `n = p..N`.
pub fn ols_ar(series: &[f64], p: usize) -> Result<ArFit> {
    ols_ar_from(series, p, p)
}

/// BIC order selection over `[pmin, pmax]`, with every candidate fitted on
/// the common sample `n = pmax..N` for comparability.
///
/// `BIC(p) = N_eff ln(sigma2(p)) + p ln(N_eff)`; ties go to the smaller
/// order. Returns the argmin and the full BIC curve.
pub fn select_order_bic(series: &[f64], pmin: usize, pmax: usize) -> Result<(usize, Vec<f64>)> {
    if pmin < 1 || pmin > pmax {
        return Err(Error::InvalidParameter(format!(
            "order range [{pmin}, {pmax}] invalid"
        )));
    }
    let n = series.len();
    if n <= 2 * pmax + 1 {
        return Err(Error::DegenerateSeries(format!(
            "need more than {} samples for order search up to {pmax}",
            2 * pmax + 1
        )));
    }
    let n_eff = (n - pmax) as f64;
    let mut best = pmin;
    let mut best_bic = f64::INFINITY;
    let mut curve = Vec::with_capacity(pmax - pmin + 1);
    for p in pmin..=pmax {
        let fit = ols_ar_from(series, p, pmax)?;
        let bic = n_eff * fit.sigma2.ln() + p as f64 * n_eff.ln();
        if bic < best_bic {
            best_bic = bic;
            best = p;
        }
        curve.push(bic);
    }
    Ok((best, curve))
}

/// Result of fitting a series.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: ArfiModel,
    pub d_hat: f64,
    pub d_stderr: f64,
    pub p_selected: usize,
    pub bic_curve: Vec<f64>,
    pub n_used: usize,
    pub warnings: Vec<String>,
}

/// Fits an ARFI (or pure AR) model to a series according to the mode.
///
/// eAR fits the raw series with d forced to 0. eARd and eARFI first
/// estimate d by local Whittle and fit the AR part on the fractionally
/// differenced series; they share identical d_hat and AR coefficients and
/// differ only in whether d enters the returned model.
pub fn fit(series: &[f64], config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    let n = series.len();
    if n < WHITTLE_MIN_N {
        return Err(Error::SeriesTooShortForWhittle {
            need: WHITTLE_MIN_N,
            got: n,
        });
    }
    let mut warnings = Vec::new();
    let centered: Vec<f64> = if config.remove_mean {
        let mean = series.iter().sum::<f64>() / n as f64;
        series.iter().map(|&x| x - mean).collect()
    } else {
        series.to_vec()
    };

    let (d_hat, d_stderr, model_d, ar_input) = match config.mode {
        FitMode::EAr => (0.0, 0.0, 0.0, centered.clone()),
        FitMode::EArd | FitMode::EArfi => {
            let w = whittle_d(&centered, config.whittle_bandwidth_exponent)?;
            if w.at_boundary {
                warnings.push(format!(
                    "Whittle minimizer at search boundary (d_hat={:.4})",
                    w.d_hat
                ));
            }
            let filtered = apply_fracdiff_filter(&centered, w.d_hat, config.q)?;
            let model_d = if config.mode == FitMode::EArfi {
                w.d_hat
            } else {
                0.0
            };
            (w.d_hat, w.stderr, model_d, filtered.values)
        }
    };

    let (p_selected, bic_curve) = select_order_bic(&ar_input, config.pmin, config.pmax)?;
    let ar_fit = ols_ar(&ar_input, p_selected)?;
    if !ar_fit.stable {
        warnings.push(format!("unstable AR({p_selected}) fit"));
        return Err(Error::Nonstationary(companion_spectral_radius(
            &ar_fit.coefficients,
        )));
    }
    let model = ArfiModel::new(ar_fit.coefficients, model_d, ar_fit.sigma2)?;
    Ok(FitResult {
        model,
        d_hat,
        d_stderr,
        p_selected,
        bic_curve,
        n_used: n,
        warnings,
    })
}

/// Two-sided normal significance interval for the Whittle estimate.
#[derive(Debug, Clone, Copy)]
pub struct DSignificance {
    pub lo: f64,
    pub hi: f64,
    pub significant: bool,
}

/// Tests `d_hat` against zero at the given level using the asymptotic
/// normal statistic: significant when `|d_hat| > z_{1-level/2} * stderr`.
pub fn d_significance(d_hat: f64, stderr: f64, level: f64) -> Result<DSignificance> {
    if stderr <= 0.0 {
        return Err(Error::InvalidParameter("stderr must be positive".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter("level outside (0,1)".into()));
    }
    use statrs::distribution::{ContinuousCDF, Normal};
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(1.0 - level / 2.0);
    let half = z * stderr;
    Ok(DSignificance {
        lo: -half,
        hi: half,
        significant: d_hat.abs() > half,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn whittle_rejects_short_series() {
        let x = vec![0.0; 32];
        assert!(matches!(
            whittle_d(&x, 0.65),
            Err(Error::SeriesTooShortForWhittle { .. })
        ));
    }

    #[test]
    fn whittle_rejects_constant_series() {
        let x = vec![3.25; 256];
        assert!(matches!(
            whittle_d(&x, 0.65),
            Err(Error::DegeneratePeriodogram)
        ));
    }

    #[test]
    fn whittle_scale_invariant() {
        let x: Vec<f64> = (0..512)
            .map(|i| ((i as f64 * 0.7).sin() + (i as f64 * 0.13).cos()) * 0.8)
            .collect();
        let a = whittle_d(&x, 0.65).unwrap();
        let scaled: Vec<f64> = x.iter().map(|&v| 17.0 * v).collect();
        let b = whittle_d(&scaled, 0.65).unwrap();
        assert_abs_diff_eq!(a.d_hat, b.d_hat, epsilon = 1e-6);
        assert_eq!(a.stderr, b.stderr);
    }

    #[test]
    fn ols_recovers_near_noiseless_ar1() {
        // Tiny innovation keeps the regression well conditioned while the
        // coefficient converges to the true value.
        let n = 512;
        let mut x = vec![0.0f64; n];
        x[0] = 1.0;
        let mut s = 99u64;
        for t in 1..n {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            let e = ((s >> 33) as f64 / (1u64 << 31) as f64 - 0.5) * 1e-6;
            x[t] = 0.5 * x[t - 1] + e;
        }
        let fit = ols_ar(&x, 1).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0], 0.5, epsilon = 1e-3);
        assert!(fit.stable);
    }

    #[test]
    fn ols_residual_variance_bounded_by_series_variance() {
        let x: Vec<f64> = (0..400).map(|i| ((i * i) as f64 * 0.37).sin()).collect();
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        for p in [1usize, 3, 6] {
            let fit = ols_ar(&x, p).unwrap();
            // The zero coefficient vector is feasible, so the residual sum
            // of squares is bounded by the target sum of squares; the small
            // slack covers the degrees-of-freedom denominator.
            assert!(fit.sigma2 <= var * 1.05, "p={p}");
        }
    }

    #[test]
    fn bic_singleton_range() {
        // Dither the sinusoid so the lagged design matrix has full rank.
        let x: Vec<f64> = (0..200)
            .map(|i| {
                (i as f64 * 0.7).sin()
                    + 0.01 * ((((i as u64 * 2654435761) % 1000) as f64) / 500.0 - 1.0)
            })
            .collect();
        let (p, curve) = select_order_bic(&x, 5, 5).unwrap();
        assert_eq!(p, 5);
        assert_eq!(curve.len(), 1);
        assert!(curve[0].is_finite());
    }

    #[test]
    fn eard_and_earfi_share_estimates() {
        let x: Vec<f64> = (0..512)
            .map(|i| {
                let t = i as f64;
                (0.9 * t).sin() + 0.4 * (0.31 * t).cos() + 0.1 * (((i as u64 * 2654435761) % 1000) as f64 / 500.0 - 1.0)
            })
            .collect();
        let mut cfg = FitConfig {
            mode: FitMode::EArd,
            pmin: 2,
            pmax: 6,
            ..FitConfig::default()
        };
        let a = fit(&x, &cfg).unwrap();
        cfg.mode = FitMode::EArfi;
        let b = fit(&x, &cfg).unwrap();
        assert_eq!(a.d_hat, b.d_hat);
        assert_eq!(a.p_selected, b.p_selected);
        assert_eq!(a.model.ar_coefficients(), b.model.ar_coefficients());
        assert_eq!(a.model.d(), 0.0);
        assert_eq!(b.model.d(), b.d_hat);
    }

    #[test]
    fn significance_trivial_cases() {
        let z0 = d_significance(0.0, 0.1, 0.05).unwrap();
        assert!(!z0.significant);
        let z3 = d_significance(0.3, 0.1, 0.05).unwrap();
        assert!(z3.significant);
        assert_abs_diff_eq!(z3.hi, 1.959964 * 0.1, epsilon = 1e-4);
    }
}
