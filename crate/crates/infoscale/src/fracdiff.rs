//! Fractional differencing coefficients, lag-polynomial algebra, and the
//! ARFI -> finite-order AR truncation.
//!
//! The fractional differencing operator `(1-L)^d` expands into an infinite
//! series with coefficients `G_k`; truncating it at lag `q` and convolving
//! with the short-term AR polynomial `A(L)` yields a finite AR(p+q)
//! approximation of the ARFI(p,d) process.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Default truncation lag for the fractional integration expansion.
pub const DEFAULT_TRUNCATION_LAG: usize = 50;

/// Complete parametric description of an ARFI(p,d) process.
#[derive(Debug, Clone, PartialEq)]
pub struct ArfiModel {
    ar: Vec<f64>,
    d: f64,
    sigma2_e: f64,
}

impl ArfiModel {
    /// Builds a model from AR coefficients `A_1..A_p`, differencing
    /// parameter `d` and innovation variance.
    ///
    /// Rejects unstable AR parts and non-positive innovation variance.
    /// `d` outside `(-0.5, 0.75)` is accepted with a warning; outside
    /// `(-0.5, 1)` it is rejected.
    pub fn new(ar: Vec<f64>, d: f64, sigma2_e: f64) -> Result<Self> {
        if !sigma2_e.is_finite() || sigma2_e <= 0.0 {
            return Err(Error::DegenerateInnovationVariance(sigma2_e));
        }
        if !d.is_finite() || d <= -0.5 || d >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "fractional differencing parameter d={d} outside (-0.5, 1)"
            )));
        }
        if d > 0.75 {
            log::warn!("d={d} beyond 0.75: local Whittle consistency degrades in this range");
        }
        let radius = companion_spectral_radius(&ar);
        if radius >= 1.0 {
            return Err(Error::Nonstationary(radius));
        }
        Ok(Self { ar, d, sigma2_e })
    }

    /// White-noise model: p=0, d=0.
    pub fn white_noise(sigma2_e: f64) -> Result<Self> {
        Self::new(Vec::new(), 0.0, sigma2_e)
    }

    /// Model whose AR part is built from complex-conjugate pole pairs.
    pub fn from_poles(poles: &[(f64, f64)], d: f64, sigma2_e: f64) -> Result<Self> {
        let poly = poles_to_ar(poles)?;
        Self::new(poly.coefficients().to_vec(), d, sigma2_e)
    }

    pub fn ar_order(&self) -> usize {
        self.ar.len()
    }

    /// AR coefficients `A_1..A_p`.
    pub fn ar_coefficients(&self) -> &[f64] {
        &self.ar
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn sigma2_e(&self) -> f64 {
        self.sigma2_e
    }

    /// Same model with a different innovation variance.
    pub fn with_sigma2_e(&self, sigma2_e: f64) -> Result<Self> {
        Self::new(self.ar.clone(), self.d, sigma2_e)
    }
}

/// Truncated expansion of `(1-L)^d`: coefficients `G_0..G_q`.
#[derive(Debug, Clone, PartialEq)]
pub struct FracDiffExpansion {
    g: Vec<f64>,
}

impl FracDiffExpansion {
    pub fn truncation_lag(&self) -> usize {
        self.g.len() - 1
    }

    /// Coefficients `G_0..G_q`, with `G_0 = 1`.
    pub fn coefficients(&self) -> &[f64] {
        &self.g
    }
}

/// Computes `G_0..G_q` by the multiplicative recursion
/// `G_0 = 1`, `G_k = G_{k-1} (k-1-d)/k`.
///
/// The recursion is used instead of direct gamma-function evaluation,
/// which overflows for k beyond ~170.
pub fn fracdiff_coefficients(d: f64, q: usize) -> FracDiffExpansion {
    assert!(q >= 1, "truncation lag must be positive");
    assert!(d.is_finite());
    let mut g = Vec::with_capacity(q + 1);
    g.push(1.0);
    for k in 1..=q {
        let k = k as f64;
        let next = g[g.len() - 1] * (k - 1.0 - d) / k;
        g.push(next);
    }
    FracDiffExpansion { g }
}

/// Finite AR lag polynomial `B(L) = 1 - sum B_k L^k`; `B_0 = 1` is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct ArPolynomial {
    b: Vec<f64>,
    spectral_radius: f64,
}

impl ArPolynomial {
    /// Wraps coefficients `B_1..B_m`, computing the companion spectral radius.
    pub fn new(b: Vec<f64>) -> Self {
        let spectral_radius = companion_spectral_radius(&b);
        Self { b, spectral_radius }
    }

    pub fn order(&self) -> usize {
        self.b.len()
    }

    /// Coefficients `B_1..B_m`.
    pub fn coefficients(&self) -> &[f64] {
        &self.b
    }

    /// Companion-matrix spectral radius.
    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    /// Whether all roots of `B(L)` lie strictly outside the unit circle,
    /// with the solver-convergence margin applied.
    pub fn is_stable(&self) -> bool {
        self.spectral_radius < crate::statespace::STABILITY_LIMIT
    }
}

/// Spectral radius of the companion matrix of `1 - sum b_k L^k`.
/// Zero for the empty polynomial.
///
/// For large polynomials whose coefficients satisfy `sum |b_k| < 1` the
/// returned value is that sum — a valid upper bound on the radius (for
/// `|z| >= 1`, `|sum b_k z^{-k}| <= sum |b_k| < 1`, so no characteristic
/// root lies on or inside the unit circle). This keeps construction of
/// long truncated fractional polynomials (q in the thousands) cheap by
/// skipping the O(m^3) eigensolve when stability is already certain.
pub(crate) fn companion_spectral_radius(b: &[f64]) -> f64 {
    let m = b.len();
    if m == 0 || b.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    if m == 1 {
        return b[0].abs();
    }
    if m > 64 {
        let sum_abs: f64 = b.iter().map(|x| x.abs()).sum();
        if sum_abs < 1.0 {
            return sum_abs;
        }
    }
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (j, &bj) in b.iter().enumerate() {
        a[(0, j)] = bj;
    }
    for i in 1..m {
        a[(i, i - 1)] = 1.0;
    }
    a.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max)
}

/// Discrete convolution of two coefficient sequences.
pub(crate) fn convolve(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len() + y.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        for (j, &yj) in y.iter().enumerate() {
            out[i + j] += xi * yj;
        }
    }
    out
}

/// Truncates the fractional integration part of `model` at lag `q` and
/// returns the AR(p+q) polynomial `B(L) = A(L) G(L)`.
///
/// Implemented as generic polynomial convolution; a test asserts equality
/// to the piecewise closed form valid for `q >= p`.
pub fn arfi_to_ar(model: &ArfiModel, q: usize) -> ArPolynomial {
    assert!(q >= 1, "truncation lag must be positive");
    let g = fracdiff_coefficients(model.d(), q);
    // A(L) as raw coefficients [1, -A_1, ..., -A_p].
    let mut a_raw = Vec::with_capacity(model.ar_order() + 1);
    a_raw.push(1.0);
    a_raw.extend(model.ar_coefficients().iter().map(|&ai| -ai));
    let product = convolve(&a_raw, g.coefficients());
    // B(L) = 1 - sum B_k L^k, so B_k = -product[k].
    let b = product[1..].iter().map(|&c| -c).collect();
    ArPolynomial::new(b)
}

/// A series passed through the truncated fractional differencing filter.
///
/// Output has the same length as the input; the first `transient` samples
/// were computed with implicit zero pre-sample values and callers may
/// choose to drop them.
#[derive(Debug, Clone)]
pub struct FilteredSeries {
    pub values: Vec<f64>,
    pub transient: usize,
}

/// Applies `(1-L)^d` truncated at lag `q` to a series:
/// `y[n] = sum_{k=0..min(n,q)} G_k x[n-k]`.
pub fn apply_fracdiff_filter(series: &[f64], d: f64, q: usize) -> Result<FilteredSeries> {
    if series.len() <= q {
        return Err(Error::SeriesTooShortForFilter {
            need: q,
            got: series.len(),
        });
    }
    let g = fracdiff_coefficients(d, q);
    let gc = g.coefficients();
    let mut values = Vec::with_capacity(series.len());
    for n in 0..series.len() {
        let kmax = n.min(q);
        let mut acc = 0.0;
        for k in 0..=kmax {
            acc += gc[k] * series[n - k];
        }
        values.push(acc);
    }
    Ok(FilteredSeries {
        values,
        transient: q,
    })
}

/// Builds the real AR polynomial whose roots are the conjugate pole pairs
/// `rho * exp(+-i 2 pi f)`.
///
/// Each pair contributes the quadratic factor
/// `1 - 2 rho cos(2 pi f) L + rho^2 L^2`; the result is the convolution of
/// all factors and has order `2 * poles.len()`.
pub fn poles_to_ar(poles: &[(f64, f64)]) -> Result<ArPolynomial> {
    let mut raw = vec![1.0];
    for &(rho, f) in poles {
        if rho >= 1.0 {
            return Err(Error::UnstablePole(rho));
        }
        if rho < 0.0 || f <= 0.0 || f >= 0.5 {
            return Err(Error::InvalidParameter(format!(
                "pole (rho={rho}, f={f}) outside rho in [0,1), f in (0,0.5)"
            )));
        }
        let factor = [1.0, -2.0 * rho * (2.0 * std::f64::consts::PI * f).cos(), rho * rho];
        raw = convolve(&raw, &factor);
    }
    let b = raw[1..].iter().map(|&c| -c).collect();
    Ok(ArPolynomial::new(b))
}
