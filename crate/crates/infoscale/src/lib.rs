//! Multiscale information storage of linear long-range correlated
//! stochastic processes.
//!
//! The crate models a time series as a fractionally integrated
//! autoregressive (ARFI) process, truncates the fractional part to a
//! finite AR model, and pushes that model through an exact state-space
//! rescaling chain (lowpass FIR, downsampling, Riccati-based innovations
//! recovery) to compute the information storage `S_X(tau)` analytically
//! at every time scale. Estimation from finite series (local Whittle `d`,
//! OLS/BIC AR fitting), seeded simulation, and a refined multiscale
//! entropy baseline round out the pipeline.

pub mod baseline;
pub mod error;
pub mod estimation;
pub mod fracdiff;
mod parallel;
pub mod simulate;
pub mod statespace;

pub use error::{Error, Result};
pub use fracdiff::{
    apply_fracdiff_filter, arfi_to_ar, fracdiff_coefficients, poles_to_ar, ArPolynomial,
    ArfiModel, FracDiffExpansion, DEFAULT_TRUNCATION_LAG,
};
pub use statespace::{
    apply_fir_to_ss, ar_to_ss, design_fir_lowpass, downsample_ss, entropy_terms, multiscale_storage,
    process_variance, solve_dare, solve_dlyap, storage, storage_at_scale, to_innovations_form,
    to_innovations_form_with, FirFilter, GainConvention, GeneralSS, InnovationsSS,
    MultiscaleProfile, ScaleEntry, DEFAULT_FIR_ORDER,
};

pub use baseline::{
    butterworth_lowpass, decimate, refined_mse_storage, sample_entropy, IirFilter, RmseEntry,
    RmseProfile, SampEnConfig, ToleranceBasis,
};
pub use estimation::{
    d_significance, fit, ols_ar, select_order_bic, whittle_d, ArFit, DSignificance, FitConfig,
    FitMode, FitResult, WhittleEstimate,
};
pub use simulate::{
    generate_arfi, generate_one, run_study, SimSpec, StudyCell, StudyConfig, StudyEstimator,
    StudyResults, StudyRow,
};
