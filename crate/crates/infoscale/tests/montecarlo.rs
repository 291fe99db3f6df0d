//! Monte Carlo oracles: long seeded realizations processed by plain
//! numeric filtering and regression must agree with the analytical
//! state-space chain.

use infoscale::{
    arfi_to_ar, design_fir_lowpass, generate_one, multiscale_storage, ols_ar, whittle_d,
    ArfiModel, SimSpec,
};

/// Plain subsampling: keep every `tau`-th sample (no extra filtering).
fn subsample(x: &[f64], tau: usize) -> Vec<f64> {
    x.iter().step_by(tau).copied().collect()
}

fn long_realization(d: f64, n: usize, seed: u64) -> (ArfiModel, Vec<f64>) {
    let model = ArfiModel::from_poles(&[(0.8, 0.1)], d, 1.0).unwrap();
    let spec = SimSpec::new(model.clone(), 50, n, 1, seed);
    let x = generate_one(&spec, 0).unwrap();
    (model, x)
}

#[test]
fn theoretical_variance_matches_sample_variance() {
    for (d, tol) in [(0.0, 0.02), (0.4, 0.06)] {
        let (model, x) = long_realization(d, 1 << 20, 2024);
        let theory = multiscale_storage(&model, 50, 48, &[1]).unwrap().entries[0].sigma2_x;
        let sample = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        assert!(
            (sample / theory - 1.0).abs() < tol,
            "d={d}: sample {sample} vs theory {theory}"
        );
    }
}

#[test]
fn downsampled_innovation_variance_matches_ar_prediction() {
    // Filter + decimate the realization numerically, then fit a generous
    // AR model; its residual variance estimates the one-step innovation
    // variance that the DARE produces analytically.
    let (model, x) = long_realization(0.4, 1 << 20, 99);
    for tau in [2usize, 5] {
        let entry = multiscale_storage(&model, 50, 48, &[tau]).unwrap().entries[0].clone();
        let filt = design_fir_lowpass(48, 1.0 / (2.0 * tau as f64)).unwrap();
        let y = subsample(&filt.apply(&x), tau);
        let fit = ols_ar(&y, 30).unwrap();
        assert!(
            (fit.sigma2 / entry.sigma2_e - 1.0).abs() < 0.03,
            "tau={tau}: AR residual {} vs theory {}",
            fit.sigma2,
            entry.sigma2_e
        );
        let sample_var = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        assert!(
            (sample_var / entry.sigma2_x - 1.0).abs() < 0.06,
            "tau={tau}: variance {sample_var} vs theory {}",
            entry.sigma2_x
        );
    }
}

#[test]
fn whittle_recovers_d_on_replicates() {
    // Pure fractional noise with a generous truncation lag: a short lag
    // flattens the spectrum at the lowest frequencies and biases the
    // estimate downward.
    let model = ArfiModel::new(vec![], 0.4, 1.0).unwrap();
    let spec = SimSpec::new(model, 1000, 4096, 10, 314);
    let mut errs: Vec<f64> = (0..10)
        .map(|rep| {
            let x = generate_one(&spec, rep).unwrap();
            (whittle_d(&x, 0.65).unwrap().d_hat - 0.4).abs()
        })
        .collect();
    errs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = errs[errs.len() / 2];
    assert!(median < 0.07, "median |d_hat - d| = {median}");
}

#[test]
fn truncated_ar_autocovariance_decays_slowly_for_lrc() {
    // Long-range correlation survives the q=50 truncation: the lag-50
    // sample autocorrelation stays well above the short-memory one.
    let (_, x_lrc) = long_realization(0.4, 1 << 18, 7);
    let (_, x_srt) = long_realization(0.0, 1 << 18, 7);
    let acf = |x: &[f64], lag: usize| {
        let n = x.len() - lag;
        let c0 = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let c: f64 = (0..n).map(|t| x[t] * x[t + lag]).sum::<f64>() / n as f64;
        c / c0
    };
    let lrc = acf(&x_lrc, 50);
    let srt = acf(&x_srt, 50);
    assert!(lrc > 0.05, "LRC acf {lrc}");
    assert!(srt.abs() < 0.03, "short-memory acf {srt}");
    // Sanity: the truncated AR polynomial itself carries the long tail.
    let model = ArfiModel::from_poles(&[(0.8, 0.1)], 0.4, 1.0).unwrap();
    let poly = arfi_to_ar(&model, 50);
    assert_eq!(poly.order(), 52);
}
