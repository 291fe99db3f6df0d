//! `infoscale`: multiscale information storage of ARFI processes.
//!
//! Subcommands compute theoretical storage profiles from model
//! parameters, estimate them from recorded series, generate seeded
//! realizations, and run the full simulation study grid.

mod io;
mod manifest;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use infoscale::{
    d_significance, fit, generate_one, multiscale_storage, run_study, ArfiModel, Error as LibError,
    FitConfig, FitMode, SimSpec, StudyConfig, StudyEstimator,
};
use manifest::RunManifest;

/// CLI failure with the process exit code it maps to:
/// 1 usage, 2 data, 3 numerical.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
    fn data(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }
    fn numeric(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<LibError> for CliError {
    fn from(e: LibError) -> Self {
        match &e {
            LibError::InvalidParameter(_) => CliError::usage(e.to_string()),
            LibError::SeriesTooShortForFilter { .. }
            | LibError::SeriesTooShortForWhittle { .. }
            | LibError::DegenerateSeries(_)
            | LibError::DegeneratePeriodogram => CliError::data(e.to_string()),
            _ => CliError::numeric(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "infoscale",
    version,
    about = "Multiscale information storage of linear long-range correlated processes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Theoretical storage profile from ARFI model parameters.
    Theory(TheoryArgs),
    /// Estimate the storage profile from a recorded series.
    Estimate(EstimateArgs),
    /// Generate seeded ARFI realizations as series files.
    Simulate(SimulateArgs),
    /// Run a simulation study grid from a config file.
    Study(StudyArgs),
}

/// Model selection shared by `theory` and `simulate`: exactly one of
/// `--poles` or `--ar`.
#[derive(Args)]
struct ModelArgs {
    /// Pole pairs "rho:f,rho:f" (modulus and normalized frequency).
    #[arg(long, conflicts_with = "ar")]
    poles: Option<String>,
    /// AR coefficients "a1,a2,...".
    #[arg(long)]
    ar: Option<String>,
    /// Fractional differencing parameter.
    #[arg(long, default_value_t = 0.0)]
    d: f64,
    /// Innovation variance.
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
}

impl ModelArgs {
    fn build(&self) -> Result<ArfiModel, CliError> {
        match (&self.poles, &self.ar) {
            (Some(poles), None) => {
                let pairs = parse_poles(poles)?;
                Ok(ArfiModel::from_poles(&pairs, self.d, self.sigma2)?)
            }
            (None, Some(ar)) => {
                let coeffs = parse_f64_list(ar)
                    .map_err(|e| CliError::usage(format!("--ar: {e}")))?;
                Ok(ArfiModel::new(coeffs, self.d, self.sigma2)?)
            }
            _ => Err(CliError::usage("exactly one of --poles or --ar is required")),
        }
    }
}

#[derive(Args)]
struct TheoryArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Fractional differencing truncation lag.
    #[arg(long, default_value_t = 50)]
    q: usize,
    /// Lowpass FIR filter order.
    #[arg(long, default_value_t = 48)]
    r: usize,
    /// Largest time scale.
    #[arg(long, default_value_t = 50)]
    tau_max: usize,
    /// Output table path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input series: one sample per line, '#' comments ignored.
    #[arg(long)]
    input: PathBuf,
    /// Estimation mode: ear, eard, or earfi.
    #[arg(long, default_value = "earfi")]
    mode: String,
    #[arg(long, default_value_t = 50)]
    q: usize,
    #[arg(long, default_value_t = 48)]
    r: usize,
    #[arg(long, default_value_t = 50)]
    tau_max: usize,
    /// Smallest candidate AR order.
    #[arg(long, default_value_t = 2)]
    pmin: usize,
    /// Largest candidate AR order.
    #[arg(long, default_value_t = 16)]
    pmax: usize,
    /// Output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Samples per realization.
    #[arg(long)]
    n: usize,
    /// Number of realizations.
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    q: usize,
    /// Output directory for series files and manifest.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct StudyArgs {
    /// TOML config declaring the study grid.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for per-cell tables.
    #[arg(long)]
    out: PathBuf,
}

fn parse_poles(s: &str) -> Result<Vec<(f64, f64)>, CliError> {
    s.split(',')
        .map(|pair| {
            let (rho, f) = pair
                .split_once(':')
                .ok_or_else(|| CliError::usage(format!("--poles: expected rho:f, found '{pair}'")))?;
            let rho: f64 = rho
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("--poles: bad modulus '{rho}'")))?;
            let f: f64 = f
                .trim()
                .parse()
                .map_err(|_| CliError::usage(format!("--poles: bad frequency '{f}'")))?;
            Ok((rho, f))
        })
        .collect()
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number '{t}'")))
        .collect()
}

fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => io::write_atomic(path, content),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn profile_table(entries: &[infoscale::ScaleEntry]) -> String {
    let mut t = String::from("tau,f_tau,S,sigma2_x,sigma2_e\n");
    for e in entries {
        let _ = writeln!(t, "{},{},{},{},{}", e.tau, e.f_tau, e.storage, e.sigma2_x, e.sigma2_e);
    }
    t
}

fn cmd_theory(args: &TheoryArgs) -> Result<(), CliError> {
    let model = args.model.build()?;
    if args.tau_max == 0 {
        return Err(CliError::usage("--tau-max must be >= 1"));
    }
    let taus: Vec<usize> = (1..=args.tau_max).collect();
    let profile = multiscale_storage(&model, args.q, args.r, &taus)?;
    let manifest = RunManifest::new("theory")
        .param("ar", model.ar_coefficients())
        .param("d", model.d())
        .param("sigma2", model.sigma2_e())
        .param("q", args.q)
        .param("r", args.r)
        .param("tau_max", args.tau_max)
        .param("out", args.out.as_ref().map(|p| p.display().to_string()));
    let content = format!("{}{}", manifest.comment_block(), profile_table(&profile.entries));
    emit(args.out.as_deref(), &content)
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let mode = FitMode::from_str(&args.mode).map_err(|e| CliError::usage(e.to_string()))?;
    if args.tau_max == 0 {
        return Err(CliError::usage("--tau-max must be >= 1"));
    }
    let series = io::read_series(&args.input)?;
    let cfg = FitConfig {
        mode,
        q: args.q,
        pmin: args.pmin,
        pmax: args.pmax,
        ..FitConfig::default()
    };
    let result = fit(&series, &cfg)?;
    let q = if result.model.d() == 0.0 { 0 } else { args.q };
    let taus: Vec<usize> = (1..=args.tau_max).collect();
    let profile = multiscale_storage(&result.model, q, args.r, &taus)?;

    let significant = if mode == FitMode::EAr {
        None
    } else {
        Some(d_significance(result.d_hat, result.d_stderr, 0.05)?.significant)
    };
    let fitted = serde_json::json!({
        "mode": mode.as_str(),
        "d_hat": result.d_hat,
        "d_stderr": result.d_stderr,
        "d_significant_0.05": significant,
        "p_selected": result.p_selected,
        "ar": result.model.ar_coefficients(),
        "sigma2": result.model.sigma2_e(),
        "n_used": result.n_used,
        "warnings": result.warnings,
    });
    let manifest = RunManifest::new("estimate")
        .param("input", args.input.display().to_string())
        .param("mode", mode.as_str())
        .param("q", args.q)
        .param("r", args.r)
        .param("tau_max", args.tau_max)
        .param("pmin", args.pmin)
        .param("pmax", args.pmax);
    let content = format!(
        "{}# fit: {}\n{}",
        manifest.comment_block(),
        fitted,
        profile_table(&profile.entries)
    );
    emit(args.out.as_deref(), &content)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let model = args.model.build()?;
    if args.n == 0 || args.reps == 0 {
        return Err(CliError::usage("--n and --reps must be >= 1"));
    }
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", args.out.display())))?;
    let manifest = RunManifest::new("simulate")
        .param("ar", model.ar_coefficients())
        .param("d", model.d())
        .param("sigma2", model.sigma2_e())
        .param("n", args.n)
        .param("reps", args.reps)
        .param("seed", args.seed)
        .param("q", args.q)
        .param("out", args.out.display().to_string());
    let spec = SimSpec::new(model, args.q, args.n, args.reps, args.seed);
    for rep in 0..args.reps {
        let series = generate_one(&spec, rep as u64)?;
        let mut content = manifest.comment_block();
        let _ = writeln!(content, "# replicate: {rep}");
        for v in &series {
            let _ = writeln!(content, "{v}");
        }
        io::write_atomic(&args.out.join(format!("rep_{rep:04}.txt")), &content)?;
    }
    io::write_atomic(&args.out.join("manifest.json"), &manifest.comment_block())?;
    Ok(())
}

/// Study grid config, flat key/value + lists (TOML).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyFile {
    /// Pole pairs as [modulus, frequency].
    poles: Vec<[f64; 2]>,
    #[serde(default = "default_sigma2")]
    sigma2: f64,
    d: Vec<f64>,
    n: Vec<usize>,
    reps: usize,
    #[serde(default = "default_seed")]
    seed: u64,
    estimators: Vec<String>,
    #[serde(default = "default_tau_max")]
    tau_max: usize,
    #[serde(default = "default_q")]
    q: usize,
    #[serde(default = "default_r")]
    r: usize,
    #[serde(default = "default_pmin")]
    pmin: usize,
    #[serde(default = "default_pmax")]
    pmax: usize,
}

fn default_sigma2() -> f64 {
    1.0
}
fn default_seed() -> u64 {
    1
}
fn default_tau_max() -> usize {
    50
}
fn default_q() -> usize {
    50
}
fn default_r() -> usize {
    48
}
fn default_pmin() -> usize {
    2
}
fn default_pmax() -> usize {
    16
}

fn cmd_study(args: &StudyArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", args.config.display())))?;
    let file: StudyFile = toml::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", args.config.display())))?;
    let estimators = file
        .estimators
        .iter()
        .map(|s| StudyEstimator::from_str(s).map_err(|e| CliError::usage(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = StudyConfig {
        poles: file.poles.iter().map(|p| (p[0], p[1])).collect(),
        sigma2: file.sigma2,
        d_values: file.d.clone(),
        n_values: file.n.clone(),
        reps: file.reps,
        seed: file.seed,
        estimators,
        tau_max: file.tau_max,
        q: file.q,
        fir_order: file.r,
        pmin: file.pmin,
        pmax: file.pmax,
    };
    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::data(format!("cannot create {}: {e}", args.out.display())))?;
    let results = run_study(&cfg)?;
    for cell in &results.cells {
        let manifest = RunManifest::new("study")
            .param("config", args.config.display().to_string())
            .param("d", cell.d)
            .param("n", cell.n)
            .param("estimator", cell.estimator.as_str())
            .param("reps", cfg.reps)
            .param("seed", cfg.seed)
            .param("tau_max", cfg.tau_max)
            .param("q", cfg.q)
            .param("r", cfg.fir_order);
        let mut table = String::from("tau,f_tau,theory,median,p10,p90,missing_fraction\n");
        for row in &cell.rows {
            let _ = writeln!(
                table,
                "{},{},{},{},{},{},{}",
                row.tau,
                row.f_tau,
                row.theory,
                io::opt_cell(row.median),
                io::opt_cell(row.p10),
                io::opt_cell(row.p90),
                row.missing_fraction
            );
        }
        let name = format!("{}_d{}_N{}.csv", cell.estimator.as_str(), cell.d, cell.n);
        io::write_atomic(
            &args.out.join(name),
            &format!("{}{}", manifest.comment_block(), table),
        )?;
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.command {
        Command::Theory(args) => cmd_theory(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Study(args) => cmd_study(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}
