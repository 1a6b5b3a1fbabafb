//! Command implementations behind the `wavecrest` binary.
//!
//! Each `cmd_*` function reads a [`RunConfig`], writes its report files
//! into the output directory and returns their paths. Analyses that finish
//! but come out negative (a profile that does not converge, a speed that is
//! not certified) still write their files and then return
//! [`CliError::Negative`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;
use wavecrest::birth::BirthError;
use wavecrest::criteria::{speed_classification, wavefront_certificate, CertificateReport, CriteriaError, SpeedClass};
use wavecrest::kernels::KernelError;
use wavecrest::problem::ProblemError;
use wavecrest::report::{format_f64, to_json_string, ExtReal};
use wavecrest::spectral::{speeds, CharFunction, RootPair, SpectralError, SpectralReport};
use wavecrest::waveform::{analyze_wave, lambda_mu, solve_profile, Residual, SolveStatus, WaveAnalysis, WaveformError};

pub use config::RunConfig;
use config::{with_parameter, Advection, ProblemConfig, SweepMode};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    /// The analysis ran and its answer is negative.
    #[error("{0}")]
    Negative(String),
    #[error("arithmetic failure: {0}")]
    Arithmetic(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Negative(_) => 2,
            CliError::Arithmetic(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<KernelError> for CliError {
    fn from(e: KernelError) -> Self {
        match e {
            KernelError::Range { .. } => CliError::Arithmetic(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<BirthError> for CliError {
    fn from(e: BirthError) -> Self {
        match e {
            BirthError::NotFinite(_) => CliError::Arithmetic(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::InvalidParameter { .. } | SpectralError::NoRootsAtSmallEps { .. } => {
                CliError::Config(e.to_string())
            }
            SpectralError::Birth(b) => b.into(),
            _ => CliError::Arithmetic(e.to_string()),
        }
    }
}

impl From<WaveformError> for CliError {
    fn from(e: WaveformError) -> Self {
        match e {
            WaveformError::InvalidConfig { .. } | WaveformError::UnsupportedDecay(_) | WaveformError::TooFewPoints { .. } => {
                CliError::Config(e.to_string())
            }
            WaveformError::Birth(b) => b.into(),
            WaveformError::Spectral(s) => s.into(),
            WaveformError::Kernel(k) => k.into(),
            WaveformError::Io(io) => CliError::Io(io),
            WaveformError::Csv(c) => CliError::Io(c.into()),
            WaveformError::NonFinite { .. } => CliError::Arithmetic(e.to_string()),
        }
    }
}

impl From<CriteriaError> for CliError {
    fn from(e: CriteriaError) -> Self {
        match e {
            CriteriaError::Spectral(s) => s.into(),
            CriteriaError::Birth(b) => b.into(),
            CriteriaError::Kernel(k) => k.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    info!("wrote {}", path.display());
    Ok(path)
}

/// Minimal and sharp speeds in the lab frame of the advective model.
#[derive(Debug, Clone, Serialize)]
pub struct LabSpeeds {
    pub d_m: f64,
    pub b: f64,
    /// `√(D_m/ε₀)`, the least admissible `c − B`.
    pub min_relative_speed: f64,
    pub min_speed: f64,
    pub sharp_speed: f64,
}

impl LabSpeeds {
    fn new(a: Advection, s: &SpectralReport) -> Self {
        let root = a.d_m.sqrt();
        LabSpeeds {
            d_m: a.d_m,
            b: a.b,
            min_relative_speed: root * s.c_star,
            min_speed: a.b + root * s.c_star,
            sharp_speed: a.b + root * s.c_sharp,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpeedsFile {
    #[serde(flatten)]
    pub spectral: SpectralReport,
    pub eps: Option<f64>,
    /// Positive characteristic roots at `eps`, when there are two.
    pub roots_at_eps: Option<RootPair>,
    pub advection: Option<LabSpeeds>,
}

pub fn speeds_file(problem: &ProblemConfig) -> Result<SpeedsFile, CliError> {
    let kernel = problem.kernel()?;
    let g = problem.birth.build()?;
    let spectral = speeds(problem.h, &kernel, &g, problem.q)?;
    let eps = problem.eps()?;
    let roots_at_eps = match eps {
        Some(e) => CharFunction::new(e, problem.h, spectral.p, problem.q, &kernel)?.positive_roots()?,
        None => None,
    };
    let advection = problem.advection.map(|a| LabSpeeds::new(a, &spectral));
    Ok(SpeedsFile { spectral, eps, roots_at_eps, advection })
}

/// Writes `speeds.json`.
pub fn cmd_speeds(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let report = speeds_file(&cfg.problem)?;
    Ok(vec![write_file(&cfg.output.dir, "speeds.json", &to_json_string(&report))?])
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub status: SolveStatus,
    pub converged: bool,
    pub iterations: usize,
    pub last_update: f64,
    pub residual: Residual,
    /// Converged profiles are accepted when the residual is below this.
    pub residual_bound: f64,
    pub eps: f64,
    pub speed: f64,
    pub lambda: f64,
    pub mu: f64,
    pub eps_prime: f64,
    pub lambda1: Option<f64>,
    pub below_c_star: bool,
    pub damping: f64,
    pub delta: f64,
    pub kappa: f64,
    pub zeta1: f64,
    pub zeta2: f64,
    pub pin: f64,
    pub right_value: f64,
    pub oscillatory: bool,
    pub analysis: WaveAnalysis,
    pub note: Option<String>,
}

/// Writes `profile.csv` and `diagnostics.json`.
pub fn cmd_profile(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let diag = profile_diagnostics(&cfg.problem, &cfg.solver, Some(&cfg.output.dir))?;
    let files = vec![
        cfg.output.dir.join("profile.csv"),
        write_file(&cfg.output.dir, "diagnostics.json", &to_json_string(&diag))?,
    ];
    match diag.note {
        Some(note) => Err(CliError::Negative(note)),
        None => Ok(files),
    }
}

fn profile_diagnostics(
    problem: &ProblemConfig,
    solver: &wavecrest::waveform::SolverConfig,
    csv_dir: Option<&Path>,
) -> Result<Diagnostics, CliError> {
    let spec = problem.spec()?;
    let sol = solve_profile(&spec, solver)?;
    if let Some(dir) = csv_dir {
        fs::create_dir_all(dir)?;
        sol.profile.write_csv(fs::File::create(dir.join("profile.csv"))?)?;
    }
    let lm = sol.landmarks;
    let analysis = analyze_wave(&sol.profile, &lm, &spec.g);
    let residual_bound = 10.0 * solver.tol * (1.0 + lm.kappa);
    let note = if sol.below_c_star {
        Some(format!("speed is below c*: no semi-wavefront exists (status {:?})", sol.status))
    } else if !sol.converged() {
        Some(format!("profile iteration did not converge: {:?}", sol.status))
    } else if sol.residual.max > residual_bound {
        Some(format!("residual {} exceeds {}", sol.residual.max, residual_bound))
    } else {
        None
    };
    let lmu = lambda_mu(spec.eps);
    Ok(Diagnostics {
        status: sol.status,
        converged: sol.converged(),
        iterations: sol.iterations,
        last_update: sol.last_update,
        residual: sol.residual,
        residual_bound,
        eps: spec.eps,
        speed: problem.lab_speed(spec.eps),
        lambda: lmu.lambda,
        mu: lmu.mu,
        eps_prime: lmu.eps_prime,
        lambda1: sol.lambda1,
        below_c_star: sol.below_c_star,
        damping: sol.damping,
        delta: sol.delta,
        kappa: lm.kappa,
        zeta1: lm.zeta1,
        zeta2: lm.zeta2,
        pin: 0.5 * lm.zeta1,
        right_value: sol.profile.right_value(),
        oscillatory: analysis.crossings > 0,
        analysis,
        note,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LabCertificate {
    pub d_m: f64,
    pub b: f64,
    pub speed: f64,
    pub min_speed: f64,
    pub existence_threshold: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateFile {
    #[serde(flatten)]
    pub report: CertificateReport,
    pub advection: Option<LabCertificate>,
}

pub fn certificate_file(problem: &ProblemConfig) -> Result<CertificateFile, CliError> {
    let spec = problem.spec()?;
    let report = wavefront_certificate(&spec)?;
    let advection = problem.advection.map(|a| {
        let lab = |c: f64| a.b + a.d_m.sqrt() * c;
        LabCertificate {
            d_m: a.d_m,
            b: a.b,
            speed: lab(report.speed),
            min_speed: lab(report.spectral.c_star),
            existence_threshold: report.existence_threshold.map(lab),
        }
    });
    Ok(CertificateFile { report, advection })
}

/// Writes `certificate.json`.
pub fn cmd_certify(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let file = certificate_file(&cfg.problem)?;
    let path = write_file(&cfg.output.dir, "certificate.json", &to_json_string(&file))?;
    if file.report.wavefront_certified {
        Ok(vec![path])
    } else {
        Err(CliError::Negative(format!("wavefront not certified at speed {}", cfg.problem.lab_speed(file.report.eps))))
    }
}

/// Worker count from `WAVECREST_THREADS`, if set.
pub fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("WAVECREST_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("WAVECREST_THREADS must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

fn ext(v: ExtReal) -> String {
    format_f64(v.value())
}

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

fn class_name(c: SpeedClass) -> &'static str {
    match c {
        SpeedClass::BelowCStar => "below_c_star",
        SpeedClass::Between => "between",
        SpeedClass::AboveCSharpOnly => "above_c_sharp_only",
        SpeedClass::Admissible => "admissible",
    }
}

pub fn sweep_columns(mode: SweepMode) -> &'static [&'static str] {
    match mode {
        SweepMode::Speeds => &[
            "eps0", "eps1", "eps0_tilde", "c_star", "c_sharp", "c_tilde_star", "lower_bound_am", "first_moment", "min_speed",
        ],
        SweepMode::Classify => &["speed", "eps", "class", "eps0", "c_star", "c_sharp", "c_tilde_star", "min_speed"],
        SweepMode::Certify => &[
            "speed",
            "eps",
            "class",
            "certified",
            "oscillatory",
            "dc_margin",
            "simplified_product",
            "interval_converged",
            "existence_threshold",
        ],
        SweepMode::Profile => &[
            "speed", "eps", "status", "iterations", "residual", "monotone", "crossings", "left_rate", "liminf", "limsup",
        ],
    }
}

fn sweep_row(problem: &ProblemConfig, mode: SweepMode, solver: &wavecrest::waveform::SolverConfig) -> Result<Vec<String>, CliError> {
    let lab = |c: f64| match problem.advection {
        Some(a) => a.b + a.d_m.sqrt() * c,
        None => c,
    };
    Ok(match mode {
        SweepMode::Speeds => {
            let s = speeds_file(problem)?.spectral;
            vec![
                ext(s.eps0),
                ext(s.eps1),
                ext(s.eps0_tilde),
                format_f64(s.c_star),
                format_f64(s.c_sharp),
                format_f64(s.c_tilde_star),
                opt(s.lower_bound_am),
                format_f64(s.first_moment),
                format_f64(lab(s.c_star)),
            ]
        }
        SweepMode::Classify => {
            let spec = problem.spec()?;
            let c = speed_classification(&spec)?;
            let s = &c.spectral;
            vec![
                format_f64(problem.lab_speed(spec.eps)),
                format_f64(spec.eps),
                class_name(c.class).into(),
                ext(s.eps0),
                format_f64(s.c_star),
                format_f64(s.c_sharp),
                format_f64(s.c_tilde_star),
                format_f64(lab(s.c_star)),
            ]
        }
        SweepMode::Certify => {
            let f = certificate_file(problem)?;
            let r = &f.report;
            let cond = |name: &str| r.conditions.get(name);
            vec![
                format_f64(problem.lab_speed(r.eps)),
                format_f64(r.eps),
                class_name(r.speed_class).into(),
                r.wavefront_certified.to_string(),
                r.oscillatory_predicted.to_string(),
                opt(cond("dc_strict").map(|c| c.margin)),
                opt(cond("simplified_condition").and_then(|c| c.inputs.get("product")).map(|v| v.value())),
                cond("interval_map").is_some_and(|c| c.holds).to_string(),
                opt(r.existence_threshold.map(lab)),
            ]
        }
        SweepMode::Profile => {
            let d = profile_diagnostics(problem, solver, None)?;
            vec![
                format_f64(d.speed),
                format_f64(d.eps),
                serde_json::to_value(d.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                d.iterations.to_string(),
                format_f64(d.residual.max),
                d.analysis.monotone.to_string(),
                d.analysis.crossings.to_string(),
                format_f64(d.analysis.left_rate),
                format_f64(d.analysis.liminf_estimate),
                format_f64(d.analysis.limsup_estimate),
            ]
        }
    })
}

/// Evaluates the sweep grid on a pool of `threads` workers (all cores when
/// `None`) and returns the CSV text. Row order follows the grid.
pub fn sweep_csv(cfg: &RunConfig, threads: Option<usize>) -> Result<String, CliError> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("missing [sweep] section".into()))?;
    let grid = sweep.grid()?;
    // reject a bad base problem up front instead of once per row
    with_parameter(&cfg.problem, sweep.parameter, grid[0])?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let columns = sweep_columns(sweep.mode);
    let rows: Vec<Vec<String>> = pool.install(|| {
        grid.par_iter()
            .map(|&x| {
                let row = with_parameter(&cfg.problem, sweep.parameter, x)
                    .and_then(|p| sweep_row(&p, sweep.mode, &cfg.solver));
                match row {
                    Ok(mut r) => {
                        r.push(String::new());
                        r
                    }
                    Err(e) => {
                        let mut r = vec![String::new(); columns.len()];
                        r.push(e.to_string());
                        r
                    }
                }
            })
            .collect()
    });
    let mut out = csv::Writer::from_writer(Vec::new());
    let key = format!("sweep_{}", sweep.parameter.name());
    let mut header = vec!["index", key.as_str()];
    header.extend_from_slice(columns);
    header.push("error");
    out.write_record(&header)?;
    for (i, (x, row)) in grid.iter().zip(rows).enumerate() {
        let mut rec = vec![i.to_string(), format_f64(*x)];
        rec.extend(row);
        out.write_record(&rec)?;
    }
    let bytes = out.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Arithmetic(e.to_string()))
}

/// Writes `sweep.csv`.
pub fn cmd_sweep(cfg: &RunConfig, threads: Option<usize>) -> Result<Vec<PathBuf>, CliError> {
    let text = sweep_csv(cfg, threads)?;
    Ok(vec![write_file(&cfg.output.dir, "sweep.csv", &text)?])
}

#[derive(Debug, Clone, Serialize)]
pub struct AdvectionScaling {
    pub d_m: f64,
    pub b: f64,
    pub kernel_alpha: f64,
    pub speed: Option<f64>,
    pub eps: Option<f64>,
    pub eps0: ExtReal,
    pub min_relative_speed: f64,
    pub min_speed: f64,
}

/// The reduction `ε = D_m/(c − B)²`, kernel `K_{1/D_m}`, as JSON text.
pub fn cmd_reduce_advection(cfg: &RunConfig) -> Result<String, CliError> {
    let p = &cfg.problem;
    let a = p.advection.ok_or_else(|| CliError::Config("reduce-advection needs [problem.advection]".into()))?;
    let s = speeds_file(p)?;
    let lab = s.advection.expect("advection is set");
    Ok(to_json_string(&AdvectionScaling {
        d_m: a.d_m,
        b: a.b,
        kernel_alpha: 1.0 / a.d_m,
        speed: p.speed,
        eps: s.eps,
        eps0: s.spectral.eps0,
        min_relative_speed: lab.min_relative_speed,
        min_speed: lab.min_speed,
    }))
}
