//! TOML run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use wavecrest::birth::truncate_linearize;
use wavecrest::kernels::Tabulated;
use wavecrest::waveform::SolverConfig;
use wavecrest::{BirthFunction, Custom, Kernel, ProblemSpec};

use crate::CliError;

/// Largest grid a sweep may evaluate.
pub const MAX_SWEEP_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub h: f64,
    #[serde(default = "unit")]
    pub q: f64,
    /// Wave speed; the lab-frame speed when `advection` is set.
    pub speed: Option<f64>,
    pub eps: Option<f64>,
    pub kernel: Option<KernelConfig>,
    pub birth: BirthConfig,
    pub advection: Option<Advection>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Dirac {
        #[serde(default)]
        shift: f64,
    },
    Gaussian {
        alpha: f64,
        #[serde(default)]
        shift: f64,
    },
    Uniform {
        half_width: f64,
        #[serde(default)]
        shift: f64,
    },
    /// Two-column `s,density` CSV; relative paths resolve against the
    /// config file's directory.
    Tabulated { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BirthConfig {
    Nicholson {
        p: f64,
    },
    Custom {
        expr: String,
        d1: Option<String>,
        d2: Option<String>,
        d3: Option<String>,
    },
    Truncated {
        n: u32,
        base: Box<BirthConfig>,
    },
}

/// Diffusion `D_m` and drift `B` of the advective model.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize, serde::Serialize)]
#[serde(deny_unknown_fields)]
pub struct Advection {
    pub d_m: f64,
    #[serde(default)]
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Speed,
    Eps,
    H,
    P,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Speed => "speed",
            SweepParameter::Eps => "eps",
            SweepParameter::H => "h",
            SweepParameter::P => "p",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Speeds,
    #[default]
    Classify,
    Certify,
    Profile,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub points: Option<usize>,
    /// Explicit grid; excludes `from`/`to`/`points`.
    pub values: Option<Vec<f64>>,
    #[serde(default)]
    pub log: bool,
    #[serde(default)]
    pub mode: SweepMode,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
}

fn default_dir() -> PathBuf {
    PathBuf::from(".")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_dir() }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file and resolves relative paths inside it.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(KernelConfig::Tabulated { path: p }) = &mut cfg.problem.kernel {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

impl KernelConfig {
    pub fn build(&self) -> Result<Kernel, CliError> {
        Ok(match self {
            KernelConfig::Dirac { shift } => Kernel::dirac(*shift),
            KernelConfig::Gaussian { alpha, shift } => Kernel::gaussian(*alpha, *shift)?,
            KernelConfig::Uniform { half_width, shift } => Kernel::uniform(*half_width, *shift)?,
            KernelConfig::Tabulated { path } => Kernel::Tabulated(Tabulated::from_csv_path(path)?),
        })
    }
}

impl BirthConfig {
    pub fn build(&self) -> Result<BirthFunction, CliError> {
        Ok(match self {
            BirthConfig::Nicholson { p } => BirthFunction::nicholson(*p)?,
            BirthConfig::Custom { expr, d1, d2, d3 } => {
                let mut c = Custom::from_expr(expr)?;
                for (order, d) in [(1, d1), (2, d2), (3, d3)] {
                    if let Some(src) = d {
                        c = c.with_derivative_expr(order, src)?;
                    }
                }
                BirthFunction::custom(c)
            }
            BirthConfig::Truncated { n, base } => truncate_linearize(&base.build()?, *n)?,
        })
    }
}

impl ProblemConfig {
    pub fn kernel(&self) -> Result<Kernel, CliError> {
        match (&self.kernel, &self.advection) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "problem.kernel and problem.advection are exclusive: advection fixes a gaussian kernel".into(),
            )),
            (Some(k), None) => k.build(),
            (None, Some(a)) => {
                check_advection(a)?;
                Ok(Kernel::gaussian(1.0 / a.d_m, 0.0)?)
            }
            (None, None) => Err(CliError::Config("missing problem.kernel".into())),
        }
    }

    /// `ε` from `speed` and/or `eps`, through the advective scaling when set.
    pub fn eps(&self) -> Result<Option<f64>, CliError> {
        let Some(c) = self.speed else { return Ok(self.eps) };
        let from_c = match self.advection {
            Some(a) => {
                check_advection(&a)?;
                if !(c > a.b) {
                    return Err(CliError::Config(format!("speed must exceed advection.b = {}, got {c}", a.b)));
                }
                a.d_m / (c - a.b).powi(2)
            }
            None => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(CliError::Config(format!("speed must be positive, got {c}")));
                }
                1.0 / (c * c)
            }
        };
        if let Some(e) = self.eps {
            if (e - from_c).abs() > 1e-12 * from_c.max(e.abs()) {
                return Err(CliError::Config(format!("speed {c} gives eps {from_c}, but eps = {e} was given")));
            }
        }
        Ok(Some(from_c))
    }

    pub fn spec(&self) -> Result<ProblemSpec, CliError> {
        let eps = self
            .eps()?
            .ok_or_else(|| CliError::Config("this command needs problem.speed or problem.eps".into()))?;
        Ok(ProblemSpec::new(self.kernel()?, self.birth.build()?, self.h, self.q, None, Some(eps))?)
    }

    /// Lab-frame speed for a given `ε`.
    pub fn lab_speed(&self, eps: f64) -> f64 {
        match self.advection {
            Some(a) => a.b + (a.d_m / eps).sqrt(),
            None => 1.0 / eps.sqrt(),
        }
    }
}

fn check_advection(a: &Advection) -> Result<(), CliError> {
    if !(a.d_m > 0.0 && a.d_m.is_finite()) {
        return Err(CliError::Config(format!("advection.d_m must be positive, got {}", a.d_m)));
    }
    if !a.b.is_finite() {
        return Err(CliError::Config(format!("advection.b must be finite, got {}", a.b)));
    }
    Ok(())
}

impl SweepConfig {
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let bad = |m: String| Err(CliError::Config(format!("sweep: {m}")));
        let grid = match (&self.values, self.from, self.to, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => {
                if n == 0 || n > MAX_SWEEP_POINTS {
                    return bad(format!("points must be in 1..={MAX_SWEEP_POINTS}, got {n}"));
                }
                if self.log && !(a > 0.0 && b > 0.0) {
                    return bad("log grids need positive bounds".into());
                }
                (0..n)
                    .map(|i| {
                        let f = if n == 1 { 0.0 } else { i as f64 / (n - 1) as f64 };
                        if self.log {
                            (a.ln() + (b.ln() - a.ln()) * f).exp()
                        } else {
                            a + (b - a) * f
                        }
                    })
                    .collect()
            }
            _ => return bad("give either `values` or all of `from`, `to`, `points`".into()),
        };
        if grid.is_empty() || grid.len() > MAX_SWEEP_POINTS {
            return bad(format!("grid must have 1..={MAX_SWEEP_POINTS} points, got {}", grid.len()));
        }
        if let Some(x) = grid.iter().find(|x| !x.is_finite()) {
            return bad(format!("non-finite grid value {x}"));
        }
        Ok(grid)
    }
}

/// The problem with one parameter replaced.
pub fn with_parameter(problem: &ProblemConfig, param: SweepParameter, value: f64) -> Result<ProblemConfig, CliError> {
    let mut p = problem.clone();
    match param {
        SweepParameter::Speed => {
            p.speed = Some(value);
            p.eps = None;
        }
        SweepParameter::Eps => {
            p.eps = Some(value);
            p.speed = None;
        }
        SweepParameter::H => p.h = value,
        SweepParameter::P => match &mut p.birth {
            BirthConfig::Nicholson { p } => *p = value,
            BirthConfig::Truncated { base, .. } if matches!(**base, BirthConfig::Nicholson { .. }) => {
                **base = BirthConfig::Nicholson { p: value };
            }
            _ => return Err(CliError::Config("sweeping `p` needs a nicholson birth function".into())),
        },
    }
    Ok(p)
}
