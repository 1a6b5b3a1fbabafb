//! Wave profiles: the operator `A` whose fixed points solve
//! `εφ'' − φ' − φ + (Gφ)(t − h) = 0`, the damped fixed-point solver, and
//! post-hoc analysis of computed profiles.

mod analysis;
mod operator;
mod solve;

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::birth::BirthError;
use crate::kernels::{Kernel, KernelError};
use crate::report::format_f64;
use crate::spectral::SpectralError;

pub use analysis::{analyze_wave, WaveAnalysis};
pub use operator::{apply_a, apply_g, Operator};
pub use solve::{residual, solve_profile, Residual, SolveStatus, Solution};

#[derive(Debug, Error)]
pub enum WaveformError {
    #[error("solver setting `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("profile solver supports q = 1 only, got q = {0}")]
    UnsupportedDecay(f64),
    #[error("profile needs at least {needed} grid points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("non-finite value while applying the operator near t = {t}")]
    NonFinite { t: f64 },
    #[error(transparent)]
    Birth(#[from] BirthError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("writing profile: {0}")]
    Io(#[from] io::Error),
    #[error("writing profile: {0}")]
    Csv(#[from] csv::Error),
}

/// Roots `λ < 0 < μ` of `εz² − z − 1` and `ε' = ε(μ − λ) = √(1 + 4ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaMu {
    pub lambda: f64,
    pub mu: f64,
    pub eps_prime: f64,
}

pub fn lambda_mu(eps: f64) -> LambdaMu {
    let root = (1.0 + 4.0 * eps).sqrt();
    // cancellation-free forms of (1 ∓ √(1+4ε)) / 2ε
    let lambda = -2.0 / (1.0 + root);
    let mu = (1.0 + root) / (2.0 * eps);
    LambdaMu { lambda, mu, eps_prime: root }
}

/// Grid function on `t₀ + iΔ`, extended by `φ(t₀)e^{r_L(t−t₀)}` on the left
/// and `φ(t_N)e^{r_R(t−t_N)}` on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub t0: f64,
    pub step: f64,
    pub values: Vec<f64>,
    pub eps: f64,
    pub left_rate: f64,
    pub right_rate: f64,
    /// Target of the normalization `φ(0) = pin`, when one is enforced.
    pub pin: Option<f64>,
}

impl Profile {
    pub fn from_fn(t0: f64, step: f64, n: usize, eps: f64, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..n).map(|i| f(t0 + i as f64 * step)).collect();
        Profile { t0, step, values, eps, left_rate: 0.0, right_rate: 0.0, pin: None }
    }

    pub fn constant(t0: f64, step: f64, n: usize, eps: f64, value: f64) -> Self {
        Self::from_fn(t0, step, n, eps, |_| value)
    }

    pub fn with_rates(mut self, left: f64, right: f64) -> Self {
        self.left_rate = left;
        self.right_rate = right;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.step
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.len() - 1)
    }

    pub fn right_value(&self) -> f64 {
        *self.values.last().expect("profile is never empty")
    }

    /// `φ(x)`: linear interpolation on the grid, extensions outside.
    pub fn value_at(&self, x: f64) -> f64 {
        let n = self.values.len();
        let u = (x - self.t0) / self.step;
        if u <= 0.0 {
            return self.values[0] * (self.left_rate * (x - self.t0)).exp();
        }
        let last = (n - 1) as f64;
        if u >= last {
            let v = self.values[n - 1];
            return if self.right_rate == 0.0 { v } else { v * (self.right_rate * (x - self.t_end())).exp() };
        }
        let i = u.floor() as usize;
        let f = u - i as f64;
        if f == 0.0 {
            return self.values[i];
        }
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Two-column CSV `t,phi`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), WaveformError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "phi"])?;
        for (i, v) in self.values.iter().enumerate() {
            out.write_record([format_f64(self.t(i)), format_f64(*v)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Settings for [`solve_profile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub t_left: f64,
    pub t_right: f64,
    pub step: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation `θ` in `φ ← (1−θ)φ + θAφ`.
    pub damping: f64,
    /// Amplitude of the initial iterate `min{δe^{λ₁t}, ζ₂}`; defaults to `ζ₁/10`.
    pub delta: Option<f64>,
    /// Gauss–Hermite nodes for Gaussian kernels.
    pub hermite_nodes: usize,
    /// Node spacing for trapezoid kernel rules; defaults to `step`.
    pub kernel_step: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            t_left: 40.0,
            t_right: 40.0,
            step: 0.01,
            tol: 1e-8,
            max_iter: 10_000,
            damping: 1.0,
            delta: None,
            hermite_nodes: 40,
            kernel_step: None,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, h: f64, eps: f64, kernel: &Kernel) -> Result<(), WaveformError> {
        let bad = |field, reason: String| Err(WaveformError::InvalidConfig { field, reason });
        let reach = 10.0 * 1f64.max(h).max(eps.sqrt() * kernel.scale());
        if !(self.t_left >= reach) {
            return bad("t_left", format!("must be at least {reach}, got {}", self.t_left));
        }
        if !(self.t_right >= reach) {
            return bad("t_right", format!("must be at least {reach}, got {}", self.t_right));
        }
        let max_step = if h > 0.0 { 0.01f64.min(h / 10.0) } else { 0.01 };
        if !(self.step > 0.0 && self.step <= max_step * (1.0 + 1e-12)) {
            return bad("step", format!("must be in (0, {max_step}], got {}", self.step));
        }
        if !(self.tol > 0.0) {
            return bad("tol", format!("must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter", "must be positive".into());
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping", format!("must be in (0, 1], got {}", self.damping));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return bad("delta", format!("must be positive, got {d}"));
            }
        }
        if self.hermite_nodes < 40 {
            return bad("hermite_nodes", format!("must be at least 40, got {}", self.hermite_nodes));
        }
        if let Some(s) = self.kernel_step {
            if !(s > 0.0) {
                return bad("kernel_step", format!("must be positive, got {s}"));
            }
        }
        Ok(())
    }

    pub(crate) fn quadrature(&self, kernel: &Kernel) -> Vec<(f64, f64)> {
        kernel.quadrature(self.kernel_step.unwrap_or(self.step), self.hermite_nodes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_mu_roots() {
        let r = lambda_mu(1.0);
        assert!((r.lambda - (1.0 - 5f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((r.mu - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-15);
        for eps in [1e-4, 0.37, 1.0, 50.0] {
            let r = lambda_mu(eps);
            assert!((r.lambda * r.mu + 1.0 / eps).abs() < 1e-12 / eps);
            assert!((eps * (r.mu - r.lambda) - r.eps_prime).abs() < 1e-12 * r.eps_prime);
        }
        assert!((lambda_mu(1e-4).mu * 1e-4 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn profile_extensions() {
        let p = Profile::from_fn(-1.0, 0.5, 5, 1.0, |t| t + 2.0).with_rates(1.0, 0.0);
        assert_eq!(p.value_at(-1.0), 1.0);
        assert!((p.value_at(-2.0) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(p.value_at(0.25), 2.25);
        assert_eq!(p.value_at(5.0), 3.0);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,phi\n"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn config_validation() {
        let k = Kernel::dirac(0.0);
        assert!(SolverConfig::default().validate(1.0, 1.0, &k).is_ok());
        let c = SolverConfig { step: 0.05, ..Default::default() };
        assert!(c.validate(1.0, 1.0, &k).is_err());
        let c = SolverConfig { t_left: 5.0, ..Default::default() };
        assert!(c.validate(1.0, 1.0, &k).is_err());
        let c = SolverConfig { damping: 0.0, ..Default::default() };
        assert!(c.validate(1.0, 1.0, &k).is_err());
    }
}
