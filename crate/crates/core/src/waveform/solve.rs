use log::{debug, warn};
use serde::Serialize;

use crate::birth::{landmarks, BirthFunction, Landmarks};
use crate::kernels::Kernel;
use crate::problem::ProblemSpec;
use crate::spectral::CharFunction;

use super::operator::Operator;
use super::{LambdaMu, Profile, SolverConfig, WaveformError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    /// An iterate left `[0, 2ζ₂]`.
    BlowUp,
    /// The iterate fell below the pin level everywhere.
    LostPin,
}

/// Largest interior defect of the discretized profile equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub max: f64,
    pub at: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub profile: Profile,
    pub status: SolveStatus,
    pub iterations: usize,
    /// Sup-norm of the last update.
    pub last_update: f64,
    pub residual: Residual,
    pub lambda_mu: LambdaMu,
    /// Smaller positive root of the characteristic function, when it exists.
    pub lambda1: Option<f64>,
    pub below_c_star: bool,
    pub damping: f64,
    pub delta: f64,
    pub landmarks: Landmarks,
}

impl Solution {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Sup over interior grid points of `|εD²φ − Dφ − φ + (Gφ)(t − h)|`
/// with central differences.
pub fn residual(
    phi: &Profile,
    g: &BirthFunction,
    kernel: &Kernel,
    h: f64,
    config: &SolverConfig,
) -> Result<Residual, WaveformError> {
    if phi.len() < 5 {
        return Err(WaveformError::TooFewPoints { needed: 5, got: phi.len() });
    }
    let op = Operator::from_config(g, kernel, h, phi.eps, &SolverConfig { step: phi.step, ..config.clone() });
    Ok(residual_with(&op, phi))
}

fn residual_with(op: &Operator, phi: &Profile) -> Residual {
    let d = phi.step;
    let v = &phi.values;
    let mut worst = Residual { max: 0.0, at: phi.t(1) };
    for i in 1..v.len() - 1 {
        let t = phi.t(i);
        let r = phi.eps * (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (d * d) - (v[i + 1] - v[i - 1]) / (2.0 * d) - v[i]
            + op.delayed_g_at(phi, t);
        if r.abs() > worst.max {
            worst = Residual { max: r.abs(), at: t };
        }
    }
    worst
}

/// First upward crossing of `level`, linearly interpolated.
fn crossing(phi: &Profile, level: f64) -> Option<f64> {
    let i = phi.values.iter().position(|v| *v >= level)?;
    if i == 0 {
        let v0 = phi.values[0];
        return Some(if phi.left_rate > 0.0 { phi.t0 + (level / v0).ln() / phi.left_rate } else { phi.t0 });
    }
    let (a, b) = (phi.values[i - 1], phi.values[i]);
    Some(phi.t(i - 1) + (level - a) / (b - a) * phi.step)
}

/// Iterates `φ ← (1−θ)φ + θAφ` from `min{δe^{λ₁t}, ζ₂}`, translating after
/// each step so that `φ(0) = ζ₁/2`.
pub fn solve_profile(problem: &ProblemSpec, config: &SolverConfig) -> Result<Solution, WaveformError> {
    if problem.q != 1.0 {
        return Err(WaveformError::UnsupportedDecay(problem.q));
    }
    let (g, kernel, h, eps) = (&problem.g, &problem.kernel, problem.h, problem.eps);
    config.validate(h, eps, kernel)?;
    let lm = landmarks(g)?;
    let cf = CharFunction::new(eps, h, g.slope_at_zero(), 1.0, kernel)?;
    let (left_rate, lambda1, below_c_star) = match cf.positive_roots()? {
        Some(r) => (r.lambda1, Some(r.lambda1), false),
        None => {
            warn!("speed {} is below the minimal speed; expect no semi-wavefront", problem.speed());
            (cf.minimizer_positive()?.unwrap_or(0.0), None, true)
        }
    };
    let delta = config.delta.unwrap_or(lm.zeta1 / 10.0);
    let n = ((config.t_left + config.t_right) / config.step).round() as usize + 1;
    let pin = 0.5 * lm.zeta1;
    let mut phi = Profile::from_fn(-config.t_left, config.step, n, eps, |t| (delta * (left_rate * t).exp()).min(lm.zeta2))
        .with_rates(left_rate, 0.0);
    phi.pin = Some(pin);

    let op = Operator::from_config(g, kernel, h, eps, config);
    let theta = config.damping;
    let mut status = SolveStatus::MaxIterations;
    let mut last_update = f64::INFINITY;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        let a = op.apply(&phi)?;
        let mut next = phi.clone();
        for (x, y) in next.values.iter_mut().zip(&a) {
            *x = ((1.0 - theta) * *x + theta * y).max(0.0);
        }
        if next.max() > 2.0 * lm.zeta2 {
            status = SolveStatus::BlowUp;
            phi = next;
            break;
        }
        let Some(tc) = crossing(&next, pin) else {
            status = SolveStatus::LostPin;
            phi = next;
            break;
        };
        let shifted: Vec<f64> = (0..n).map(|i| next.value_at(phi.t(i) + tc)).collect();
        last_update = shifted.iter().zip(&phi.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        phi.values = shifted;
        if iterations % 500 == 0 {
            debug!("iteration {iterations}: update {last_update:e}");
        }
        if last_update < config.tol {
            status = SolveStatus::Converged;
            break;
        }
    }
    let residual = residual_with(&op, &phi);
    Ok(Solution {
        profile: phi,
        status,
        iterations,
        last_update,
        residual,
        lambda_mu: op.lambda_mu(),
        lambda1,
        below_c_star,
        damping: theta,
        delta,
        landmarks: lm,
    })
}
