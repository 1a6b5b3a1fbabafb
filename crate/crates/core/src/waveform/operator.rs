//! `(Aφ)(t) = 1/ε' [∫_{−∞}^t e^{λ(t−s)}F(s)ds + ∫_t^∞ e^{μ(t−s)}F(s)ds]`
//! with `F(s) = (Gφ)(s − h)`, evaluated in two linear-time recurrences.

use crate::birth::BirthFunction;
use crate::kernels::Kernel;
use crate::numeric::gauss_legendre;

use super::{lambda_mu, LambdaMu, Profile, SolverConfig, WaveformError};

/// Cubic Lagrange stencil: four consecutive nodes, the integration
/// interval sits between nodes `pos` and `pos + 1`.
const STENCIL: usize = 4;
type Weights = [[f64; STENCIL]; STENCIL - 1];

/// Precomputed operator for a fixed `g`, kernel rule, delay, `ε` and step.
#[derive(Debug, Clone)]
pub struct Operator<'a> {
    g: &'a BirthFunction,
    h: f64,
    eps: f64,
    step: f64,
    lm: LambdaMu,
    /// `(√ε sⱼ, wⱼ)`.
    nodes: Vec<(f64, f64)>,
    forward: Weights,
    backward: Weights,
    forward_decay: f64,
    backward_decay: f64,
}

fn interval_weights(step: f64, kernel: impl Fn(f64) -> f64) -> Weights {
    let (us, ws) = gauss_legendre(24, 0.0, step);
    let mut out = [[0.0; STENCIL]; STENCIL - 1];
    for (pos, row) in out.iter_mut().enumerate() {
        let xs: Vec<f64> = (0..STENCIL).map(|m| (m as f64 - pos as f64) * step).collect();
        for (m, w) in row.iter_mut().enumerate() {
            *w = us
                .iter()
                .zip(&ws)
                .map(|(&u, &wq)| {
                    let basis: f64 = (0..STENCIL)
                        .filter(|&l| l != m)
                        .map(|l| (u - xs[l]) / (xs[m] - xs[l]))
                        .product();
                    wq * kernel(u) * basis
                })
                .sum();
        }
    }
    out
}

impl<'a> Operator<'a> {
    /// `quadrature` is a kernel rule `(sⱼ, wⱼ)` as produced by [`Kernel::quadrature`].
    pub fn new(g: &'a BirthFunction, quadrature: &[(f64, f64)], h: f64, eps: f64, step: f64) -> Self {
        let lm = lambda_mu(eps);
        let se = eps.sqrt();
        Operator {
            g,
            h,
            eps,
            step,
            lm,
            nodes: quadrature.iter().map(|(s, w)| (se * s, *w)).collect(),
            forward: interval_weights(step, |u| (lm.lambda * (step - u)).exp()),
            backward: interval_weights(step, |u| (-lm.mu * u).exp()),
            forward_decay: (lm.lambda * step).exp(),
            backward_decay: (-lm.mu * step).exp(),
        }
    }

    pub fn from_config(g: &'a BirthFunction, kernel: &Kernel, h: f64, eps: f64, config: &SolverConfig) -> Self {
        Self::new(g, &config.quadrature(kernel), h, eps, config.step)
    }

    pub fn lambda_mu(&self) -> LambdaMu {
        self.lm
    }

    /// `(Gφ)(x) = Σ wⱼ g(φ(x − √ε sⱼ))`.
    pub fn g_at(&self, phi: &Profile, x: f64) -> f64 {
        self.nodes.iter().map(|(off, w)| w * self.g.value(phi.value_at(x - off))).sum()
    }

    /// `F(s) = (Gφ)(s − h)`.
    pub fn delayed_g_at(&self, phi: &Profile, s: f64) -> f64 {
        self.g_at(phi, s - self.h)
    }

    fn check(&self, phi: &Profile) -> Result<(), WaveformError> {
        if phi.len() < STENCIL {
            return Err(WaveformError::TooFewPoints { needed: STENCIL, got: phi.len() });
        }
        if (phi.step - self.step).abs() > 1e-12 * self.step {
            return Err(WaveformError::InvalidConfig {
                field: "step",
                reason: format!("profile step {} differs from operator step {}", phi.step, self.step),
            });
        }
        if (phi.eps - self.eps).abs() > 1e-12 * self.eps {
            return Err(WaveformError::InvalidConfig {
                field: "eps",
                reason: format!("profile eps {} differs from operator eps {}", phi.eps, self.eps),
            });
        }
        if !(phi.left_rate > self.lm.lambda && phi.right_rate < self.lm.mu) {
            return Err(WaveformError::InvalidConfig {
                field: "extension",
                reason: format!(
                    "tail rates must satisfy lambda < left ({}) and right ({}) < mu",
                    phi.left_rate, phi.right_rate
                ),
            });
        }
        Ok(())
    }

    /// `Aφ` on the grid of `phi`.
    pub fn apply(&self, phi: &Profile) -> Result<Vec<f64>, WaveformError> {
        self.check(phi)?;
        let step = self.step;
        let (lo_off, hi_off) = self
            .nodes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (o, _)| (a.min(*o), b.max(*o)));
        // pad the F grid until every delayed node lies in an extension
        let ext_left = if self.h + lo_off < 0.0 { (-(self.h + lo_off) / step).ceil() as usize + 1 } else { 0 };
        let ext_right = ((self.h + hi_off).max(0.0) / step).ceil() as usize + 1;
        let total = phi.len() + ext_left + ext_right;
        let s0 = phi.t0 - ext_left as f64 * step;
        let f: Vec<f64> = (0..total).map(|k| self.delayed_g_at(phi, s0 + k as f64 * step)).collect();
        if let Some(k) = f.iter().position(|v| !v.is_finite()) {
            return Err(WaveformError::NonFinite { t: s0 + k as f64 * step });
        }

        let stencil = |k: usize| {
            let j0 = (k as isize - 2).clamp(0, (total - STENCIL) as isize) as usize;
            (j0, k - 1 - j0)
        };
        let dot = |w: &[f64; STENCIL], j0: usize| w.iter().zip(&f[j0..j0 + STENCIL]).map(|(a, b)| a * b).sum::<f64>();

        let mut fwd = vec![0.0; total];
        fwd[0] = f[0] / (phi.left_rate - self.lm.lambda);
        for k in 1..total {
            let (j0, pos) = stencil(k);
            fwd[k] = self.forward_decay * fwd[k - 1] + dot(&self.forward[pos], j0);
        }
        let mut bwd = vec![0.0; total];
        bwd[total - 1] = f[total - 1] / (self.lm.mu - phi.right_rate);
        for k in (1..total).rev() {
            let (j0, pos) = stencil(k);
            bwd[k - 1] = self.backward_decay * bwd[k] + dot(&self.backward[pos], j0);
        }
        let out: Vec<f64> = (0..phi.len())
            .map(|i| (fwd[i + ext_left] + bwd[i + ext_left]) / self.lm.eps_prime)
            .collect();
        if let Some(i) = out.iter().position(|v| !v.is_finite()) {
            return Err(WaveformError::NonFinite { t: phi.t(i) });
        }
        Ok(out)
    }
}

/// `(Gφ)(tᵢ)` on the grid of `phi`.
pub fn apply_g(phi: &Profile, g: &BirthFunction, kernel: &Kernel, config: &SolverConfig) -> Vec<f64> {
    let op = Operator::from_config(g, kernel, 0.0, phi.eps, config);
    (0..phi.len()).map(|i| op.g_at(phi, phi.t(i))).collect()
}

/// `Aφ` as a profile with the same grid and extension rules.
pub fn apply_a(
    phi: &Profile,
    g: &BirthFunction,
    kernel: &Kernel,
    h: f64,
    config: &SolverConfig,
) -> Result<Profile, WaveformError> {
    let op = Operator::from_config(g, kernel, h, phi.eps, &SolverConfig { step: phi.step, ..config.clone() });
    let values = op.apply(phi)?;
    Ok(Profile { values, ..phi.clone() })
}
