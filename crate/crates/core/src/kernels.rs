//! Probability kernels on the line with two-sided exponential moments.
//!
//! Every kernel here has unit mass, is nonnegative, and has a finite
//! moment generating function `∫K(s)e^{-ws}ds` for all real `w`. The sign
//! convention `e^{-ws}` matches the characteristic function, so
//! `d/dw mgf(0) = -∫sK(s)ds`.

use std::f64::consts::PI;
use std::path::Path;

use log::warn;
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::numeric::{gauss_hermite, log_sum_exp};

/// Largest exponent accepted before a moment is reported as out of range.
pub(crate) const MAX_EXPONENT: f64 = 709.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel parameter `{name}` must be {expected}, got {value}")]
    InvalidParameter {
        name: &'static str,
        expected: &'static str,
        value: f64,
    },
    #[error("moment generating function overflows at w = {w}")]
    Range { w: f64 },
    #[error("partial mass needs a <= b, got a = {a}, b = {b}")]
    EmptyInterval { a: f64, b: f64 },
    #[error("linearization aggregate needs at least one term with positive weight")]
    ZeroWeights,
    #[error("tabulated kernel: {0}")]
    Table(String),
}

/// Density samples on a uniform grid, linearly interpolated between samples
/// and zero outside. Stored normalized to unit trapezoid mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    start: f64,
    step: f64,
    density: Vec<f64>,
}

impl Tabulated {
    pub fn new(start: f64, step: f64, density: Vec<f64>) -> Result<Self, KernelError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(KernelError::Table(format!("grid step must be positive, got {step}")));
        }
        if density.len() < 2 {
            return Err(KernelError::Table("need at least two samples".into()));
        }
        if let Some(bad) = density.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(KernelError::Table(format!("density must be finite and nonnegative, got {bad}")));
        }
        let n = density.len();
        let raw: f64 = step * (density.iter().sum::<f64>() - 0.5 * (density[0] + density[n - 1]));
        if raw <= 0.0 {
            return Err(KernelError::Table("density has zero mass".into()));
        }
        if (raw - 1.0).abs() > 1e-6 {
            warn!("tabulated kernel mass {raw} differs from 1; renormalizing");
        }
        let density = density.into_iter().map(|d| d / raw).collect();
        Ok(Tabulated { start, step, density })
    }

    /// Loads a two-column `s,density` CSV on a uniform grid. A header row is
    /// allowed.
    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self, KernelError> {
        let path = path.as_ref();
        let rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| KernelError::Table(format!("{}: {e}", path.display())))?;
        Self::from_csv_records(rdr)
    }

    pub fn from_csv_str(text: &str) -> Result<Self, KernelError> {
        let rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        Self::from_csv_records(rdr)
    }

    fn from_csv_records<R: std::io::Read>(mut rdr: csv::Reader<R>) -> Result<Self, KernelError> {
        let mut s = Vec::new();
        let mut d = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| KernelError::Table(e.to_string()))?;
            if rec.len() != 2 {
                return Err(KernelError::Table(format!("line {}: expected 2 columns", line + 1)));
            }
            let parsed = (rec[0].parse::<f64>(), rec[1].parse::<f64>());
            match parsed {
                (Ok(a), Ok(b)) => {
                    s.push(a);
                    d.push(b);
                }
                _ if line == 0 => continue, // header
                _ => return Err(KernelError::Table(format!("line {}: not numeric", line + 1))),
            }
        }
        if s.len() < 2 {
            return Err(KernelError::Table("need at least two samples".into()));
        }
        let step = s[1] - s[0];
        let uniform = s
            .windows(2)
            .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.abs().max(1.0));
        if !uniform {
            return Err(KernelError::Table("abscissae must form a uniform grid".into()));
        }
        Self::new(s[0], step, d)
    }

    fn abscissa(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    fn end(&self) -> f64 {
        self.abscissa(self.density.len() - 1)
    }

    /// Trapezoid nodes and weights (weights sum to one).
    fn trapezoid(&self) -> impl Iterator<Item = (f64, f64)> + Clone + '_ {
        let n = self.density.len();
        self.density.iter().enumerate().map(move |(i, d)| {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            (self.abscissa(i), w * self.step * d)
        })
    }

    fn density_at(&self, s: f64) -> f64 {
        let x = (s - self.start) / self.step;
        if x < 0.0 || x > (self.density.len() - 1) as f64 {
            return 0.0;
        }
        let i = (x.floor() as usize).min(self.density.len() - 2);
        let f = x - i as f64;
        self.density[i] * (1.0 - f) + self.density[i + 1] * f
    }

    /// Exact integral of the piecewise-linear density over `[a, b]`.
    fn mass_between(&self, a: f64, b: f64) -> f64 {
        let lo = a.max(self.start);
        let hi = b.min(self.end());
        if hi <= lo {
            return 0.0;
        }
        let mut total = 0.0;
        for i in 0..self.density.len() - 1 {
            let c0 = self.abscissa(i);
            let c1 = c0 + self.step;
            let x0 = lo.max(c0);
            let x1 = hi.min(c1);
            if x1 > x0 {
                total += 0.5 * (self.density_at(x0) + self.density_at(x1)) * (x1 - x0);
            }
        }
        total.clamp(0.0, 1.0)
    }
}

/// A convolution kernel. Every family carries a shift `s₀`.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// Point mass at `shift`.
    Dirac { shift: f64 },
    /// Heat kernel `(4πα)^{-1/2} e^{-(s-s₀)²/(4α)}` (variance `2α`).
    Gaussian { alpha: f64, shift: f64 },
    /// Constant density `1/(2η)` on `[s₀-η, s₀+η]`.
    Uniform { half_width: f64, shift: f64 },
    Tabulated(Tabulated),
    /// Convex combination; weights are positive and sum to one.
    Mixture(Vec<(f64, Kernel)>),
}

impl Kernel {
    pub fn dirac(shift: f64) -> Self {
        Kernel::Dirac { shift }
    }

    pub fn gaussian(alpha: f64, shift: f64) -> Result<Self, KernelError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(KernelError::InvalidParameter { name: "alpha", expected: "positive", value: alpha });
        }
        Ok(Kernel::Gaussian { alpha, shift })
    }

    pub fn uniform(half_width: f64, shift: f64) -> Result<Self, KernelError> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(KernelError::InvalidParameter {
                name: "half_width",
                expected: "positive",
                value: half_width,
            });
        }
        Ok(Kernel::Uniform { half_width, shift })
    }

    /// Natural log of the moment generating function `∫K(s)e^{-ws}ds`.
    pub fn ln_mgf(&self, w: f64) -> f64 {
        match self {
            Kernel::Dirac { shift } => -w * shift,
            Kernel::Gaussian { alpha, shift } => -w * shift + alpha * w * w,
            Kernel::Uniform { half_width, shift } => -w * shift + ln_sinhc(w * half_width),
            Kernel::Tabulated(t) => log_sum_exp(
                t.trapezoid()
                    .filter(|(_, m)| *m > 0.0)
                    .map(move |(s, m)| m.ln() - w * s),
            ),
            Kernel::Mixture(parts) => log_sum_exp(parts.iter().map(move |(c, k)| c.ln() + k.ln_mgf(w))),
        }
    }

    /// Derivative of [`Kernel::ln_mgf`] in `w` (minus the mean of the tilted kernel).
    pub fn d_ln_mgf(&self, w: f64) -> f64 {
        match self {
            Kernel::Dirac { shift } => -shift,
            Kernel::Gaussian { alpha, shift } => -shift + 2.0 * alpha * w,
            Kernel::Uniform { half_width, shift } => -shift + half_width * langevin(w * half_width),
            Kernel::Tabulated(t) => {
                let l = self.ln_mgf(w);
                -t.trapezoid()
                    .filter(|(_, m)| *m > 0.0)
                    .map(|(s, m)| s * (m.ln() - w * s - l).exp())
                    .sum::<f64>()
            }
            Kernel::Mixture(parts) => {
                let l = self.ln_mgf(w);
                parts
                    .iter()
                    .map(|(c, k)| (c.ln() + k.ln_mgf(w) - l).exp() * k.d_ln_mgf(w))
                    .sum()
            }
        }
    }

    pub fn mgf(&self, w: f64) -> Result<f64, KernelError> {
        let l = self.ln_mgf(w);
        if !(l <= MAX_EXPONENT) {
            return Err(KernelError::Range { w });
        }
        Ok(l.exp())
    }

    /// `∫_a^b K(s) ds`; infinite endpoints allowed.
    pub fn partial_mass(&self, a: f64, b: f64) -> Result<f64, KernelError> {
        if a.is_nan() || b.is_nan() || a > b {
            return Err(KernelError::EmptyInterval { a, b });
        }
        Ok(self.mass_unchecked(a, b))
    }

    fn mass_unchecked(&self, a: f64, b: f64) -> f64 {
        match self {
            // closed interval: a point mass on an endpoint counts
            Kernel::Dirac { shift } => f64::from(a <= *shift && *shift <= b),
            Kernel::Gaussian { alpha, shift } => {
                let scale = 2.0 * alpha.sqrt();
                gaussian_mass((a - shift) / scale, (b - shift) / scale)
            }
            Kernel::Uniform { half_width, shift } => {
                let lo = a.max(shift - half_width);
                let hi = b.min(shift + half_width);
                if hi > lo {
                    (hi - lo) / (2.0 * half_width)
                } else {
                    0.0
                }
            }
            Kernel::Tabulated(t) => t.mass_between(a, b),
            Kernel::Mixture(parts) => parts.iter().map(|(c, k)| c * k.mass_unchecked(a, b)).sum(),
        }
    }

    /// `∫ s K(s) ds`.
    pub fn first_moment(&self) -> f64 {
        match self {
            Kernel::Dirac { shift } | Kernel::Gaussian { shift, .. } | Kernel::Uniform { shift, .. } => *shift,
            Kernel::Tabulated(t) => t.trapezoid().map(|(s, m)| s * m).sum(),
            Kernel::Mixture(parts) => parts.iter().map(|(c, k)| c * k.first_moment()).sum(),
        }
    }

    /// Density at `s`; `None` for the point mass.
    pub fn density(&self, s: f64) -> Option<f64> {
        match self {
            Kernel::Dirac { .. } => None,
            Kernel::Gaussian { alpha, shift } => {
                Some((-(s - shift).powi(2) / (4.0 * alpha)).exp() / (4.0 * PI * alpha).sqrt())
            }
            Kernel::Uniform { half_width, shift } => {
                Some(if (s - shift).abs() <= *half_width { 0.5 / half_width } else { 0.0 })
            }
            Kernel::Tabulated(t) => Some(t.density_at(s)),
            Kernel::Mixture(parts) => {
                let mut total = 0.0;
                for (c, k) in parts {
                    total += c * k.density(s)?;
                }
                Some(total)
            }
        }
    }

    /// Half-width of an interval around the origin holding essentially all of
    /// the mass (eight standard deviations for the Gaussian).
    pub fn scale(&self) -> f64 {
        match self {
            Kernel::Dirac { shift } => shift.abs(),
            Kernel::Gaussian { alpha, shift } => shift.abs() + 8.0 * (2.0 * alpha).sqrt(),
            Kernel::Uniform { half_width, shift } => shift.abs() + half_width,
            Kernel::Tabulated(t) => t.start.abs().max(t.end().abs()),
            Kernel::Mixture(parts) => parts.iter().map(|(_, k)| k.scale()).fold(0.0, f64::max),
        }
    }

    /// Whether the kernel vanishes outside a bounded interval.
    pub fn has_compact_support(&self) -> bool {
        match self {
            Kernel::Gaussian { .. } => false,
            Kernel::Mixture(parts) => parts.iter().all(|(_, k)| k.has_compact_support()),
            _ => true,
        }
    }

    /// Quadrature rule `∫K(s)f(s)ds ≈ Σ wⱼ f(sⱼ)` used by the profile
    /// operator. `max_step` bounds the node spacing for the trapezoid
    /// families; `hermite_nodes` sets the Gaussian rule size.
    pub fn quadrature(&self, max_step: f64, hermite_nodes: usize) -> Vec<(f64, f64)> {
        match self {
            Kernel::Dirac { shift } => vec![(*shift, 1.0)],
            Kernel::Gaussian { alpha, shift } => {
                let (x, w) = gauss_hermite(hermite_nodes);
                let scale = 2.0 * alpha.sqrt();
                let norm = PI.sqrt().recip();
                x.iter().zip(&w).map(|(x, w)| (shift + scale * x, w * norm)).collect()
            }
            Kernel::Uniform { half_width, shift } => {
                let m = ((2.0 * half_width / max_step).ceil() as usize).max(8);
                let h = 2.0 * half_width / m as f64;
                (0..=m)
                    .map(|j| {
                        let w = if j == 0 || j == m { 0.5 } else { 1.0 } / m as f64;
                        (shift - half_width + j as f64 * h, w)
                    })
                    .collect()
            }
            Kernel::Tabulated(t) => {
                let r = ((t.step / max_step).ceil() as usize).max(1);
                let n = (t.density.len() - 1) * r;
                let h = t.step / r as f64;
                let mut nodes: Vec<(f64, f64)> = (0..=n)
                    .map(|j| {
                        let s = t.start + j as f64 * h;
                        let w = if j == 0 || j == n { 0.5 } else { 1.0 };
                        (s, w * h * t.density_at(s))
                    })
                    .filter(|(_, w)| *w > 0.0)
                    .collect();
                let total: f64 = nodes.iter().map(|(_, w)| w).sum();
                nodes.iter_mut().for_each(|(_, w)| *w /= total);
                nodes
            }
            Kernel::Mixture(parts) => parts
                .iter()
                .flat_map(|(c, k)| {
                    k.quadrature(max_step, hermite_nodes)
                        .into_iter()
                        .map(move |(s, w)| (s, c * w))
                })
                .collect(),
        }
    }
}

/// `ln(sinh(x)/x)`, even in `x`, stable for all magnitudes.
fn ln_sinhc(x: f64) -> f64 {
    let a = x.abs();
    if a < 1e-4 {
        a * a / 6.0
    } else if a < 20.0 {
        (a.sinh() / a).ln()
    } else {
        a - std::f64::consts::LN_2 - a.ln() + (-(-2.0 * a).exp()).ln_1p()
    }
}

/// `coth(x) - 1/x`, the derivative of `ln(sinh(x)/x)`.
fn langevin(x: f64) -> f64 {
    let a = x.abs();
    let v = if a < 1e-3 {
        a / 3.0 - a.powi(3) / 45.0
    } else {
        1.0 / a.tanh() - 1.0 / a
    };
    v.copysign(x)
}

/// Standard-normal-type mass `½∫_{za}^{zb} (2/√π) e^{-z²} dz` using `erfc`
/// on the tail side to avoid cancellation.
fn gaussian_mass(za: f64, zb: f64) -> f64 {
    let upper = |z: f64| -> f64 {
        // P(Z > z) in erf-variable units
        if z == f64::INFINITY {
            0.0
        } else if z == f64::NEG_INFINITY {
            1.0
        } else {
            0.5 * erfc(z)
        }
    };
    let m = if za >= 0.0 {
        upper(za) - upper(zb)
    } else if zb <= 0.0 {
        upper(-zb) - upper(-za)
    } else {
        1.0 - upper(zb) - upper(-za)
    };
    m.clamp(0.0, 1.0)
}

/// One summand of a linearization aggregate: `F_{s_j}(0)`, `f_j'(0)`, `K_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTerm {
    pub outer_weight: f64,
    pub inner_slope: f64,
    pub kernel: Kernel,
}

impl LinearTerm {
    pub fn new(outer_weight: f64, inner_slope: f64, kernel: Kernel) -> Result<Self, KernelError> {
        for (name, value) in [("outer_weight", outer_weight), ("inner_slope", inner_slope)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(KernelError::InvalidParameter { name, expected: "nonnegative", value });
            }
        }
        Ok(LinearTerm { outer_weight, inner_slope, kernel })
    }
}

/// Collapses several linearized nonlocal terms into one gain `p` and one
/// mixture kernel `K = p⁻¹ Σ wⱼ fⱼ' Kⱼ`.
pub fn aggregate_linearization(terms: &[LinearTerm]) -> Result<(f64, Kernel), KernelError> {
    let weighted: Vec<(f64, &Kernel)> = terms
        .iter()
        .map(|t| (t.outer_weight * t.inner_slope, &t.kernel))
        .filter(|(w, _)| *w > 0.0)
        .collect();
    let p: f64 = weighted.iter().map(|(w, _)| w).sum();
    if weighted.is_empty() || p <= 0.0 {
        return Err(KernelError::ZeroWeights);
    }
    if weighted.len() == 1 {
        return Ok((p, weighted[0].1.clone()));
    }
    let parts = weighted.into_iter().map(|(w, k)| (w / p, k.clone())).collect();
    Ok((p, Kernel::Mixture(parts)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mgf_examples() {
        assert_eq!(Kernel::dirac(0.0).mgf(3.7).unwrap(), 1.0);
        let g = Kernel::gaussian(0.2, 0.0).unwrap();
        assert!(close(g.mgf(1.0).unwrap(), 0.2f64.exp(), 1e-15));
        let u = Kernel::uniform(1.0, 0.0).unwrap();
        assert!(close(u.mgf(2.0).unwrap(), 2f64.sinh() / 2.0, 1e-14));
        assert!(close(u.mgf(0.0).unwrap(), 1.0, 1e-15));
        assert!(close(u.mgf(1e-9).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn mgf_overflow_reports_argument() {
        let g = Kernel::gaussian(1.0, 0.0).unwrap();
        assert_eq!(g.mgf(100.0), Err(KernelError::Range { w: 100.0 }));
    }

    #[test]
    fn partial_mass_examples() {
        assert_eq!(Kernel::dirac(0.0).partial_mass(-1.0, 1.0).unwrap(), 1.0);
        let g = Kernel::gaussian(0.25, 0.0).unwrap();
        assert!(close(g.partial_mass(0.0, f64::INFINITY).unwrap(), 0.5, 1e-15));
        let u = Kernel::uniform(2.0, 0.0).unwrap();
        assert!(close(u.partial_mass(0.0, 1.0).unwrap(), 0.25, 1e-15));
        assert!(matches!(g.partial_mass(1.0, 0.0), Err(KernelError::EmptyInterval { .. })));
    }

    #[test]
    fn gaussian_far_tail_keeps_relative_accuracy() {
        // P(X > 40σ√2·... ) is tiny but must stay positive and accurate
        let g = Kernel::gaussian(0.25, 0.0).unwrap(); // erf-variable z = s
        let m = g.partial_mass(10.0, f64::INFINITY).unwrap();
        let expect = 0.5 * erfc(10.0);
        assert!(m > 0.0 && ((m - expect) / expect).abs() < 1e-12);
    }

    #[test]
    fn first_moment_examples() {
        assert_eq!(Kernel::dirac(0.0).first_moment(), 0.0);
        assert_eq!(Kernel::gaussian(0.2, 0.0).unwrap().first_moment(), 0.0);
        assert_eq!(Kernel::gaussian(0.2, -1.5).unwrap().first_moment(), -1.5);
    }

    #[test]
    fn aggregate_examples() {
        let (p, k) = aggregate_linearization(&[LinearTerm::new(1.0, 2.0, Kernel::dirac(0.0)).unwrap()]).unwrap();
        assert_eq!(p, 2.0);
        assert_eq!(k, Kernel::dirac(0.0));

        let terms = [
            LinearTerm::new(1.0, 2.0, Kernel::gaussian(0.2, 0.0).unwrap()).unwrap(),
            LinearTerm::new(1.0, 2.0, Kernel::dirac(0.0)).unwrap(),
        ];
        let (p, k) = aggregate_linearization(&terms).unwrap();
        assert_eq!(p, 4.0);
        assert!(close(k.mgf(1.0).unwrap(), (0.2f64.exp() + 1.0) / 2.0, 1e-14));

        let terms = [
            LinearTerm::new(0.5, 2.0, Kernel::dirac(-1.0)).unwrap(),
            LinearTerm::new(0.5, 2.0, Kernel::dirac(1.0)).unwrap(),
        ];
        let (p, k) = aggregate_linearization(&terms).unwrap();
        assert_eq!(p, 2.0);
        assert!(close(k.first_moment(), 0.0, 1e-15));

        let zero = [LinearTerm::new(0.0, 2.0, Kernel::dirac(0.0)).unwrap()];
        assert_eq!(aggregate_linearization(&zero), Err(KernelError::ZeroWeights));
    }

    #[test]
    fn tabulated_renormalizes_and_matches_uniform() {
        // box density of height 2 on [-1, 1]: raw mass 4
        let n = 201;
        let step = 2.0 / (n - 1) as f64;
        let t = Tabulated::new(-1.0, step, vec![2.0; n]).unwrap();
        let k = Kernel::Tabulated(t);
        assert!(close(k.partial_mass(f64::NEG_INFINITY, f64::INFINITY).unwrap(), 1.0, 1e-12));
        assert!(close(k.partial_mass(0.0, 0.5).unwrap(), 0.25, 1e-12));
        assert!(close(k.first_moment(), 0.0, 1e-14));
        let u = Kernel::uniform(1.0, 0.0).unwrap();
        // trapezoid on the tabulated box versus closed form
        assert!(close(k.mgf(1.5).unwrap(), u.mgf(1.5).unwrap(), 1e-4));
    }

    #[test]
    fn tabulated_csv_requires_uniform_grid() {
        let ok = "s,density\n-1,0.5\n0,0.5\n1,0.5\n";
        assert!(Tabulated::from_csv_str(ok).is_ok());
        let bad = "-1,0.5\n0,0.5\n1.5,0.5\n";
        assert!(Tabulated::from_csv_str(bad).is_err());
    }

    #[test]
    fn quadrature_weights_sum_to_one() {
        let kernels = [
            Kernel::dirac(0.3),
            Kernel::gaussian(0.2, -0.5).unwrap(),
            Kernel::uniform(1.0, 0.2).unwrap(),
            Kernel::Tabulated(Tabulated::new(-1.0, 0.5, vec![0.0, 1.0, 2.0, 1.0, 0.0]).unwrap()),
        ];
        for k in &kernels {
            let q = k.quadrature(0.01, 48);
            let total: f64 = q.iter().map(|(_, w)| w).sum();
            assert!(close(total, 1.0, 1e-12), "{k:?}");
            let mean: f64 = q.iter().map(|(s, w)| s * w).sum();
            assert!(close(mean, k.first_moment(), 1e-10), "{k:?}");
        }
    }
}
