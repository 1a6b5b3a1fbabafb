//! Birth functions `g`, their landmarks, and the structural hypotheses the
//! existence theory needs.

mod expr;
mod interval;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::numeric::{bisect_predicate, bisect_root};

pub use expr::{Expr, ParseError};
pub use interval::{image, interval_map_iterate, IntervalIteration, MapShape};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BirthError {
    #[error("birth function parameter `{name}` must be {expected}, got {value}")]
    InvalidParameter {
        name: &'static str,
        expected: &'static str,
        value: f64,
    },
    #[error("g(s) = s has no positive solution")]
    NoFixedPoint,
    #[error("g(s) = s has several positive solutions (near {0:?})")]
    MultipleFixedPoints(Vec<f64>),
    #[error("more than one interior extremum detected (near {0:?})")]
    MultipleExtrema(Vec<f64>),
    #[error("truncation level too coarse: 1/n = {level} is not below max g = {max}")]
    TruncationLevel { level: f64, max: f64 },
    #[error("sup g(s)/s is not finite")]
    UnboundedRatio,
    #[error("Schwarzian undefined at critical point s = {0}")]
    CriticalPoint(f64),
    #[error("map not finite at s = {0}")]
    NotFinite(f64),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied nonlinearity with optional analytic derivatives.
#[derive(Clone)]
pub struct Custom {
    label: String,
    value: ScalarFn,
    derivatives: [Option<ScalarFn>; 3],
}

impl Custom {
    pub fn from_fn(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Custom { label: label.into(), value: Arc::new(f), derivatives: [None, None, None] }
    }

    pub fn from_expr(src: &str) -> Result<Self, BirthError> {
        let e = Expr::parse(src)?;
        Ok(Custom::from_fn(src.trim(), move |s| e.eval(s)))
    }

    /// Attach analytic derivative `order` (1, 2 or 3).
    pub fn with_derivative(mut self, order: usize, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        assert!((1..=3).contains(&order), "derivative order must be 1, 2 or 3");
        self.derivatives[order - 1] = Some(Arc::new(f));
        self
    }

    pub fn with_derivative_expr(self, order: usize, src: &str) -> Result<Self, BirthError> {
        let e = Expr::parse(src)?;
        Ok(self.with_derivative(order, move |s| e.eval(s)))
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for Custom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let analytic: Vec<usize> = (1..=3).filter(|o| self.derivatives[o - 1].is_some()).collect();
        f.debug_struct("Custom")
            .field("label", &self.label)
            .field("analytic_derivatives", &analytic)
            .finish()
    }
}

/// Three-piece approximation `γₙ`: slope `k` up to `1/(nk)`, flat at `1/n`
/// up to the first preimage of `1/n`, then `g`.
#[derive(Debug, Clone)]
pub struct TruncatedLinear {
    pub base: BirthFunction,
    pub slope: f64,
    pub level: u32,
    pub knee: f64,
    pub plateau_end: f64,
}

impl TruncatedLinear {
    fn value(&self, s: f64) -> f64 {
        if s <= self.knee {
            self.slope * s
        } else if s <= self.plateau_end {
            1.0 / self.level as f64
        } else {
            self.base.value(s)
        }
    }
}

#[derive(Debug, Clone)]
pub enum BirthFunction {
    /// `g(s) = p s e^{-s}`.
    Nicholson { p: f64 },
    TruncatedLinear(Box<TruncatedLinear>),
    Custom(Custom),
}

/// Derivative value and whether it came from a finite-difference fallback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivative {
    pub value: f64,
    pub approximate: bool,
}

impl BirthFunction {
    pub fn nicholson(p: f64) -> Result<Self, BirthError> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(BirthError::InvalidParameter { name: "p", expected: "positive", value: p });
        }
        Ok(BirthFunction::Nicholson { p })
    }

    pub fn custom(c: Custom) -> Self {
        BirthFunction::Custom(c)
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            BirthFunction::Nicholson { p } => p * s * (-s).exp(),
            BirthFunction::TruncatedLinear(t) => t.value(s),
            BirthFunction::Custom(c) => (c.value)(s),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            BirthFunction::Nicholson { p } => format!("nicholson(p={p})"),
            BirthFunction::TruncatedLinear(t) => format!("truncated({}, n={})", t.base.describe(), t.level),
            BirthFunction::Custom(c) => format!("custom({})", c.label),
        }
    }

    /// Derivative of order 1, 2 or 3.
    pub fn derivative(&self, s: f64, order: usize) -> Derivative {
        assert!((1..=3).contains(&order), "derivative order must be 1, 2 or 3");
        match self {
            BirthFunction::Nicholson { p } => {
                let e = p * (-s).exp();
                let value = match order {
                    1 => e * (1.0 - s),
                    2 => e * (s - 2.0),
                    _ => e * (3.0 - s),
                };
                Derivative { value, approximate: false }
            }
            BirthFunction::TruncatedLinear(t) => {
                if s < t.knee {
                    Derivative { value: if order == 1 { t.slope } else { 0.0 }, approximate: false }
                } else if s < t.plateau_end {
                    Derivative { value: 0.0, approximate: false }
                } else {
                    t.base.derivative(s, order)
                }
            }
            BirthFunction::Custom(c) => match &c.derivatives[order - 1] {
                Some(d) => Derivative { value: d(s), approximate: false },
                None => Derivative { value: finite_difference(&*c.value, s, order), approximate: true },
            },
        }
    }

    /// `g'(0)`.
    pub fn slope_at_zero(&self) -> f64 {
        match self {
            BirthFunction::Nicholson { p } => *p,
            BirthFunction::TruncatedLinear(t) => t.slope,
            BirthFunction::Custom(c) => match &c.derivatives[0] {
                Some(d) => d(0.0),
                None => {
                    // g(0) = 0, so g(h)/h = g'(0) + O(h); one Richardson step
                    let h = 1e-5;
                    let g0 = (c.value)(0.0);
                    let d = |h: f64| ((c.value)(h) - g0) / h;
                    2.0 * d(h / 2.0) - d(h)
                }
            },
        }
    }

    /// `k = sup_{s>0} g(s)/s`.
    pub fn sup_ratio(&self) -> Result<f64, BirthError> {
        match self {
            BirthFunction::Nicholson { p } => Ok(*p),
            BirthFunction::TruncatedLinear(t) => Ok(t.slope),
            BirthFunction::Custom(_) => {
                let mut k = self.slope_at_zero();
                for s in log_grid(1e-10, 1e6, 4000) {
                    k = k.max(self.value(s) / s);
                }
                if k.is_finite() {
                    Ok(k)
                } else {
                    Err(BirthError::UnboundedRatio)
                }
            }
        }
    }

    /// `sup_{s≥0} g(s)`.
    pub fn sup_value(&self) -> f64 {
        match self {
            BirthFunction::Nicholson { p } => p / std::f64::consts::E,
            _ => {
                let grid = log_grid(1e-10, 1e6, 6000);
                let (i, _) = grid
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (i, self.value(*s)))
                    .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
                let lo = grid[i.saturating_sub(1)];
                let hi = grid[(i + 1).min(grid.len() - 1)];
                let s = golden_max(|s| self.value(s), lo, hi);
                self.value(s).max(self.value(grid[i]))
            }
        }
    }
}

/// Finite differences: 5-point stencils for the first two derivatives,
/// 7-point for the third, each with its own step to balance truncation
/// against round-off.
fn finite_difference(f: &(dyn Fn(f64) -> f64 + Send + Sync), s: f64, order: usize) -> f64 {
    let scale = s.abs().max(1.0);
    match order {
        1 => {
            let h = 1e-3 * scale;
            (-f(s + 2.0 * h) + 8.0 * f(s + h) - 8.0 * f(s - h) + f(s - 2.0 * h)) / (12.0 * h)
        }
        2 => {
            let h = 1e-3 * scale;
            (-f(s + 2.0 * h) + 16.0 * f(s + h) - 30.0 * f(s) + 16.0 * f(s - h) - f(s - 2.0 * h)) / (12.0 * h * h)
        }
        _ => {
            let h = 1e-2 * scale;
            (-f(s + 3.0 * h) + 8.0 * f(s + 2.0 * h) - 13.0 * f(s + h) + 13.0 * f(s - h) - 8.0 * f(s - 2.0 * h)
                + f(s - 3.0 * h))
                / (8.0 * h * h * h)
        }
    }
}

pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Golden-section search for a maximizer on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= 1e-14 * hi.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Fixed point, hump, and the invariant interval `[ζ₁, ζ₂]`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Landmarks {
    pub kappa: f64,
    /// Location of the maximum; `None` for monotone `g`.
    pub s_m: Option<f64>,
    pub zeta1: f64,
    pub zeta2: f64,
    pub slope0: f64,
    pub slope_kappa: f64,
}

impl Landmarks {
    /// Shape of `g` restricted to the landmark interval.
    pub fn shape(&self) -> MapShape {
        match self.s_m {
            Some(peak) => MapShape::Unimodal { peak },
            None => MapShape::Increasing,
        }
    }
}

/// Positive fixed point of `g` (bisection unless closed form).
fn fixed_point(g: &BirthFunction) -> Result<f64, BirthError> {
    if let BirthFunction::Nicholson { p } = g {
        return if *p > 1.0 { Ok(p.ln()) } else { Err(BirthError::NoFixedPoint) };
    }
    let grid = log_grid(1e-9, 1e6, 8000);
    let d = |s: f64| g.value(s) - s;
    let mut roots = Vec::new();
    for w in grid.windows(2) {
        let (a, b) = (d(w[0]), d(w[1]));
        if a == 0.0 {
            roots.push(w[0]);
        } else if a.signum() != b.signum() && b != 0.0 {
            roots.push(bisect_root(d, w[0], w[1]));
        }
    }
    match roots.len() {
        0 => Err(BirthError::NoFixedPoint),
        1 => Ok(roots[0]),
        _ => Err(BirthError::MultipleFixedPoints(roots)),
    }
}

/// Location of the single interior maximum, `None` if `g` is monotone.
fn hump(g: &BirthFunction) -> Result<Option<f64>, BirthError> {
    if let BirthFunction::Nicholson { .. } = g {
        return Ok(Some(1.0));
    }
    let grid = log_grid(1e-9, 1e6, 8000);
    let vals: Vec<f64> = grid.iter().map(|s| g.value(*s)).collect();
    let mut extrema = Vec::new();
    let mut last_dir = 0i8;
    let mut last_idx = 0usize;
    for i in 1..grid.len() {
        let dv = vals[i] - vals[i - 1];
        let tol = 1e-13 * vals[i].abs().max(vals[i - 1].abs());
        let dir = if dv > tol {
            1
        } else if dv < -tol {
            -1
        } else {
            0
        };
        if dir == 0 {
            continue;
        }
        if last_dir != 0 && dir != last_dir {
            extrema.push((last_idx, last_dir));
        }
        last_dir = dir;
        last_idx = i;
    }
    match extrema.as_slice() {
        [] => Ok(None),
        [(i, 1)] => {
            let lo = grid[i.saturating_sub(1)];
            let hi = grid[(*i + 1).min(grid.len() - 1)];
            Ok(Some(golden_max(|s| g.value(s), lo, hi)))
        }
        _ => Err(BirthError::MultipleExtrema(extrema.iter().map(|(i, _)| grid[*i]).collect())),
    }
}

fn zeta1_admissible(g: &BirthFunction, z1: f64, kappa: f64, zeta2: f64, shape: MapShape) -> bool {
    if !(z1 > 0.0 && z1 < kappa && z1 < zeta2) {
        return false;
    }
    let (lo, hi) = image(|s| g.value(s), shape, (z1, zeta2));
    let slack = 1e-12 * zeta2;
    // invariance, minimum at the left end, g(s) > s below z1
    lo >= z1 - slack && hi <= zeta2 + slack && g.value(z1) <= lo + slack && g.value(z1) > z1
}

pub fn landmarks(g: &BirthFunction) -> Result<Landmarks, BirthError> {
    let kappa = fixed_point(g)?;
    let s_m = hump(g)?;
    let (zeta2, candidate, shape) = match s_m {
        Some(peak) => {
            let z2 = g.value(peak);
            (z2, g.value(z2).min(peak), MapShape::Unimodal { peak })
        }
        None => (kappa, kappa, MapShape::Increasing),
    };
    let zeta1 = if zeta1_admissible(g, candidate, kappa, zeta2, shape) {
        candidate
    } else {
        let mut lo = candidate;
        while !zeta1_admissible(g, lo, kappa, zeta2, shape) {
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(BirthError::NoFixedPoint);
            }
        }
        bisect_predicate(|z| zeta1_admissible(g, z, kappa, zeta2, shape), lo, candidate, 1e-13)
    };
    let slope_kappa = match g {
        BirthFunction::Nicholson { p } => 1.0 - p.ln(),
        _ => g.derivative(kappa, 1).value,
    };
    Ok(Landmarks { kappa, s_m, zeta1, zeta2, slope0: g.slope_at_zero(), slope_kappa })
}

/// Outcome of one sampled hypothesis check.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct HypothesisCheck {
    pub holds: bool,
    /// Sample point where the check failed, if any.
    pub witness: Option<f64>,
    pub note: String,
}

impl HypothesisCheck {
    fn pass(note: impl Into<String>) -> Self {
        HypothesisCheck { holds: true, witness: None, note: note.into() }
    }

    fn fail(witness: Option<f64>, note: impl Into<String>) -> Self {
        HypothesisCheck { holds: false, witness, note: note.into() }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct HypothesisReport {
    pub h: HypothesisCheck,
    pub b: HypothesisCheck,
    pub l: HypothesisCheck,
    /// Width of the linear zone when (L) holds.
    pub l_delta: Option<f64>,
    pub sl: HypothesisCheck,
}

fn check_grid(upper: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=12_000).map(|i| upper * i as f64 / 12_000.0).collect();
    grid.extend(log_grid(1e-10, upper, 2000));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

pub fn hypothesis_report(g: &BirthFunction) -> HypothesisReport {
    let lm = landmarks(g);
    let upper = lm.as_ref().map(|l| 3.0 * l.zeta2).unwrap_or(100.0);
    let grid = check_grid(upper);
    let slope0 = g.slope_at_zero();

    let h = match (&lm, g) {
        (Err(e), _) => HypothesisCheck::fail(None, e.to_string()),
        (Ok(_), BirthFunction::Nicholson { p }) => {
            if *p > 1.0 {
                HypothesisCheck::pass("closed form: single hump at s = 1, fixed points 0 and ln p")
            } else {
                HypothesisCheck::fail(Some(0.0), "g'(0) = p <= 1")
            }
        }
        (Ok(l), _) => {
            if g.value(0.0).abs() > 1e-14 {
                HypothesisCheck::fail(Some(0.0), "g(0) != 0")
            } else if let Some(s) = grid.iter().skip(1).find(|s| g.value(**s) <= 0.0) {
                HypothesisCheck::fail(Some(*s), "g not positive")
            } else if slope0 <= 1.0 {
                HypothesisCheck::fail(Some(0.0), "g'(0) <= 1")
            } else if let Some(s) = grid
                .iter()
                .skip(1)
                .find(|s| (g.value(**s) - **s).signum() != (l.kappa - **s).signum() && (**s - l.kappa).abs() > 1e-9)
            {
                HypothesisCheck::fail(Some(*s), "extra solution of g(s) = s")
            } else {
                HypothesisCheck::pass("sampled")
            }
        }
    };

    let b = match &lm {
        Err(e) => HypothesisCheck::fail(None, e.to_string()),
        Ok(l) => {
            let slack = 1e-9 * l.zeta2;
            let inside = grid.iter().filter(|s| **s >= l.zeta1 && **s <= l.zeta2);
            let below = grid.iter().filter(|s| **s > 0.0 && **s <= l.zeta1);
            if let Some(s) = inside.clone().find(|s| {
                let v = g.value(**s);
                v < l.zeta1 - slack || v > l.zeta2 + slack
            }) {
                HypothesisCheck::fail(Some(*s), "(B.1) g([ζ1,ζ2]) not inside [ζ1,ζ2]")
            } else if let Some(s) = inside.clone().find(|s| g.value(**s) < g.value(l.zeta1) - slack) {
                HypothesisCheck::fail(Some(*s), "(B.2) minimum not at ζ1")
            } else if let Some(s) = below.clone().find(|s| g.value(**s) > l.zeta2 + slack) {
                HypothesisCheck::fail(Some(*s), "(B.1) g([0,ζ1]) exceeds ζ2")
            } else if let Some(s) = below.clone().find(|s| g.value(**s) <= **s) {
                HypothesisCheck::fail(Some(*s), "(B.3) g(s) <= s below ζ1")
            } else if slope0 <= 1.0 {
                HypothesisCheck::fail(Some(0.0), "(B.3) g'(0) <= 1")
            } else {
                HypothesisCheck::pass(format!("ζ1 = {}, ζ2 = {}", l.zeta1, l.zeta2))
            }
        }
    };

    let sl_violation = |p: f64| {
        grid.iter()
            .copied()
            .find(|s| g.value(*s) > p * s * (1.0 + 1e-12) + 1e-15)
    };

    let (l, l_delta) = match g {
        BirthFunction::Nicholson { .. } => (HypothesisCheck::fail(Some(0.0), "no linear zone at the origin"), None),
        BirthFunction::TruncatedLinear(t) => match sl_violation(t.slope) {
            None => (HypothesisCheck::pass("linear on [0, 1/(nk)]"), Some(t.knee)),
            Some(s) => (HypothesisCheck::fail(Some(s), "g(s) > ks"), None),
        },
        BirthFunction::Custom(_) => {
            let fine = log_grid(1e-12, upper, 6000);
            let linear = |s: f64| (g.value(s) - slope0 * s).abs() <= 1e-12 * (slope0 * s).abs().max(1e-300);
            let delta = fine.iter().take_while(|s| linear(**s)).last().copied();
            match (delta, sl_violation(slope0)) {
                (Some(d), None) if g.sup_value().is_finite() => (HypothesisCheck::pass("sampled"), Some(d)),
                (None, _) => (HypothesisCheck::fail(Some(fine[0]), "not linear near the origin"), None),
                (_, Some(s)) => (HypothesisCheck::fail(Some(s), "g(s) > g'(0)s"), None),
                _ => (HypothesisCheck::fail(None, "g unbounded"), None),
            }
        }
    };

    let sl = match g {
        BirthFunction::Nicholson { .. } => HypothesisCheck::pass("closed form: p s e^{-s} <= p s"),
        _ => match sl_violation(slope0) {
            None => HypothesisCheck::pass("sampled"),
            Some(s) => HypothesisCheck::fail(Some(s), "g(s) > g'(0)s"),
        },
    };

    HypothesisReport { h, b, l, l_delta, sl }
}

/// Builds `γₙ` from `g`.
pub fn truncate_linearize(g: &BirthFunction, n: u32) -> Result<BirthFunction, BirthError> {
    if n == 0 {
        return Err(BirthError::InvalidParameter { name: "n", expected: "positive", value: 0.0 });
    }
    let k = g.sup_ratio()?;
    let level = 1.0 / n as f64;
    let max = g.sup_value();
    if level >= max {
        return Err(BirthError::TruncationLevel { level, max });
    }
    let knee = level / k;
    // first point right of the knee where g reaches 1/n
    let mut a = knee;
    let mut step = knee * 1e-3;
    let plateau_end = loop {
        let b = a + step;
        if g.value(b) >= level {
            break if g.value(a) >= level { a } else { bisect_root(|s| g.value(s) - level, a, b) };
        }
        a = b;
        step *= 1.5;
        if !a.is_finite() {
            return Err(BirthError::TruncationLevel { level, max });
        }
    };
    Ok(BirthFunction::TruncatedLinear(Box::new(TruncatedLinear {
        base: g.clone(),
        slope: k,
        level: n,
        knee,
        plateau_end,
    })))
}

/// `(Sg)(s) = g'''/g' - 3/2 (g''/g')²`.
pub fn schwarzian(g: &BirthFunction, s: f64) -> Result<Derivative, BirthError> {
    if let BirthFunction::Nicholson { .. } = g {
        if s == 1.0 {
            return Err(BirthError::CriticalPoint(s));
        }
        // closed form: -((s-2)² + 2) / (2 (1-s)²)
        let value = -((s - 2.0).powi(2) + 2.0) / (2.0 * (1.0 - s).powi(2));
        return Ok(Derivative { value, approximate: false });
    }
    let d1 = g.derivative(s, 1);
    if d1.value == 0.0 || d1.value.abs() < 1e-12 * g.value(s).abs().max(1.0) {
        return Err(BirthError::CriticalPoint(s));
    }
    let d2 = g.derivative(s, 2);
    let d3 = g.derivative(s, 3);
    let r = d2.value / d1.value;
    Ok(Derivative {
        value: d3.value / d1.value - 1.5 * r * r,
        approximate: d1.approximate || d2.approximate || d3.approximate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nich(p: f64) -> BirthFunction {
        BirthFunction::nicholson(p).unwrap()
    }

    #[test]
    fn nicholson_landmarks_closed_form() {
        let l = landmarks(&nich(9.0)).unwrap();
        assert!((l.kappa - 9f64.ln()).abs() < 1e-15);
        assert_eq!(l.s_m, Some(1.0));
        assert!((l.zeta2 - 9.0 / std::f64::consts::E).abs() < 1e-15);
        assert!((l.slope_kappa - (1.0 - 9f64.ln())).abs() < 1e-15);
        let g = nich(9.0);
        assert!((g.value(g.value(l.zeta2)) - 3.299).abs() < 1e-3);
        // lowered until g(ζ1) = g(ζ2)
        assert!((l.zeta1 - 0.138_772_739_143_686_2).abs() < 1e-10, "{}", l.zeta1);

        let l = landmarks(&nich(std::f64::consts::E)).unwrap();
        assert!((l.kappa - 1.0).abs() < 1e-15);
        assert_eq!(l.s_m, Some(1.0));
    }

    #[test]
    fn fixed_point_identity_for_nicholson() {
        for p in [1.5, 2.0, 5.0, 9.0, 30.0] {
            let g = nich(p);
            let l = landmarks(&g).unwrap();
            assert!((g.value(l.kappa) - l.kappa).abs() < 1e-12);
            assert!((g.derivative(l.kappa, 1).value - (1.0 - p.ln())).abs() < 1e-12);
            assert!(l.zeta1 <= l.kappa && l.kappa <= l.zeta2);
        }
    }

    #[test]
    fn monotone_regime_for_small_p() {
        let l = landmarks(&nich(2.0)).unwrap();
        assert!(l.kappa < l.s_m.unwrap());
        assert!(l.slope_kappa > 0.0);
        assert!(l.zeta1 < l.kappa && l.kappa - l.zeta1 < 1e-9);
    }

    #[test]
    fn custom_matches_nicholson_landmarks() {
        let c = BirthFunction::custom(Custom::from_expr("9*s*exp(-s)").unwrap());
        let a = landmarks(&c).unwrap();
        let b = landmarks(&nich(9.0)).unwrap();
        assert!((a.kappa - b.kappa).abs() < 1e-10);
        assert!((a.s_m.unwrap() - 1.0).abs() < 1e-7);
        assert!((a.zeta2 - b.zeta2).abs() < 1e-10);
        assert!((a.zeta1 - b.zeta1).abs() < 1e-8);
        assert!((a.slope0 - 9.0).abs() < 1e-6);
        assert!((a.slope_kappa - b.slope_kappa).abs() < 1e-8);
    }

    #[test]
    fn monotone_custom_has_no_hump() {
        // Beverton–Holt type
        let c = BirthFunction::custom(Custom::from_expr("3*s/(1+s)").unwrap());
        let l = landmarks(&c).unwrap();
        assert_eq!(l.s_m, None);
        assert!((l.kappa - 2.0).abs() < 1e-10);
    }

    #[test]
    fn landmark_errors() {
        assert_eq!(landmarks(&nich(0.5)), Err(BirthError::NoFixedPoint));
        let two_humps = BirthFunction::custom(Custom::from_expr("s*(2 + exp(-(s-1)^2) - exp(-(s-3)^2))*exp(-s/4)").unwrap());
        assert!(matches!(landmarks(&two_humps), Err(BirthError::MultipleExtrema(_))));
    }

    #[test]
    fn hypothesis_examples() {
        let r = hypothesis_report(&nich(9.0));
        assert!(r.h.holds && r.sl.holds && r.b.holds);
        assert!(!r.l.holds);
        let r = hypothesis_report(&nich(0.8));
        assert!(!r.h.holds);
        let t = truncate_linearize(&nich(2.0), 10).unwrap();
        let r = hypothesis_report(&t);
        assert!(r.l.holds, "{r:?}");
        assert!((r.l_delta.unwrap() - 1.0 / 20.0).abs() < 1e-15);
        let custom = BirthFunction::custom(Custom::from_expr("2*s*exp(-s)").unwrap());
        let r = hypothesis_report(&custom);
        assert!(r.h.holds && r.sl.holds && !r.l.holds, "{r:?}");
        let steep = BirthFunction::custom(Custom::from_expr("s*(1 + 4*s)*exp(-s)").unwrap());
        assert!(!hypothesis_report(&steep).sl.holds);
    }

    #[test]
    fn truncation_pieces() {
        let g = nich(2.0);
        let t = truncate_linearize(&g, 10).unwrap();
        assert!((t.value(0.01) - 0.02).abs() < 1e-15);
        assert_eq!(t.value(0.0), 0.0);
        let BirthFunction::TruncatedLinear(tl) = &t else { panic!() };
        assert!((tl.knee - 0.05).abs() < 1e-15);
        assert!((g.value(tl.plateau_end) - 0.1).abs() < 1e-12);
        for s in [tl.plateau_end + 1e-9, 0.5, 1.0, 4.0] {
            assert_eq!(t.value(s), g.value(s));
        }
        // continuity at both joints
        assert!((t.value(tl.knee) - t.value(tl.knee + 1e-12)).abs() < 1e-10);
        assert!((t.value(tl.plateau_end) - t.value(tl.plateau_end + 1e-12)).abs() < 1e-10);
        assert!(matches!(truncate_linearize(&g, 1), Err(BirthError::TruncationLevel { .. })));
    }

    #[test]
    fn truncation_converges_uniformly() {
        let g = nich(9.0);
        let grid: Vec<f64> = (0..=20_000).map(|i| i as f64 * 1e-3).collect();
        let gap = |n| {
            let t = truncate_linearize(&g, n).unwrap();
            grid.iter().map(|s| (t.value(*s) - g.value(*s)).abs()).fold(0.0, f64::max)
        };
        let gaps: Vec<f64> = [2, 5, 20, 100, 1000].into_iter().map(gap).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
        assert!(gaps[4] <= 1e-3 + 1e-12);
    }

    #[test]
    fn schwarzian_examples() {
        for p in [2.0, 9.0] {
            assert!((schwarzian(&nich(p), 0.0).unwrap().value + 3.0).abs() < 1e-15);
        }
        assert!(matches!(schwarzian(&nich(9.0), 1.0), Err(BirthError::CriticalPoint(_))));
        let linear = BirthFunction::custom(
            Custom::from_fn("linear", |s| 2.0 * s)
                .with_derivative(1, |_| 2.0)
                .with_derivative(2, |_| 0.0)
                .with_derivative(3, |_| 0.0),
        );
        assert_eq!(schwarzian(&linear, 0.7).unwrap().value, 0.0);

        let g = nich(9.0);
        let l = landmarks(&g).unwrap();
        for i in 0..1000 {
            let s = l.zeta1 + (l.zeta2 - l.zeta1) * (i as f64 + 0.5) / 1000.0;
            if s != 1.0 {
                assert!(schwarzian(&g, s).unwrap().value < 0.0);
            }
        }
    }

    #[test]
    fn schwarzian_finite_difference_fallback() {
        let closed = nich(9.0);
        let fd = BirthFunction::custom(Custom::from_fn("nicholson", |s| 9.0 * s * (-s).exp()));
        let mut s = 0.1;
        while s <= 3.0 {
            if (s - 1.0_f64).abs() > 0.05 {
                let a = schwarzian(&closed, s).unwrap().value;
                let b = schwarzian(&fd, s).unwrap();
                assert!(b.approximate);
                assert!((a - b.value).abs() < 1e-4, "s={s}: {a} vs {}", b.value);
            }
            s += 0.01;
        }
    }
}
