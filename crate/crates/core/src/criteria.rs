//! Wavefront certificates: the weights `ξ` and `𝒟`, condition (Dc), the
//! interval-map confirmation, speed classes, and the plateau bound.

use serde::Serialize;
use thiserror::Error;

use crate::birth::{
    hypothesis_report, interval_map_iterate, landmarks, log_grid, schwarzian, BirthError, BirthFunction,
    Landmarks,
};
use crate::kernels::{Kernel, KernelError};
use crate::numeric::bisect_root;
use crate::problem::{ProblemError, ProblemSpec};
use crate::report::{ExtReal, OrderedMap};
use crate::spectral::{kappa_char_negative_root, speeds, SpectralError, SpectralReport};
use crate::waveform::lambda_mu;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CriteriaError {
    #[error("{name} must be {expected}, got {value}")]
    InvalidParameter {
        name: &'static str,
        expected: &'static str,
        value: f64,
    },
    #[error("certificates assume q = 1, got q = {0}")]
    UnsupportedDecay(f64),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Birth(#[from] BirthError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// `ξ(u) = (μ−λ) / (μe^{−λu} − λe^{−μu})`, decreasing from `ξ(0) = 1`.
pub fn xi(eps: f64, u: f64) -> f64 {
    if u == f64::INFINITY {
        return 0.0;
    }
    let lm = lambda_mu(eps);
    let (l, m) = (lm.lambda, lm.mu);
    // divided through by e^{−λu} so nothing overflows for large u
    (m - l) * (l * u).exp() / (m - l * (-(m - l) * u).exp())
}

/// `𝒟(s) = min{∫_{−h/√ε}^{−(s+h)/√ε} K, ξ(−s)}` for `s ≤ 0`.
pub fn d_func(spec: &ProblemSpec, s: f64) -> Result<f64, CriteriaError> {
    if !(s <= 0.0) {
        return Err(CriteriaError::InvalidParameter { name: "s", expected: "nonpositive", value: s });
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let se = spec.eps.sqrt();
    let mass = spec.kernel.partial_mass(-spec.h / se, -(s + spec.h) / se)?;
    Ok(mass.min(xi(spec.eps, -s)))
}

/// Crossing point of the two terms of `𝒟`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalS {
    /// `s'`, possibly `−∞`.
    pub s: ExtReal,
    pub d: f64,
    /// Mass term minus `ξ` at `s'`; large only at a jump of the kernel mass.
    pub residual: f64,
    pub jump: bool,
}

pub fn optimal_sstar(spec: &ProblemSpec) -> Result<OptimalS, CriteriaError> {
    let se = spec.eps.sqrt();
    let h = spec.h;
    let diff = |u: f64| -> f64 {
        let mass = spec.kernel.partial_mass(-h / se, (u - h) / se).unwrap_or(0.0);
        mass - xi(spec.eps, u)
    };
    let limit = 1e6 / se;
    let mut hi = 1.0f64.min(limit);
    while diff(hi) <= 0.0 {
        if hi >= limit {
            return Ok(OptimalS { s: ExtReal(f64::NEG_INFINITY), d: 0.0, residual: diff(limit), jump: false });
        }
        hi = (2.0 * hi).min(limit);
    }
    let u = bisect_root(diff, 0.0, hi);
    let residual = diff(u);
    Ok(OptimalS { s: ExtReal(-u), d: d_func(spec, -u)?, residual, jump: residual.abs() > 1e-8 })
}

/// One named condition with its numeric margin (positive means satisfied
/// with room to spare) and the inputs it was evaluated from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub holds: bool,
    pub margin: f64,
    pub inputs: OrderedMap<ExtReal>,
}

impl Condition {
    fn new(holds: bool, margin: f64, inputs: &[(&str, f64)]) -> Self {
        let mut map = OrderedMap::new();
        for (k, v) in inputs {
            map.push(*k, ExtReal(*v));
        }
        Condition { holds, margin, inputs: map }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedClass {
    /// `c < c*`: no semi-wavefront.
    BelowCStar,
    /// `c* ≤ c ≤ c#`.
    Between,
    /// `c > c#` and `c* ≤ c < c̃*`: persistence, existence not covered.
    AboveCSharpOnly,
    /// `c ≥ c̃*` and `c > c#`: semi-wavefronts exist and persist.
    Admissible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedClassification {
    pub speed: f64,
    pub class: SpeedClass,
    pub no_semi_wavefront: bool,
    pub persistent: bool,
    pub semi_wavefront_exists: bool,
    pub spectral: SpectralReport,
}

const SPEED_REL_TOL: f64 = 1e-12;

fn classify(c: f64, s: &SpectralReport) -> SpeedClass {
    let at_least = |threshold: f64| c >= threshold * (1.0 - SPEED_REL_TOL);
    if !at_least(s.c_star) {
        SpeedClass::BelowCStar
    } else if c <= s.c_sharp {
        SpeedClass::Between
    } else if at_least(s.c_tilde_star) {
        SpeedClass::Admissible
    } else {
        SpeedClass::AboveCSharpOnly
    }
}

fn require_unit_decay(spec: &ProblemSpec) -> Result<(), CriteriaError> {
    if spec.q != 1.0 {
        return Err(CriteriaError::UnsupportedDecay(spec.q));
    }
    Ok(())
}

pub fn speed_classification(spec: &ProblemSpec) -> Result<SpeedClassification, CriteriaError> {
    require_unit_decay(spec)?;
    let spectral = speeds(spec.h, &spec.kernel, &spec.g, spec.q)?;
    Ok(classification_from(spec.speed(), spectral))
}

fn classification_from(c: f64, spectral: SpectralReport) -> SpeedClassification {
    let class = classify(c, &spectral);
    SpeedClassification {
        speed: c,
        class,
        no_semi_wavefront: class == SpeedClass::BelowCStar,
        persistent: c > spectral.c_sharp,
        semi_wavefront_exists: class == SpeedClass::Admissible,
        spectral,
    }
}

/// Best `ε` for the simplified condition over a log grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplifiedSearch {
    pub best_margin: f64,
    pub best_eps: Option<f64>,
    /// Largest admissible grid `ε` at which the condition holds.
    pub largest_eps: Option<f64>,
    /// `max{c̃*, 1/√ε}` for that `ε`: speeds from here up are covered.
    pub speed_floor: ExtReal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub speed: f64,
    pub eps: f64,
    pub speed_class: SpeedClass,
    pub semi_wavefront_exists: bool,
    pub wavefront_certified: bool,
    pub oscillatory_predicted: bool,
    /// Speed above which wavefronts are certified and below which none
    /// exist, when the two thresholds meet.
    pub existence_threshold: Option<f64>,
    pub landmarks: Landmarks,
    pub spectral: SpectralReport,
    pub sstar: OptimalS,
    pub simplified_search: SimplifiedSearch,
    pub conditions: OrderedMap<Condition>,
}

fn mainex2_product(kernel: &Kernel, h: f64, eps: f64, slope_kappa: f64) -> Result<f64, CriteriaError> {
    let mass = kernel.partial_mass(-h / eps.sqrt(), 0.0)?;
    Ok((1.0 - (-h).exp().min(mass)) * slope_kappa)
}

pub fn wavefront_certificate(spec: &ProblemSpec) -> Result<CertificateReport, CriteriaError> {
    require_unit_decay(spec)?;
    let g = &spec.g;
    let lm = landmarks(g)?;
    let hyp = hypothesis_report(g);
    let class = speed_classification(spec)?;
    let spectral = class.spectral.clone();
    let c = spec.speed();
    let mut conditions = OrderedMap::new();

    conditions.push("hypothesis_h", Condition::new(hyp.h.holds, 0.0, &[]));

    // (i) negative Schwarzian on [ζ₁, ζ₂] away from the hump
    let mut worst = f64::NEG_INFINITY;
    let mut approximate = false;
    for i in 0..1000 {
        let s = lm.zeta1 + (lm.zeta2 - lm.zeta1) * (i as f64 + 0.5) / 1000.0;
        if lm.s_m.is_some_and(|m| (s - m).abs() < 1e-9) {
            continue;
        }
        if let Ok(d) = schwarzian(g, s) {
            worst = worst.max(d.value);
            approximate |= d.approximate;
        }
    }
    conditions.push(
        "schwarzian_negative",
        Condition::new(worst < 0.0, -worst, &[("max_sg", worst), ("approximate", f64::from(u8::from(approximate)))]),
    );

    // (ii) g²(ζ₂) ≥ κ
    let g2 = g.value(g.value(lm.zeta2));
    conditions.push(
        "second_iterate",
        Condition::new(g2 >= lm.kappa, g2 - lm.kappa, &[("g2_zeta2", g2), ("kappa", lm.kappa)]),
    );

    // (iii) (1 − 𝒟(s*)) g'(κ) > −1, and the simplified non-strict form
    let sstar = optimal_sstar(spec)?;
    let dc_product = (1.0 - sstar.d) * lm.slope_kappa;
    let dc = Condition::new(
        dc_product > -1.0,
        dc_product + 1.0,
        &[("d_sstar", sstar.d), ("sstar", sstar.s.value()), ("product", dc_product)],
    );
    let simple = mainex2_product(&spec.kernel, spec.h, spec.eps, lm.slope_kappa)?;
    let simplified = Condition::new(
        simple >= -1.0,
        simple + 1.0,
        &[("product", simple), ("exp_neg_h", (-spec.h).exp())],
    );
    let search = simplified_search(spec, &spectral, lm.slope_kappa)?;

    // (iv) interval map f(s) = κ𝒟 + (1 − 𝒟) g(s)
    let d = sstar.d;
    let f = |s: f64| lm.kappa * d + (1.0 - d) * g.value(s);
    let it = interval_map_iterate(f, lm.shape(), (lm.zeta1, lm.zeta2), Some(lm.kappa), 10_000, 1e-9)?;
    let (a, b) = it.final_interval;
    let interval = Condition::new(
        it.converged,
        1e-9 - (b - a),
        &[("final_lo", a), ("final_hi", b), ("iterations", it.iterations as f64)],
    );

    let schwarz_ok = conditions.get("schwarzian_negative").is_some_and(|c| c.holds);
    let iterate_ok = g2 >= lm.kappa;
    let contraction_ok = dc.holds || simplified.holds || interval.holds;
    conditions.push("dc_strict", dc);
    conditions.push("simplified_condition", simplified);
    conditions.push("interval_map", interval);

    let semi = class.semi_wavefront_exists && hyp.h.holds;
    conditions.push(
        "speed_admissible",
        Condition::new(semi, c - spectral.c_tilde_star, &[("speed", c), ("c_tilde_star", spectral.c_tilde_star)]),
    );
    let wavefront_certified = semi && schwarz_ok && iterate_ok && contraction_ok;

    let scan = kappa_char_negative_root(c, spec.h, lm.slope_kappa, &spec.kernel)?;
    let mut tail = vec![("max_value", scan.max_value), ("z_low", scan.z_low)];
    if let Some(w) = scan.witness {
        tail.push(("witness", w));
    }
    conditions.push("no_negative_tail_root", Condition::new(!scan.has_root, -scan.max_value, &tail));
    let oscillatory_predicted = lm.slope_kappa < 0.0 && !scan.has_root;

    let existence_threshold = (!search.speed_floor.is_infinite()
        && search.speed_floor.value() <= spectral.c_star * (1.0 + 1e-9))
        .then_some(spectral.c_star);

    Ok(CertificateReport {
        speed: c,
        eps: spec.eps,
        speed_class: class.class,
        semi_wavefront_exists: semi,
        wavefront_certified,
        oscillatory_predicted,
        existence_threshold,
        landmarks: lm,
        spectral,
        sstar,
        simplified_search: search,
        conditions,
    })
}

fn simplified_search(spec: &ProblemSpec, spectral: &SpectralReport, slope_kappa: f64) -> Result<SimplifiedSearch, CriteriaError> {
    let cap = spectral.eps0_tilde.value();
    let mut best_margin = f64::NEG_INFINITY;
    let mut best_eps = None;
    let mut largest_eps = None;
    // the grid plus ε̃₀ itself, where c = c̃* is admissible
    let mut grid = log_grid(1e-4, 1e4, 801);
    grid.push(cap);
    for eps in grid.into_iter().filter(|e| *e <= cap) {
        let margin = mainex2_product(&spec.kernel, spec.h, eps, slope_kappa)? + 1.0;
        if margin > best_margin {
            best_margin = margin;
            best_eps = Some(eps);
        }
        if margin >= 0.0 && largest_eps.is_none_or(|l| eps > l) {
            largest_eps = Some(eps);
        }
    }
    let speed_floor = match largest_eps {
        Some(e) => ExtReal(spectral.c_tilde_star.max(1.0 / e.sqrt())),
        None => ExtReal::INFINITY,
    };
    Ok(SimplifiedSearch { best_margin, best_eps, largest_eps, speed_floor })
}

/// `ε = D_m/(c − B)²` with the kernel `K_{1/D_m}`.
pub fn reduce_advection(d_m: f64, b: f64, h: f64, c: f64, g: BirthFunction) -> Result<ProblemSpec, CriteriaError> {
    if !(d_m > 0.0 && d_m.is_finite()) {
        return Err(CriteriaError::InvalidParameter { name: "d_m", expected: "positive", value: d_m });
    }
    if !(c > b) {
        return Err(CriteriaError::InvalidParameter { name: "c", expected: "greater than B", value: c });
    }
    let eps = d_m / (c - b).powi(2);
    Ok(ProblemSpec::new(Kernel::gaussian(1.0 / d_m, 0.0)?, g, h, 1.0, None, Some(eps))?)
}

/// Inverse of [`reduce_advection`]: `c = B + √(D_m/ε)`.
pub fn speed_from_eps(d_m: f64, b: f64, eps: f64) -> f64 {
    b + (d_m / eps).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlateauBound {
    pub q_star: ExtReal,
    /// `𝒟₁` level the plateau half-width must reach.
    pub target: f64,
    pub note: Option<String>,
}

/// `𝒟₁(q) = ∫_{−(q+h)/√ε}^{(q−h)/√ε} K`.
pub fn plateau_mass(spec: &ProblemSpec, q: f64) -> Result<f64, CriteriaError> {
    let se = spec.eps.sqrt();
    Ok(spec.kernel.partial_mass(-(q + spec.h) / se, (q - spec.h) / se)?)
}

pub fn plateau_bound(spec: &ProblemSpec, alpha: f64) -> Result<PlateauBound, CriteriaError> {
    let lm = landmarks(&spec.g)?;
    if !(alpha > lm.kappa) {
        return Err(CriteriaError::InvalidParameter { name: "alpha", expected: "greater than kappa", value: alpha });
    }
    let ga = spec.g.value(alpha);
    let sup = spec.g.sup_value();
    if ga >= lm.kappa || sup <= lm.kappa {
        return Ok(PlateauBound {
            q_star: ExtReal::INFINITY,
            target: f64::NAN,
            note: Some("g(alpha) >= kappa: no contradiction from a plateau".into()),
        });
    }
    let target = (sup - lm.kappa) / (sup - ga);
    let excess = |q: f64| plateau_mass(spec, q).unwrap_or(0.0) - target;
    let mut hi = 1.0;
    while excess(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Ok(PlateauBound { q_star: ExtReal::INFINITY, target, note: Some("mass target not reached".into()) });
        }
    }
    let q = if excess(0.0) >= 0.0 { 0.0 } else { bisect_root(excess, 0.0, hi) };
    Ok(PlateauBound { q_star: ExtReal(q), target, note: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p9(eps: f64, h: f64) -> ProblemSpec {
        ProblemSpec::with_eps(Kernel::gaussian(0.2, 0.0).unwrap(), BirthFunction::nicholson(9.0).unwrap(), h, eps)
            .unwrap()
    }

    #[test]
    fn xi_values() {
        assert_eq!(xi(0.3, 0.0), 1.0);
        let v = xi(1.0, 1.0);
        assert!((v - 0.715_667_7).abs() < 1e-7, "{v}");
        assert!((-1f64).exp() <= v && v < 1.0);
        assert!(xi(1.0, 1e3) < 1e-10);
        assert_eq!(xi(1.0, f64::INFINITY), 0.0);
    }

    #[test]
    fn d_func_cases() {
        let spec = ProblemSpec::with_eps(Kernel::dirac(0.0), BirthFunction::nicholson(2.0).unwrap(), 1.0, 0.5).unwrap();
        assert_eq!(d_func(&spec, 0.0).unwrap(), 0.0);
        assert!((d_func(&spec, -2.0).unwrap() - xi(0.5, 2.0)).abs() < 1e-15);
        assert!(d_func(&spec, 0.5).is_err());
    }

    #[test]
    fn sstar_dirac_jump() {
        let spec = ProblemSpec::with_eps(Kernel::dirac(0.0), BirthFunction::nicholson(2.0).unwrap(), 1.0, 0.5).unwrap();
        let s = optimal_sstar(&spec).unwrap();
        assert!((s.s.value() + 1.0).abs() < 1e-12);
        assert!(s.jump);
        assert!((s.d - xi(0.5, 1.0)).abs() < 1e-10);
    }

    #[test]
    fn sstar_gaussian_crossing() {
        let spec = p9(0.3725, 1.0);
        let s = optimal_sstar(&spec).unwrap();
        assert!(s.residual.abs() < 1e-10);
        assert!(!s.jump);
        for i in 1..200 {
            let t = -(i as f64) * 0.05;
            assert!(d_func(&spec, t).unwrap() <= s.d + 1e-12);
        }
    }

    #[test]
    fn sstar_without_mass() {
        let spec = ProblemSpec::with_eps(Kernel::dirac(-1.0), BirthFunction::nicholson(2.0).unwrap(), 0.0, 0.5).unwrap();
        let s = optimal_sstar(&spec).unwrap();
        assert_eq!(s.s.value(), f64::NEG_INFINITY);
        assert_eq!(s.d, 0.0);
    }

    #[test]
    fn advection_round_trip() {
        let g = BirthFunction::nicholson(9.0).unwrap();
        let spec = reduce_advection(5.0, 0.0, 1.0, 3.6637, g.clone()).unwrap();
        assert!((spec.eps - 0.37254).abs() < 1e-4);
        assert_eq!(spec.kernel, Kernel::gaussian(0.2, 0.0).unwrap());
        let spec = reduce_advection(1.0, 0.0, 1.0, 2.0, g.clone()).unwrap();
        assert!((spec.eps - 0.25).abs() < 1e-15);
        let spec = reduce_advection(2.5, 0.7, 1.0, 4.1, g.clone()).unwrap();
        assert!((speed_from_eps(2.5, 0.7, spec.eps) - 4.1).abs() < 1e-12);
        assert!(reduce_advection(5.0, 1.0, 1.0, 1.0, g).is_err());
    }

    #[test]
    fn plateau_examples() {
        let spec = ProblemSpec::with_eps(Kernel::dirac(0.0), BirthFunction::nicholson(9.0).unwrap(), 1.0, 0.4).unwrap();
        let b = plateau_bound(&spec, 4.0).unwrap();
        assert!((b.q_star.value() - 1.0).abs() < 1e-9);
        assert!((b.target - 0.420_03).abs() < 1e-4, "{}", b.target);
        let monotone = crate::birth::Custom::from_expr("3*s/(1+s)").unwrap();
        let flat = ProblemSpec::with_eps(Kernel::dirac(0.0), BirthFunction::custom(monotone), 1.0, 0.4).unwrap();
        assert!(plateau_bound(&flat, 3.0).unwrap().q_star.is_infinite());
        assert!(plateau_bound(&spec, 1.0).is_err());
        let spec = p9(0.4, 1.0);
        let b = plateau_bound(&spec, 4.0).unwrap();
        assert!((plateau_mass(&spec, b.q_star.value()).unwrap() - b.target).abs() < 1e-10);
    }
}
