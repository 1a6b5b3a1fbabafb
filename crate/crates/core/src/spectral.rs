//! Characteristic function `ψ(z, ε) = εz² − z − q + p e^{−zh} mgf(√ε z)`,
//! its real roots, and the critical parameters derived from them.

use serde::Serialize;
use thiserror::Error;

use crate::birth::{BirthError, BirthFunction};
use crate::kernels::{Kernel, MAX_EXPONENT};
use crate::numeric::{bisect_predicate, bisect_root};
use crate::report::ExtReal;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("{name} must be {expected}, got {value}")]
    InvalidParameter {
        name: &'static str,
        expected: &'static str,
        value: f64,
    },
    #[error("exponential overflow evaluating the characteristic function at z = {z}")]
    Overflow { z: f64 },
    #[error("could not bracket {what} within 200 doublings")]
    Bracket { what: &'static str },
    #[error("no positive roots even at eps = {eps}; check p > q and the kernel")]
    NoRootsAtSmallEps { eps: f64 },
    #[error(transparent)]
    Birth(#[from] BirthError),
}

/// Smallest `ε` probed when bracketing critical parameters.
pub const EPS_MIN: f64 = 1e-6;
/// Beyond this `ε` the critical parameter is reported as infinite.
pub const EPS_MAX: f64 = 1e12;
const EPS_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct CharFunction<'a> {
    pub eps: f64,
    pub h: f64,
    pub p: f64,
    pub q: f64,
    pub kernel: &'a Kernel,
}

/// Two real roots `lambda1 < lambda2` of a convex function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootPair {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl<'a> CharFunction<'a> {
    pub fn new(eps: f64, h: f64, p: f64, q: f64, kernel: &'a Kernel) -> Result<Self, SpectralError> {
        check_positive("eps", eps)?;
        check_nonnegative("h", h)?;
        check_positive("q", q)?;
        if !(p > q && p.is_finite()) {
            return Err(SpectralError::InvalidParameter { name: "p", expected: "finite and greater than q", value: p });
        }
        Ok(CharFunction { eps, h, p, q, kernel })
    }

    fn exponent(&self, z: f64) -> f64 {
        -z * self.h + self.kernel.ln_mgf(self.eps.sqrt() * z)
    }

    /// Saturating evaluation: `+∞` where the exponential term overflows.
    fn psi_sat(&self, z: f64) -> f64 {
        let e = self.exponent(z);
        let tail = if e > MAX_EXPONENT { f64::INFINITY } else { self.p * e.exp() };
        self.eps * z * z - z - self.q + tail
    }

    pub fn psi(&self, z: f64) -> Result<f64, SpectralError> {
        let v = self.psi_sat(z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(SpectralError::Overflow { z })
        }
    }

    /// `∂ψ/∂z`, saturating to `±∞` on overflow.
    pub fn dpsi(&self, z: f64) -> f64 {
        let se = self.eps.sqrt();
        let e = self.exponent(z);
        let slope = -self.h + se * self.kernel.d_ln_mgf(se * z);
        let tail = if e > MAX_EXPONENT {
            if slope == 0.0 {
                0.0
            } else {
                slope.signum() * f64::INFINITY
            }
        } else {
            self.p * e.exp() * slope
        };
        2.0 * self.eps * z - 1.0 + tail
    }

    /// Minimizer of `ψ` over `z > 0`, `None` when `ψ` is increasing there.
    fn argmin_positive(&self) -> Result<Option<(f64, f64)>, SpectralError> {
        convex_argmin(|z| self.dpsi(z), 1.0)
    }

    fn argmin_negative(&self) -> Result<Option<(f64, f64)>, SpectralError> {
        convex_argmin(|z| self.dpsi(z), -1.0)
    }

    /// Minimizer of `ψ` over `z > 0`, if interior.
    pub fn minimizer_positive(&self) -> Result<Option<f64>, SpectralError> {
        Ok(self.argmin_positive()?.map(|(z, _)| z))
    }

    /// Whether `min_{z>0} ψ(z) ≤ 0`.
    pub fn has_positive_roots(&self) -> Result<bool, SpectralError> {
        Ok(match self.argmin_positive()? {
            Some((z, _)) => self.psi_sat(z) <= 0.0,
            None => false,
        })
    }

    pub fn has_negative_roots(&self) -> Result<bool, SpectralError> {
        Ok(match self.argmin_negative()? {
            Some((z, _)) => self.psi_sat(z) <= 0.0,
            None => false,
        })
    }

    /// The two positive roots `λ₁ ≤ λ₂` when they exist.
    pub fn positive_roots(&self) -> Result<Option<RootPair>, SpectralError> {
        let Some((zmin, _)) = self.argmin_positive()? else { return Ok(None) };
        roots_around(|z| self.psi_sat(z), 0.0, zmin, 1.0)
    }

    /// The two negative roots when they exist.
    pub fn negative_roots(&self) -> Result<Option<RootPair>, SpectralError> {
        let Some((zmin, _)) = self.argmin_negative()? else { return Ok(None) };
        roots_around(|z| self.psi_sat(z), 0.0, zmin, -1.0)
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<(), SpectralError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SpectralError::InvalidParameter { name, expected: "positive", value: v })
    }
}

fn check_nonnegative(name: &'static str, v: f64) -> Result<(), SpectralError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SpectralError::InvalidParameter { name, expected: "nonnegative", value: v })
    }
}

/// Minimizer of a convex function on the half-line `dir·z > 0`, located by
/// bisection on the derivative. Returns the minimizer and the far end of
/// the bracket, or `None` when the minimum sits at `z = 0`.
fn convex_argmin(d: impl Fn(f64) -> f64, dir: f64) -> Result<Option<(f64, f64)>, SpectralError> {
    // derivative along the ray
    let dd = |t: f64| dir * d(dir * t);
    if dd(0.0) >= 0.0 {
        return Ok(None);
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while dd(hi) < 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(SpectralError::Bracket { what: "the minimizer" });
        }
    }
    let t = bisect_root(dd, 0.0, hi);
    Ok(Some((dir * t, dir * hi)))
}

/// Roots of a convex function on both sides of its minimizer `zmin`, the
/// inner one bounded by `origin`.
fn roots_around(
    f: impl Fn(f64) -> f64,
    origin: f64,
    zmin: f64,
    dir: f64,
) -> Result<Option<RootPair>, SpectralError> {
    if f(zmin) > 0.0 {
        return Ok(None);
    }
    let inner = bisect_root(&f, origin, zmin);
    let mut far = zmin + dir * zmin.abs().max(1.0);
    let mut doublings = 0;
    while f(far) <= 0.0 {
        far = zmin + 2.0 * (far - zmin);
        doublings += 1;
        if doublings > 200 {
            return Err(SpectralError::Bracket { what: "the outer root" });
        }
    }
    let outer = bisect_root(&f, zmin, far);
    let (lambda1, lambda2) = if inner < outer { (inner, outer) } else { (outer, inner) };
    Ok(Some(RootPair { lambda1, lambda2 }))
}

/// `ε₀`: supremum of `ε` for which `ψ(·, ε)` has positive roots.
pub fn critical_eps0(h: f64, p: f64, q: f64, kernel: &Kernel) -> Result<ExtReal, SpectralError> {
    let pred = |eps: f64| CharFunction::new(eps, h, p, q, kernel)?.has_positive_roots();
    if !pred(EPS_MIN)? {
        return Err(SpectralError::NoRootsAtSmallEps { eps: EPS_MIN });
    }
    let mut lo = EPS_MIN;
    let mut hi = lo * 10.0;
    while pred(hi)? {
        lo = hi;
        hi *= 10.0;
        if lo >= EPS_MAX {
            return Ok(ExtReal::INFINITY);
        }
    }
    Ok(ExtReal(bisect_eps(pred, lo, hi)?))
}

/// Predicate bisection that propagates errors.
fn bisect_eps(
    pred: impl Fn(f64) -> Result<bool, SpectralError>,
    lo: f64,
    hi: f64,
) -> Result<f64, SpectralError> {
    let mut err = None;
    let v = bisect_predicate(
        |e| match pred(e) {
            Ok(b) => b,
            Err(x) => {
                err.get_or_insert(x);
                false
            }
        },
        lo,
        hi,
        EPS_REL_TOL,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `z² − q + p mgf(z)`: the limit form whose negative roots decide whether `ε₁` is finite.
pub fn nega(p: f64, q: f64, kernel: &Kernel, z: f64) -> f64 {
    let l = kernel.ln_mgf(z);
    z * z - q + if l > MAX_EXPONENT { f64::INFINITY } else { p * l.exp() }
}

/// Negative roots of [`nega`] when there are two.
pub fn nega_roots(p: f64, q: f64, kernel: &Kernel) -> Result<Option<RootPair>, SpectralError> {
    let d = |z: f64| {
        let l = kernel.ln_mgf(z);
        let slope = kernel.d_ln_mgf(z);
        2.0 * z + if l > MAX_EXPONENT { slope.signum() * f64::INFINITY } else { p * l.exp() * slope }
    };
    let Some((zmin, _)) = convex_argmin(d, -1.0)? else { return Ok(None) };
    roots_around(|z| nega(p, q, kernel, z), 0.0, zmin, -1.0)
}

/// `ε₁`: infimum of `ε` for which `ψ(·, ε)` has negative roots.
pub fn critical_eps1(h: f64, p: f64, q: f64, kernel: &Kernel) -> Result<ExtReal, SpectralError> {
    check_nonnegative("h", h)?;
    check_positive("q", q)?;
    if kernel.first_moment() >= 0.0 || nega_roots(p, q, kernel)?.is_none() {
        return Ok(ExtReal::INFINITY);
    }
    let pred = |eps: f64| CharFunction::new(eps, h, p, q, kernel)?.has_negative_roots();
    let eps0 = critical_eps0(h, p, q, kernel)?;
    let mut lo = if eps0.is_infinite() { EPS_MIN } else { eps0.value() };
    while pred(lo)? {
        lo *= 0.5;
        if lo < 1e-300 {
            return Ok(ExtReal(0.0));
        }
    }
    let mut hi = lo * 10.0;
    while !pred(hi)? {
        lo = hi;
        hi *= 10.0;
        if lo >= EPS_MAX {
            return Ok(ExtReal::INFINITY);
        }
    }
    // pred is false at lo and true at hi: bisect the complement
    let v = bisect_eps(|e| pred(e).map(|b| !b), lo, hi)?;
    Ok(ExtReal(v))
}

fn speed(eps: ExtReal) -> f64 {
    if eps.is_infinite() {
        0.0
    } else {
        1.0 / eps.value().sqrt()
    }
}

/// Minimal speed `1/√ε₀` and related quantities for one problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralReport {
    pub h: f64,
    pub q: f64,
    /// `g'(0)`.
    pub p: f64,
    /// `sup g(s)/s`.
    pub k: f64,
    pub eps0: ExtReal,
    pub eps1: ExtReal,
    pub eps0_tilde: ExtReal,
    pub c_star: f64,
    pub c_sharp: f64,
    pub c_tilde_star: f64,
    /// `g(s) ≤ g'(0)s`, so that `c̃* = c*`.
    pub sublinear: bool,
    pub first_moment: f64,
    /// `|∫sK|/(h + 1/p)` when the first moment is nonpositive.
    pub lower_bound_am: Option<f64>,
    /// Sampled `ψ'' > 0` at `ε₀`.
    pub convexity_check: bool,
}

pub fn speeds(h: f64, kernel: &Kernel, g: &BirthFunction, q: f64) -> Result<SpectralReport, SpectralError> {
    let p = g.slope_at_zero();
    if !(p > q) {
        return Err(SpectralError::InvalidParameter { name: "g'(0)", expected: "greater than q", value: p });
    }
    let k = g.sup_ratio()?;
    let sublinear = k <= p * (1.0 + 1e-9);
    let eps0 = critical_eps0(h, p, q, kernel)?;
    let eps1 = critical_eps1(h, p, q, kernel)?;
    let eps0_tilde = if sublinear { eps0 } else { critical_eps0(h, k, q, kernel)? };
    let m1 = kernel.first_moment();
    let probe = if eps0.is_infinite() { 1.0 } else { eps0.value() };
    let cf = CharFunction::new(probe, h, p, q, kernel)?;
    let convexity_check = (-20..=20).map(|i| i as f64 * 0.25).all(|z| {
        let d = 1e-3;
        let (a, b, c) = (cf.psi_sat(z - d), cf.psi_sat(z), cf.psi_sat(z + d));
        !(a.is_finite() && b.is_finite() && c.is_finite()) || a - 2.0 * b + c > 0.0
    });
    Ok(SpectralReport {
        h,
        q,
        p,
        k,
        eps0,
        eps1,
        eps0_tilde,
        c_star: speed(eps0),
        c_sharp: speed(eps1),
        c_tilde_star: speed(eps0_tilde),
        sublinear,
        first_moment: m1,
        lower_bound_am: (m1 <= 0.0).then(|| m1.abs() / (h + 1.0 / p)),
        convexity_check,
    })
}

/// Outcome of scanning `(z/c)² − z − 1 + g'(κ) e^{−zh} mgf(z/c)` on `z < 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativeRootScan {
    pub has_root: bool,
    pub witness: Option<f64>,
    /// Largest sampled value of the function on the scan window.
    pub max_value: f64,
    pub z_low: f64,
}

pub fn kappa_char_negative_root(c: f64, h: f64, slope_kappa: f64, kernel: &Kernel) -> Result<NegativeRootScan, SpectralError> {
    check_positive("c", c)?;
    check_nonnegative("h", h)?;
    let f = |z: f64| {
        let e = -z * h + kernel.ln_mgf(z / c);
        let tail = if slope_kappa == 0.0 {
            0.0
        } else if e > MAX_EXPONENT {
            slope_kappa.signum() * f64::INFINITY
        } else {
            slope_kappa * e.exp()
        };
        (z / c).powi(2) - z - 1.0 + tail
    };
    let dominated = |z: f64| {
        let e = -z * h + kernel.ln_mgf(z / c);
        let poly = (z / c).powi(2) + z.abs() + 1.0;
        slope_kappa != 0.0 && (e > MAX_EXPONENT || slope_kappa.abs() * e.exp() >= 1e3 * poly)
    };
    let mut z_low = -50.0;
    while !dominated(z_low) && z_low > -1e6 {
        z_low *= 2.0;
    }
    let n = 20_000;
    let (a, b) = (1e-9f64.ln(), (-z_low).ln());
    let mut zs: Vec<f64> = (0..n).map(|i| -(a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    zs.reverse(); // ascending from z_low toward 0
    let mut max_value = f64::NEG_INFINITY;
    let mut witness = None;
    let mut prev: Option<(f64, f64)> = None;
    for &z in &zs {
        let v = f(z);
        max_value = max_value.max(v);
        if let Some((zp, vp)) = prev {
            if witness.is_none() && (v == 0.0 || (vp.signum() != v.signum() && vp != 0.0)) {
                witness = Some(if v == 0.0 { z } else { bisect_root(f, zp, z) });
            }
        }
        prev = Some((z, v));
    }
    Ok(NegativeRootScan { has_root: witness.is_some(), witness, max_value, z_low })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_at_zero_is_p_minus_q() {
        let k = Kernel::gaussian(0.2, 0.3).unwrap();
        let cf = CharFunction::new(0.4, 1.0, 9.0, 1.0, &k).unwrap();
        assert!((cf.psi(0.0).unwrap() - 8.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_case() {
        let k = Kernel::dirac(0.0);
        let cf = CharFunction::new(0.1, 0.0, 2.0, 1.0, &k).unwrap();
        assert!((cf.psi(1.0).unwrap() - 0.1).abs() < 1e-15);
        let r = cf.positive_roots().unwrap().unwrap();
        let d = (1.0f64 - 0.4).sqrt();
        assert!((r.lambda1 - (1.0 - d) / 0.2).abs() < 1e-12);
        assert!((r.lambda2 - (1.0 + d) / 0.2).abs() < 1e-10);
        let cf = CharFunction::new(0.3, 0.0, 2.0, 1.0, &k).unwrap();
        assert!(cf.positive_roots().unwrap().is_none());
        assert!((critical_eps0(0.0, 2.0, 1.0, &k).unwrap().value() - 0.25).abs() < 1e-12);
        assert!(critical_eps1(0.0, 2.0, 1.0, &k).unwrap().is_infinite());
    }

    #[test]
    fn derivative_matches_central_difference() {
        let kernels = [Kernel::gaussian(0.2, -0.4).unwrap(), Kernel::uniform(1.3, 0.2).unwrap(), Kernel::dirac(-1.0)];
        for k in &kernels {
            let cf = CharFunction::new(0.37, 1.0, 9.0, 1.0, k).unwrap();
            for z in [-2.0, -0.3, 0.0, 0.5, 2.0, 4.0] {
                let d = 1e-6;
                let fd = (cf.psi(z + d).unwrap() - cf.psi(z - d).unwrap()) / (2.0 * d);
                assert!((fd - cf.dpsi(z)).abs() < 1e-6 * fd.abs().max(1.0), "{k:?} z={z}");
            }
        }
    }

    #[test]
    fn shifted_dirac_nega_roots() {
        let k = Kernel::dirac(-5.0);
        assert!(nega(2.0, 1.0, &k, -1.0) > 0.0);
        assert!(nega(2.0, 1.0, &k, -0.9) < 0.0);
        let r = nega_roots(2.0, 1.0, &k).unwrap().unwrap();
        assert!(r.lambda1 < r.lambda2 && r.lambda2 < 0.0);
        assert!(nega(2.0, 1.0, &k, r.lambda1).abs() < 1e-9);
        assert!(nega(2.0, 1.0, &k, r.lambda2).abs() < 1e-9);
        let e1 = critical_eps1(0.0, 2.0, 1.0, &k).unwrap();
        let e0 = critical_eps0(0.0, 2.0, 1.0, &k).unwrap();
        assert!(!e1.is_infinite() && e0.value() < e1.value(), "{e0:?} {e1:?}");
    }

    #[test]
    fn negative_root_scan_quadratics() {
        let k = Kernel::dirac(0.0);
        let r = kappa_char_negative_root(1.0, 0.0, 0.0, &k).unwrap();
        assert!((r.witness.unwrap() - (1.0 - 5f64.sqrt()) / 2.0).abs() < 1e-12);
        let r = kappa_char_negative_root(1.0, 0.0, -0.5, &k).unwrap();
        assert!((r.witness.unwrap() - (1.0 - 7f64.sqrt()) / 2.0).abs() < 1e-12);
        let r = kappa_char_negative_root(3.664, 1.0, 1.0 - 9f64.ln(), &k).unwrap();
        assert!(!r.has_root);
        assert!(r.max_value < 0.0 && r.max_value > 1.0 - 9f64.ln() - 1.0 - 1e-6);
    }
}
