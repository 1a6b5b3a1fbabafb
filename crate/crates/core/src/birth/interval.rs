//! Iteration of interval images `Iₖ₊₁ = f(Iₖ)` for monotone or unimodal maps.

use serde::Serialize;

use super::BirthError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapShape {
    Increasing,
    Decreasing,
    /// Increasing up to `peak`, decreasing after.
    Unimodal { peak: f64 },
}

/// Exact image of `[a, b]` under a map of the given shape.
pub fn image(f: impl Fn(f64) -> f64, shape: MapShape, (a, b): (f64, f64)) -> (f64, f64) {
    let (fa, fb) = (f(a), f(b));
    match shape {
        MapShape::Increasing => (fa, fb),
        MapShape::Decreasing => (fb, fa),
        MapShape::Unimodal { peak } => {
            let lo = fa.min(fb);
            let hi = if a < peak && peak < b { f(peak) } else { fa.max(fb) };
            (lo, hi)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalIteration {
    pub converged: bool,
    /// Iteration stopped because the interval no longer changed.
    pub stalled: bool,
    pub iterations: usize,
    pub final_interval: (f64, f64),
    pub history: Vec<(f64, f64)>,
}

/// Iterates `I ← f(I)` from `i0` until the width drops below `tol`, the
/// interval stops moving, or `max_iter` is reached. Convergence also needs
/// `fixed_point`, when given, to lie in the final interval.
pub fn interval_map_iterate(
    f: impl Fn(f64) -> f64,
    shape: MapShape,
    i0: (f64, f64),
    fixed_point: Option<f64>,
    max_iter: usize,
    tol: f64,
) -> Result<IntervalIteration, BirthError> {
    let mut cur = (i0.0.min(i0.1), i0.0.max(i0.1));
    let mut history = vec![cur];
    let contains = |i: (f64, f64)| fixed_point.is_none_or(|k| k >= i.0 - tol && k <= i.1 + tol);
    let mut stalled = false;
    let mut iterations = 0;
    while iterations < max_iter {
        if cur.1 - cur.0 < tol {
            break;
        }
        let next = image(&f, shape, cur);
        if !next.0.is_finite() {
            return Err(BirthError::NotFinite(cur.0));
        }
        if !next.1.is_finite() {
            return Err(BirthError::NotFinite(cur.1));
        }
        iterations += 1;
        let moved = (next.0 - cur.0).abs() + (next.1 - cur.1).abs();
        history.push(next);
        let scale = next.0.abs().max(next.1.abs()).max(1.0);
        cur = next;
        if moved <= 4.0 * f64::EPSILON * scale {
            stalled = cur.1 - cur.0 >= tol;
            break;
        }
    }
    Ok(IntervalIteration {
        converged: cur.1 - cur.0 < tol && contains(cur),
        stalled,
        iterations,
        final_interval: cur,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contraction_converges_to_fixed_point() {
        let g = |s: f64| 2.0 * s * (-s).exp();
        let r = interval_map_iterate(g, MapShape::Unimodal { peak: 1.0 }, (0.3, 0.73), Some(2f64.ln()), 10_000, 1e-10)
            .unwrap();
        assert!(r.converged);
        assert!((r.final_interval.0 - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn two_cycle_stalls() {
        let g = |s: f64| 9.0 * s * (-s).exp();
        let peak = 1.0;
        let z2 = g(peak);
        let r = interval_map_iterate(g, MapShape::Unimodal { peak }, (g(z2), z2), Some(9f64.ln()), 10_000, 1e-10)
            .unwrap();
        assert!(!r.converged);
        assert!(r.final_interval.1 - r.final_interval.0 > 1.0);
    }

    #[test]
    fn image_uses_peak_only_when_inside() {
        let g = |s: f64| s * (2.0 - s);
        assert_eq!(image(g, MapShape::Unimodal { peak: 1.0 }, (0.5, 1.5)), (0.75, 1.0));
        assert_eq!(image(g, MapShape::Unimodal { peak: 1.0 }, (1.2, 1.5)), (0.75, 0.96));
        assert_eq!(image(|s| -s, MapShape::Decreasing, (1.0, 2.0)), (-2.0, -1.0));
    }
}
