use serde::Serialize;

use crate::birth::{image, BirthFunction, Landmarks};

use super::Profile;

/// Shape diagnostics of a computed profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveAnalysis {
    /// No decrement larger than `1e-10` anywhere on the grid.
    pub monotone: bool,
    /// Sign changes of `φ − κ` on `t ≥ 0`.
    pub crossings: usize,
    /// Least-squares slope of `ln φ` over the left quarter of the window.
    pub left_rate: f64,
    /// `[m, M] ⊆ g([m, M])` for the tail range `[m, M]`, slack `1e-3`.
    pub range_inclusion: bool,
    /// Minimum over the last quarter of the window.
    pub liminf_estimate: f64,
    /// Maximum over the last quarter of the window.
    pub limsup_estimate: f64,
    /// The profile is constant to `1e-12`.
    pub degenerate: bool,
}

const MONOTONE_SLACK: f64 = 1e-10;
const INCLUSION_SLACK: f64 = 1e-3;

pub fn analyze_wave(phi: &Profile, lm: &Landmarks, g: &BirthFunction) -> WaveAnalysis {
    let v = &phi.values;
    let n = v.len();
    let monotone = v.windows(2).all(|w| w[1] - w[0] >= -MONOTONE_SLACK);

    // hysteresis keeps round-off around κ from counting as crossings
    let band = 1e-8 * lm.kappa.max(1.0);
    let mut crossings = 0;
    let mut side = 0i8;
    for (i, x) in v.iter().enumerate() {
        if phi.t(i) < 0.0 {
            continue;
        }
        let d = x - lm.kappa;
        let s = if d > band {
            1
        } else if d < -band {
            -1
        } else {
            0
        };
        if s != 0 {
            if side != 0 && s != side {
                crossings += 1;
            }
            side = s;
        }
    }

    let quarter = (n / 4).max(2);
    let pts: Vec<(f64, f64)> = (0..quarter)
        .filter(|&i| v[i] > 0.0)
        .map(|i| (phi.t(i), v[i].ln()))
        .collect();
    let left_rate = least_squares_slope(&pts);

    let tail = &v[n - quarter..];
    let m = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let big_m = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = image(|s| g.value(s), lm.shape(), (m, big_m));
    let range_inclusion = lo <= m + INCLUSION_SLACK && big_m <= hi + INCLUSION_SLACK;

    WaveAnalysis {
        monotone,
        crossings,
        left_rate,
        range_inclusion,
        liminf_estimate: m,
        limsup_estimate: big_m,
        degenerate: phi.max() - phi.min() < 1e-12,
    }
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birth::landmarks;

    #[test]
    fn increasing_front_is_monotone() {
        let g = BirthFunction::nicholson(2.0).unwrap();
        let lm = landmarks(&g).unwrap();
        let k = lm.kappa;
        let phi = Profile::from_fn(-30.0, 0.01, 6001, 1.0, |t| k / (1.0 + (-0.5 * t).exp()));
        let a = analyze_wave(&phi, &lm, &g);
        assert!(a.monotone && !a.degenerate);
        assert_eq!(a.crossings, 0);
        assert!((a.left_rate - 0.5).abs() < 1e-3);
        assert!(a.range_inclusion);
    }

    #[test]
    fn damped_oscillation_counts_crossings() {
        let g = BirthFunction::nicholson(9.0).unwrap();
        let lm = landmarks(&g).unwrap();
        let k = lm.kappa;
        let phi = Profile::from_fn(-20.0, 0.01, 4001, 1.0, |t| {
            if t < 0.0 {
                k * (t).exp()
            } else {
                k + (-t).exp() * t.sin()
            }
        });
        let a = analyze_wave(&phi, &lm, &g);
        assert!(!a.monotone);
        assert!(a.crossings >= 3, "{}", a.crossings);
    }

    #[test]
    fn constant_is_degenerate() {
        let g = BirthFunction::nicholson(2.0).unwrap();
        let lm = landmarks(&g).unwrap();
        let phi = Profile::constant(0.0, 0.1, 50, 1.0, lm.kappa);
        assert!(analyze_wave(&phi, &lm, &g).degenerate);
    }
}
