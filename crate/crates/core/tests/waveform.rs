use proptest::prelude::*;
use wavecrest::birth::landmarks;
use wavecrest::spectral::{kappa_char_negative_root, speeds};
use wavecrest::waveform::{analyze_wave, apply_a, residual, solve_profile, Profile, SolveStatus, SolverConfig};
use wavecrest::{BirthFunction, Kernel, ProblemSpec};

fn nicholson_problem(p: f64, kernel: Kernel, factor: f64) -> ProblemSpec {
    let g = BirthFunction::nicholson(p).unwrap();
    let c = speeds(1.0, &kernel, &g, 1.0).unwrap().c_star;
    ProblemSpec::with_speed(kernel, g, 1.0, factor * c).unwrap()
}

#[test]
fn monotone_front_for_small_p() {
    let pr = nicholson_problem(2.0, Kernel::dirac(0.0), 1.05);
    let s = solve_profile(&pr, &SolverConfig::default()).unwrap();
    assert_eq!(s.status, SolveStatus::Converged);
    assert!(s.residual.max < 1e-6, "{:?}", s.residual);
    let a = analyze_wave(&s.profile, &s.landmarks, &pr.g);
    assert!(a.monotone);
    assert_eq!(a.crossings, 0);
    assert!((s.profile.right_value() - 2f64.ln()).abs() < 1e-3);
    let l1 = s.lambda1.unwrap();
    assert!((l1 - 0.549_638).abs() < 1e-6);
    assert!((a.left_rate - l1).abs() < 0.05 * l1);
}

#[test]
fn below_minimal_speed_is_flagged() {
    let pr = nicholson_problem(2.0, Kernel::dirac(0.0), 0.5);
    let cfg = SolverConfig { t_left: 80.0, t_right: 80.0, ..SolverConfig::default() };
    let s = solve_profile(&pr, &cfg).unwrap();
    assert!(s.below_c_star);
    assert!(s.lambda1.is_none());
    // the iteration settles but the limit does not solve the profile equation
    assert!(s.residual.max > 1e-2, "{:?}", s.residual);
}

#[test]
fn oscillating_front_for_large_p() {
    let pr = nicholson_problem(9.0, Kernel::gaussian(0.2, 0.0).unwrap(), 1.05);
    let lm = landmarks(&pr.g).unwrap();
    let scan = kappa_char_negative_root(pr.speed(), pr.h, lm.slope_kappa, &pr.kernel).unwrap();
    assert!(!scan.has_root);
    let s = solve_profile(&pr, &SolverConfig::default()).unwrap();
    assert!(s.converged());
    assert!(s.residual.max < 1e-4);
    let a = analyze_wave(&s.profile, &lm, &pr.g);
    assert!(!a.monotone);
    assert!(a.crossings >= 3, "{}", a.crossings);
    assert!(a.range_inclusion);
    assert!(a.liminf_estimate >= 0.95 * lm.zeta1);
}

#[test]
fn residual_matches_hand_computation() {
    let g = BirthFunction::nicholson(2.0).unwrap();
    let k = 2f64.ln();
    let (eps, step) = (0.2, 0.01);
    let f = |t: f64| k / (1.0 + (-t).exp());
    let phi = Profile::from_fn(-10.0, step, 2001, eps, f).with_rates(1.0, 0.0);
    let r = residual(&phi, &g, &Kernel::dirac(0.0), 1.0, &SolverConfig::default()).unwrap();
    let mut expect: f64 = 0.0;
    for i in 1..2000 {
        let v = |j: usize| phi.values[j];
        let t = phi.t(i);
        let e = eps * (v(i + 1) - 2.0 * v(i) + v(i - 1)) / (step * step) - (v(i + 1) - v(i - 1)) / (2.0 * step) - v(i)
            + 2.0 * f(t - 1.0) * (-f(t - 1.0)).exp();
        expect = expect.max(e.abs());
    }
    assert!((r.max - expect).abs() < 1e-8, "{} vs {expect}", r.max);
}

#[test]
fn operator_fixes_equilibria() {
    let g = BirthFunction::nicholson(9.0).unwrap();
    let k = Kernel::gaussian(0.2, 0.0).unwrap();
    let cfg = SolverConfig::default();
    let kappa = 9f64.ln();
    let phi = Profile::constant(-20.0, 0.01, 4001, 0.3, kappa);
    assert!(apply_a(&phi, &g, &k, 1.0, &cfg).unwrap().values.iter().all(|v| (v - kappa).abs() < 1e-10));
    let zero = Profile::constant(-20.0, 0.01, 4001, 0.3, 0.0);
    assert!(apply_a(&zero, &g, &k, 1.0, &cfg).unwrap().values.iter().all(|v| v.abs() < 1e-10));
}

fn logistic(shift: f64, rate: f64, top: f64) -> impl Fn(f64) -> f64 {
    move |t| top / (1.0 + (-(rate * (t - shift))).exp())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn operator_preserves_order_for_monotone_g(
        s1 in -3.0..3.0f64, s2 in 0.0..2.0f64, r in 0.3..2.0f64, eps in 0.1..2.0f64,
    ) {
        // g = 2s e^{-s} is increasing on [0, 1]
        let g = BirthFunction::nicholson(2.0).unwrap();
        let k = Kernel::dirac(0.0);
        let cfg = SolverConfig { t_left: 20.0, t_right: 20.0, ..SolverConfig::default() };
        let lo = Profile::from_fn(-20.0, 0.01, 4001, eps, logistic(s1 + s2, r, 0.69)).with_rates(r, 0.0);
        let hi = Profile::from_fn(-20.0, 0.01, 4001, eps, logistic(s1, r, 0.69)).with_rates(r, 0.0);
        let a = apply_a(&lo, &g, &k, 1.0, &cfg).unwrap();
        let b = apply_a(&hi, &g, &k, 1.0, &cfg).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!(*x <= *y + 1e-12);
        }
    }

    #[test]
    fn operator_commutes_with_grid_shifts(m in 1usize..200, eps in 0.1..2.0f64) {
        let g = BirthFunction::nicholson(9.0).unwrap();
        let k = Kernel::gaussian(0.2, 0.0).unwrap();
        let cfg = SolverConfig { t_left: 20.0, t_right: 20.0, ..SolverConfig::default() };
        let tau = m as f64 * 0.01;
        let f = logistic(0.0, 1.0, 2.0);
        let phi = Profile::from_fn(-20.0, 0.01, 4001, eps, &f).with_rates(1.0, 0.0);
        let moved = Profile::from_fn(-20.0, 0.01, 4001, eps, |t| f(t + tau)).with_rates(1.0, 0.0);
        let a = apply_a(&phi, &g, &k, 1.0, &cfg).unwrap();
        let b = apply_a(&moved, &g, &k, 1.0, &cfg).unwrap();
        for i in 1000..2500 {
            prop_assert!((b.values[i] - a.values[i + m]).abs() < 1e-6, "i={i}");
        }
    }
}
