use proptest::prelude::*;
use wavecrest::kernels::{aggregate_linearization, LinearTerm, Tabulated};
use wavecrest::Kernel;

fn kernel_strategy() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        (-3.0..3.0f64).prop_map(Kernel::dirac),
        (0.01..2.0f64, -3.0..3.0f64).prop_map(|(a, s)| Kernel::gaussian(a, s).unwrap()),
        (0.05..3.0f64, -3.0..3.0f64).prop_map(|(e, s)| Kernel::uniform(e, s).unwrap()),
        (0.05..1.0f64, -2.0..2.0f64).prop_map(|(a, s)| {
            let density: Vec<f64> = (0..=40).map(|i| ((i as f64 - 20.0) / 10.0 - s).powi(2) / a).map(|x| (-x).exp()).collect();
            Kernel::Tabulated(Tabulated::new(-2.0, 0.1, density).unwrap())
        }),
    ]
}

fn quad_mgf(k: &Kernel, w: f64) -> f64 {
    k.quadrature(1e-3, 80).iter().map(|(s, wt)| wt * (-w * s).exp()).sum()
}

#[test]
fn closed_forms_agree_with_quadrature() {
    let g = Kernel::gaussian(0.2, 0.0).unwrap();
    assert!((g.mgf(1.0).unwrap() - 0.2f64.exp()).abs() < 1e-14);
    assert!((quad_mgf(&g, 1.0) - 1.221_402_758).abs() < 1e-9);
    let u = Kernel::uniform(1.0, 0.0).unwrap();
    assert!((u.mgf(2.0).unwrap() - 2f64.sinh() / 2.0).abs() < 1e-14);
    assert!((quad_mgf(&u, 2.0) - 1.813_430_204).abs() < 1e-5);
    assert_eq!(Kernel::dirac(0.0).mgf(3.7).unwrap(), 1.0);
}

#[test]
fn shifted_gaussian_first_moment_by_quadrature() {
    let k = Kernel::gaussian(0.2, -1.5).unwrap();
    let m: f64 = k.quadrature(1e-3, 60).iter().map(|(s, w)| s * w).sum();
    assert!((m + 1.5).abs() < 1e-12);
    assert_eq!(k.first_moment(), -1.5);
}

#[test]
fn aggregate_of_gaussian_and_dirac() {
    let terms = [
        LinearTerm::new(1.0, 2.0, Kernel::gaussian(0.2, 0.0).unwrap()).unwrap(),
        LinearTerm::new(1.0, 2.0, Kernel::dirac(0.0)).unwrap(),
    ];
    let (p, k) = aggregate_linearization(&terms).unwrap();
    assert_eq!(p, 4.0);
    assert!((k.mgf(1.0).unwrap() - 1.110_701_379).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mgf_positive_and_convex(k in kernel_strategy(), w in -4.0..4.0f64) {
        let d = 1e-3;
        let (a, b, c) = (k.mgf(w - d).unwrap(), k.mgf(w).unwrap(), k.mgf(w + d).unwrap());
        prop_assert!(b > 0.0);
        prop_assert!(a - 2.0 * b + c >= -1e-12 * b);
    }

    #[test]
    fn total_mass_is_one_and_monotone(k in kernel_strategy(), a in -5.0..5.0f64, b1 in 0.0..3.0f64, b2 in 0.0..3.0f64) {
        prop_assert!((k.partial_mass(f64::NEG_INFINITY, f64::INFINITY).unwrap() - 1.0).abs() < 1e-10);
        let (lo, hi) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
        let m1 = k.partial_mass(a, a + lo).unwrap();
        let m2 = k.partial_mass(a, a + hi).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&m1));
        prop_assert!(m2 >= m1 - 1e-15);
    }

    #[test]
    fn mgf_slope_at_zero_is_minus_mean(k in kernel_strategy()) {
        let d = 1e-5;
        let slope = (k.mgf(d).unwrap() - k.mgf(-d).unwrap()) / (2.0 * d);
        prop_assert!((slope + k.first_moment()).abs() < 1e-6);
    }

    #[test]
    fn mixture_mgf_is_weighted_sum(
        k1 in kernel_strategy(),
        k2 in kernel_strategy(),
        w1 in 0.1..3.0f64,
        w2 in 0.1..3.0f64,
        ws in proptest::collection::vec(-3.0..3.0f64, 10),
    ) {
        let terms = [
            LinearTerm::new(w1, 1.5, k1.clone()).unwrap(),
            LinearTerm::new(w2, 0.5, k2.clone()).unwrap(),
        ];
        let (p, mix) = aggregate_linearization(&terms).unwrap();
        prop_assert!((p - (1.5 * w1 + 0.5 * w2)).abs() < 1e-14);
        for w in ws {
            let expect = (1.5 * w1 * k1.mgf(w).unwrap() + 0.5 * w2 * k2.mgf(w).unwrap()) / p;
            prop_assert!((mix.mgf(w).unwrap() - expect).abs() < 1e-10 * expect);
        }
    }
}
