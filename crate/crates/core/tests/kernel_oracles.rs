use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use qmf::kernel::{self, EndpointSingularity, GaussLegendre, KahanSum};
use qmf::{Error, Tolerance};

/// K_ν(x) = ∫₀^∞ e^{−x cosh t} cosh(νt) dt by the trapezoidal rule, which
/// converges geometrically for this analytic, doubly decaying integrand.
fn bessel_k_trapezoid(nu: f64, x: f64) -> f64 {
    let h = 1.0 / 64.0;
    // e^{−x} is factored out so the exponent x(cosh t − 1) stays small
    let mut sum = 0.5;
    let mut k: f64 = 1.0;
    loop {
        let t = k * h;
        let term = (-2.0 * x * (0.5 * t).sinh().powi(2)).exp() * (nu * t).cosh();
        sum += term;
        if term < 1e-22 * sum {
            break;
        }
        k += 1.0;
    }
    sum * h * (-x).exp()
}

/// I₀ and I₁ by their everywhere-convergent power series.
fn bessel_i01(x: f64) -> (f64, f64) {
    let q = 0.25 * x * x;
    let (mut t0, mut t1) = (1.0, 0.5 * x);
    let (mut i0, mut i1) = (t0, t1);
    for k in 1..200 {
        let kf = k as f64;
        t0 *= q / (kf * kf);
        t1 *= q / (kf * (kf + 1.0));
        i0 += t0;
        i1 += t1;
        if t0 < 1e-18 * i0 {
            break;
        }
    }
    (i0, i1)
}

#[test]
fn bessel_k_matches_the_integral_representation() {
    for &x in &[1e-3, 0.05, 0.5, 1.0, 1.99, 2.0, 2.01, 3.7, 10.0, 25.0, 80.0, 300.0] {
        let (k0, k1) = kernel::k0_k1(x);
        let (w0, w1) = (bessel_k_trapezoid(0.0, x), bessel_k_trapezoid(1.0, x));
        assert!((k0 - w0).abs() <= 4e-15 * w0, "K0({x}) = {k0} vs {w0}");
        assert!((k1 - w1).abs() <= 4e-15 * w1, "K1({x}) = {k1} vs {w1}");
    }
}

#[test]
fn bessel_k_tabulated_values() {
    let cases = [
        (1.0, 0.42102443824070833, 0.60190723019723457),
        (0.1, 2.4270690247020166, 9.853844780870606),
        (10.0, 1.778006231616917e-5, 1.864877345382558e-5),
    ];
    for (x, k0, k1) in cases {
        assert!((kernel::bessel_k0(x).unwrap() - k0).abs() < 1e-15 * k0.max(1.0) * 4.0);
        assert!((kernel::bessel_k1(x).unwrap() - k1).abs() < 1e-15 * k1.max(1.0) * 4.0);
    }
}

#[test]
fn bessel_wronskian() {
    for &x in &[0.01, 0.3, 1.0, 2.5, 7.0, 15.0] {
        let (k0, k1) = kernel::k0_k1(x);
        let (i0, i1) = bessel_i01(x);
        let w = i0 * k1 + i1 * k0;
        assert!((w * x - 1.0).abs() < 1e-14, "x = {x}: x·W = {}", w * x);
    }
}

#[test]
fn bessel_k_rejects_nonpositive_arguments() {
    for x in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(matches!(kernel::bessel_k0(x), Err(Error::Domain(_))));
        assert!(matches!(kernel::bessel_k1(x), Err(Error::Domain(_))));
    }
}

#[test]
fn adaptive_quadrature_on_smooth_and_peaked_integrands() {
    let tol = Tolerance::uniform(1e-13);
    let r = kernel::quad_interval(&|x: f64| x.sin(), 0.0, PI, &tol).unwrap();
    assert!((r.value - 2.0).abs() < 1e-13);
    // a sharp Lorentzian forces deep bisection near 0.3
    let eps = 1e-4;
    let f = |x: f64| eps / ((x - 0.3) * (x - 0.3) + eps * eps);
    let want = (0.7 / eps).atan() + (0.3 / eps).atan();
    let r = kernel::quad_interval(&f, 0.0, 1.0, &tol).unwrap();
    assert!((r.value - want).abs() < 1e-11 * want, "{} vs {want}", r.value);
    assert!(r.error_estimate < 1e-10 * want);
}

#[test]
fn requests_below_the_rounding_floor_still_converge() {
    // 1e-25 is far below what binary64 can deliver; the estimate settles at
    // the rounding floor and the result is accepted there
    let tol = Tolerance::uniform(1e-25);
    let r = kernel::quad_interval(&|x: f64| x.exp(), 0.0, 1.0, &tol).unwrap();
    assert!((r.value - (1f64.exp() - 1.0)).abs() < 1e-15);
}

#[test]
fn refinement_cap_reports_the_best_estimate() {
    let tol = Tolerance::new(1e-14, 1e-14, 3).unwrap();
    let f = |x: f64| if x < 0.123456 { 0.0 } else { 1.0 };
    match kernel::quad_interval(&f, 0.0, 1.0, &tol) {
        Err(Error::Quadrature { best, error_estimate, .. }) => {
            assert!((best[0].re - (1.0 - 0.123456)).abs() < 0.1);
            assert!(error_estimate > 1e-14);
        }
        other => panic!("expected a quadrature error, got {other:?}"),
    }
}

#[test]
fn inverse_square_root_endpoint() {
    let tol = Tolerance::uniform(1e-14);
    let r = kernel::quad_finite(|v: f64| (-v).exp() / v.sqrt(), EndpointSingularity::InverseSqrtAt0, 1.0, &tol).unwrap();
    // √π·erf(1)
    assert!((r.value - 1.4936482656248541).abs() < 1e-14, "{}", r.value);
    let r = kernel::quad_finite_between(|v: f64| 1.0 / (v - 2.0).sqrt(), EndpointSingularity::InverseSqrtAt0, 2.0, 6.0, &tol)
        .unwrap();
    assert!((r.value - 4.0).abs() < 1e-13);
    assert!(kernel::quad_finite_between(|v: f64| v, EndpointSingularity::None, 1.0, 0.0, &tol).is_err());
}

#[test]
fn exponential_tail_integrates_the_whole_half_line() {
    let tol = Tolerance::uniform(1e-13);
    let r = kernel::quad_exp_tail(|x: f64| Complex64::new((-x).exp() * x.cos(), 0.0), 1.0, 0.0, &tol).unwrap();
    assert!((r.value.re - 0.5).abs() < 1e-13);
    // most of the mass of x²⁰e^{−x} lies far beyond the first panel
    let mut fact = 1.0;
    for k in 1..=20 {
        fact *= k as f64;
    }
    let r = kernel::quad_exp_tail(|x: f64| x.powi(20) * (-x).exp() / fact, 0.5, 0.0, &tol).unwrap();
    assert!((r.value - 1.0).abs() < 1e-12, "{}", r.value);
    assert!(kernel::quad_exp_tail(|x: f64| x, 0.0, 0.0, &tol).is_err());
}

#[test]
fn compensated_summation() {
    let v = kernel::compensated_sum([1e16, 1.0, -1e16, 1.0]);
    assert_eq!(v, 2.0);
    let mut k = KahanSum::new();
    for _ in 0..10 {
        k.add(0.1);
    }
    assert_eq!(k.value(), 1.0);
    let z = kernel::compensated_sum([Complex64::new(1e16, -1e16), Complex64::new(1.0, 1.0), Complex64::new(-1e16, 1e16)]);
    assert_eq!(z, Complex64::new(1.0, 1.0));
}

#[test]
fn gauss_legendre_is_exact_to_degree_2n_minus_1() {
    for n in [2, 5, 16, 40] {
        let gl = GaussLegendre::new(n);
        let total: f64 = gl.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        for deg in 0..2 * n {
            let got = gl.integrate(|x: f64| x.powi(deg as i32), 0.0, 1.0);
            let want = 1.0 / (deg as f64 + 1.0);
            assert!((got - want).abs() < 1e-14, "n={n} degree {deg}: {got}");
        }
    }
}

#[test]
fn tolerance_validation() {
    assert!(Tolerance::new(0.0, 1e-10, 10).is_err());
    assert!(Tolerance::new(1e-10, f64::NAN, 10).is_err());
    assert!(Tolerance::new(1e-10, 1e-10, 0).is_err());
    let t = Tolerance::new(1e-10, 1e-8, 20).unwrap().scaled(0.5);
    assert_eq!((t.abs_tol, t.rel_tol, t.max_refinement), (5e-11, 5e-9, 20));
}

proptest! {
    #[test]
    fn k0_below_k1_and_both_decreasing(x in 1e-3f64..200.0, dx in 1e-3f64..1.0) {
        let (k0, k1) = kernel::k0_k1(x);
        let (k0b, k1b) = kernel::k0_k1(x + dx);
        prop_assert!(k0 < k1);
        prop_assert!(k0b < k0 && k1b < k1);
        // K₀' = −K₁
        let h = 1e-6 * x;
        let d = (kernel::k0_k1(x + h).0 - kernel::k0_k1(x - h).0) / (2.0 * h);
        prop_assert!((d + k1).abs() < 1e-6 * k1);
    }

    #[test]
    fn quadrature_of_cubics_is_exact(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0,
                                     lo in -2.0f64..0.0, hi in 0.0f64..2.0) {
        let f = |x: f64| ((a * x + b) * x + c) * x + d;
        let prim = |x: f64| (((a / 4.0 * x + b / 3.0) * x + c / 2.0) * x + d) * x;
        let r = kernel::quad_interval(&f, lo, hi, &Tolerance::uniform(1e-13)).unwrap();
        prop_assert!((r.value - (prim(hi) - prim(lo))).abs() < 1e-12);
    }
}
