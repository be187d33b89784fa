//! The exact expansions are checked against a brute-force oracle that builds
//! every (n, k) term from scratch with naive truncated-polynomial arithmetic.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use qmf::kernel::Tolerance;
use qmf::qseries::{l_eval, l_series, pochhammer, FormalSeries, PochhammerLength, SeriesId, SeriesRecord};

type Poly = Vec<i128>;

fn one(order: usize) -> Poly {
    let mut p = vec![0; order];
    p[0] = 1;
    p
}

fn mul(a: &Poly, b: &Poly) -> Poly {
    let n = a.len();
    let mut out = vec![0; n];
    for i in 0..n {
        for j in 0..n - i {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

/// Power-series inverse of a series with constant term 1.
fn inv(a: &Poly) -> Poly {
    assert_eq!(a[0], 1);
    let n = a.len();
    let mut out = vec![0; n];
    out[0] = 1;
    for m in 1..n {
        let s: i128 = (1..=m).map(|i| a[i] * out[m - i]).sum();
        out[m] = -s;
    }
    out
}

/// Π_{j<n} (1 + c·q^{first + step·j})
fn prod(order: usize, n: usize, first: usize, step: usize, c: i128) -> Poly {
    let mut acc = one(order);
    for j in 0..n {
        let mut f = vec![0; order];
        f[0] = 1;
        let e = first + step * j;
        if e < order {
            f[e] += c;
        }
        acc = mul(&acc, &f);
    }
    acc
}

fn qpoch(order: usize, n: usize) -> Poly {
    prod(order, n, 1, 1, -1)
}

fn q2poch(order: usize, n: usize) -> Poly {
    prod(order, n, 2, 2, -1)
}

fn minus_one_poch(order: usize, n: usize) -> Poly {
    prod(order, n, 0, 1, 1)
}

fn one_minus(order: usize, m: usize) -> Poly {
    let mut p = one(order);
    if m < order {
        p[m] -= 1;
    }
    p
}

fn shift(p: &Poly, e: usize) -> Poly {
    let mut out = vec![0; p.len()];
    for i in e..p.len() {
        out[i] = p[i - e];
    }
    out
}

/// One term (without sign and q-power) as numerator/denominator pair.
fn term(id: u8, n: usize, k: usize, order: usize) -> (Poly, usize) {
    let tri = |m: usize| m * (m + 1) / 2;
    let (num, den, e): (Poly, Poly, usize) = match id {
        1 | 3 => {
            let num = qpoch(order, n - 1);
            let den = mul(&mul(&one_minus(order, 2 * k - 1), &qpoch(order, n - k)), &qpoch(order, k - 1));
            let e = if id == 1 { tri(n) + tri(k) } else { 1 + tri(n) + tri(k - 1) };
            (num, den, e)
        }
        2 => {
            let num = qpoch(order, n);
            let den = mul(&mul(&one_minus(order, 2 * k + 1), &qpoch(order, n - k)), &qpoch(order, k));
            (num, den, tri(n) + tri(k))
        }
        4 => {
            let num = qpoch(order, n);
            let den = mul(&mul(&one_minus(order, 2 * k + 1), &qpoch(order, n - k)), &qpoch(order, k));
            (num, den, tri(n) + if k == 0 { 0 } else { tri(k - 1) })
        }
        5 | 6 => {
            let num = mul(&minus_one_poch(order, n), &qpoch(order, n - 1));
            let den = mul(&mul(&one_minus(order, 2 * k - 1), &qpoch(order, n - k)), &q2poch(order, k - 1));
            (num, den, if id == 5 { 1 + n + k * k - k } else { n + k * k })
        }
        7 | 8 => {
            let num = q2poch(order, n);
            let den = mul(&mul(&one_minus(order, 2 * k + 1), &qpoch(order, n - k)), &q2poch(order, k));
            (num, den, if id == 7 { k * k + k } else { k * k })
        }
        9 | 10 => {
            let num = mul(&minus_one_poch(order, n), &qpoch(order, n - 1));
            let den = mul(&mul(&one_minus(order, 2 * k - 1), &qpoch(order, n - k)), &qpoch(order, k - 1));
            (num, den, if id == 9 { n + tri(k) } else { 1 + n + tri(k - 1) })
        }
        11 | 12 => {
            let num = q2poch(order, n);
            let den = mul(&mul(&one_minus(order, 2 * k + 1), &qpoch(order, n - k)), &qpoch(order, k));
            (num, den, if id == 11 { tri(k) } else { if k == 0 { 0 } else { tri(k - 1) } })
        }
        _ => unreachable!(),
    };
    (mul(&num, &inv(&den)), e)
}

fn k_start(id: u8) -> usize {
    match id {
        2 | 4 | 7 | 8 | 11 | 12 => 0,
        _ => 1,
    }
}

fn partial_sum(id: u8, order: usize, n_max: usize) -> Poly {
    let mut acc = vec![0i128; order];
    for n in k_start(id)..=n_max {
        for k in k_start(id)..=n {
            let (t, e) = term(id, n, k, order);
            if e >= order {
                continue;
            }
            let sign = if (n + k) % 2 == 0 { 1 } else { -1 };
            let t = shift(&t, e);
            for i in 0..order {
                acc[i] += sign * t[i];
            }
        }
    }
    acc
}

fn brute_force(id: u8, order: usize) -> Poly {
    let star = matches!(id, 7 | 8 | 11 | 12);
    let constant = match id {
        4 | 8 => -1,
        12 => -2,
        _ => 0,
    };
    let mut out = if star {
        // 2 · (S_N + S_{N+1})/2 with N far beyond the periodic regime
        let n_big = 3 * order + 10;
        let a = partial_sum(id, order, n_big);
        let b = partial_sum(id, order, n_big + 1);
        a.iter().zip(&b).map(|(x, y)| x + y).collect()
    } else {
        // e(n, k) ≥ n for every plain series, so n < order suffices
        partial_sum(id, order, order)
    };
    out[0] += constant;
    out
}

fn as_integers(s: &FormalSeries) -> Vec<i128> {
    s.coeffs()
        .iter()
        .map(|c| {
            assert!(c.is_integer(), "non-integral coefficient {c}");
            c.to_integer().to_i128().unwrap()
        })
        .collect()
}

#[test]
fn every_series_matches_brute_force_to_order_24() {
    for id in SeriesId::all() {
        let exact = l_series(id, 24).unwrap();
        assert_eq!(as_integers(&exact), brute_force(id.index(), 24), "{id}");
    }
}

#[test]
fn l1_begins_with_q2_plus_q3() {
    let s = as_integers(&l_series(SeriesId::new(1).unwrap(), 5).unwrap());
    assert_eq!(&s[..4], &[0, 0, 1, 1]);
}

#[test]
fn l4_constant_term_vanishes() {
    let s = l_series(SeriesId::new(4).unwrap(), 1).unwrap();
    assert!(s.coeff(0).unwrap().is_zero());
}

#[test]
fn l5_shifted_lowest_term_is_2q() {
    // q^{-1}L5 starts at 2q: the four lattice points (±1/2, ±1/2) of weight one half each
    let s = as_integers(&l_series(SeriesId::new(5).unwrap(), 4).unwrap());
    assert_eq!(s, vec![0, 0, 2, 0]);
    assert_eq!(l_series(SeriesId::new(5).unwrap(), 2).unwrap().coeffs().iter().filter(|c| !c.is_zero()).count(), 0);
}

#[test]
fn coefficients_beyond_order_are_not_reported() {
    let s = l_series(SeriesId::new(3).unwrap(), 7).unwrap();
    assert_eq!(s.order(), 7);
    assert!(s.coeff(7).is_none());
}

#[test]
fn truncation_is_consistent_across_orders() {
    for id in SeriesId::all() {
        let big = l_series(id, 40).unwrap();
        let small = l_series(id, 17).unwrap();
        assert_eq!(big.truncated(17), small, "{id}");
    }
}

#[test]
fn star_average_is_independent_of_stabilisation_point() {
    for id in [7u8, 8, 11, 12] {
        let order = 20;
        let n = 3 * order + 10;
        let s: Vec<Poly> = (0..4).map(|d| partial_sum(id, order, n + d)).collect();
        let a0: Poly = s[0].iter().zip(&s[1]).map(|(x, y)| x + y).collect();
        let a2: Poly = s[2].iter().zip(&s[3]).map(|(x, y)| x + y).collect();
        assert_eq!(a0, a2, "L{id}");
    }
}

#[test]
fn invalid_ids_are_rejected() {
    assert!(SeriesId::new(0).is_err());
    assert!(SeriesId::new(13).is_err());
}

#[test]
fn pochhammer_examples() {
    let q = FormalSeries::monomial(1, 8);
    let empty = pochhammer(&q, PochhammerLength::Finite(0), 8).unwrap();
    assert_eq!(empty, FormalSeries::one(8));

    let minus_one = FormalSeries::constant(BigRational::from_integer((-1).into()), 4);
    let p = pochhammer(&minus_one, PochhammerLength::Finite(2), 4).unwrap();
    assert_eq!(as_integers(&p), vec![2, 2, 0, 0]);

    let q4 = FormalSeries::monomial(1, 5);
    let p = pochhammer(&q4, PochhammerLength::Finite(3), 5).unwrap();
    // (1−q)(1−q²)(1−q³) = 1 − q − q² + q⁴ + q⁵ − q⁶
    assert_eq!(as_integers(&p), vec![1, -1, -1, 0, 1]);

    // Euler's pentagonal-number identity for (q;q)_∞
    let qq = FormalSeries::monomial(1, 30);
    let e = pochhammer(&qq, PochhammerLength::Infinite, 30).unwrap();
    let mut expected = vec![0i128; 30];
    for m in -5i64..=5 {
        let g = (m * (3 * m - 1) / 2) as usize;
        if g < 30 {
            expected[g] += if m % 2 == 0 { 1 } else { -1 };
        }
    }
    assert_eq!(as_integers(&e), expected);
}

#[test]
fn series_json_round_trip() {
    let s = l_series(SeriesId::new(7).unwrap(), 12).unwrap();
    let record = s.to_record(Some(7));
    let text = serde_json::to_string(&record).unwrap();
    let back: SeriesRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(FormalSeries::from_record(&back).unwrap(), s);
}

#[test]
fn numeric_value_at_zero_is_constant_term() {
    let tol = Tolerance::default();
    for id in SeriesId::all() {
        let c = l_series(id, 1).unwrap().coeff(0).unwrap().to_f64().unwrap();
        let v = l_eval(id, Complex64::new(0.0, 0.0), &tol).unwrap();
        assert_eq!(v, Complex64::new(c, 0.0));
    }
}

#[test]
fn numeric_value_matches_expansion_for_small_q() {
    let tol = Tolerance::default();
    for id in SeriesId::all() {
        let s = l_series(id, 80).unwrap();
        for (r, x) in [(0.1, 0.0), (0.3, 0.17), (0.5, 0.61)] {
            let q = Complex64::from_polar(r, 2.0 * std::f64::consts::PI * x);
            let direct = l_eval(id, q, &tol).unwrap();
            let formal = s.eval_q(q).unwrap();
            // tail of the expansion: |coeff| · r^80 is far below 1e-9 here
            assert!((direct - formal).norm() < 1e-9 * formal.norm().max(1.0), "{id} r={r}: {direct} vs {formal}");
        }
    }
}

#[test]
fn numeric_l7_agrees_with_order_60_expansion_at_one_tenth() {
    let tol = Tolerance::default();
    let id = SeriesId::new(7).unwrap();
    let v = l_eval(id, Complex64::new(0.1, 0.0), &tol).unwrap();
    let s = l_series(id, 60).unwrap().eval_q(Complex64::new(0.1, 0.0)).unwrap();
    assert!((v - s).norm() < 1e-12);
}

#[test]
fn numeric_rejects_unit_circle() {
    let tol = Tolerance::default();
    assert!(l_eval(SeriesId::new(1).unwrap(), Complex64::new(1.0, 0.0), &tol).is_err());
}

#[test]
fn shifted_l5_reproduces_reference_value_near_eleven_twelfths() {
    // vertical approach value of the G family, first component, at 11/12 + i/100
    let tau = Complex64::new(11.0 / 12.0, 0.01);
    let q = (Complex64::new(0.0, 2.0 * std::f64::consts::PI) * tau).exp();
    let l5 = l_eval(SeriesId::new(5).unwrap(), q, &Tolerance::default()).unwrap();
    let g0 = (Complex64::new(0.0, -2.0 * std::f64::consts::PI) * tau).exp() * l5
        - 2.0 / std::f64::consts::PI * qmf::qseries::artanh_inv_sqrt3();
    assert!((g0 - Complex64::new(2.20152385, -1.72453350)).norm() < 1e-6, "{g0}");
}

#[test]
fn rational_parsing() {
    use qmf::qseries::parse_rational;
    assert_eq!(parse_rational("-17/32").unwrap(), BigRational::new(BigInt::from(-17), BigInt::from(32)));
    assert_eq!(parse_rational("3").unwrap(), BigRational::from_integer(3.into()));
    assert!(parse_rational("1/0").is_err());
    assert!(parse_rational("x").is_err());
}
