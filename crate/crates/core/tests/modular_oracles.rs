use std::f64::consts::PI;

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Rational64;
use qmf::modular::{self, Gamma02Element, Generator, MultiplierMatrix, Sl2z};
use qmf::theta::{Coset, Family, QuadraticForm};
use qmf::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random element of Γ₀(2) with |c| ≤ bound, built from its bottom row.
fn random_element(rng: &mut ChaCha8Rng, bound: i64) -> Gamma02Element {
    loop {
        let c = 2 * rng.gen_range(-bound / 2..=bound / 2);
        let d = rng.gen_range(-bound..=bound);
        if d == 0 || c.gcd(&d) != 1 {
            continue;
        }
        if c == 0 {
            if d.abs() != 1 {
                continue;
            }
            return Gamma02Element::new(d, rng.gen_range(-5..=5), 0, d).unwrap();
        }
        // a·d ≡ 1 (mod c)
        let g = d.extended_gcd(&c);
        let a = g.x.rem_euclid(c.abs());
        let b = ((a as i128 * d as i128 - 1) / c as i128) as i64;
        return Gamma02Element::new(a, b, c, d).unwrap();
    }
}

fn random_word(rng: &mut ChaCha8Rng, len: usize) -> Gamma02Element {
    let mut m = Gamma02Element::IDENTITY;
    for _ in 0..len {
        let k = rng.gen_range(-3..=3);
        let g = match rng.gen_range(0..3) {
            0 => Gamma02Element::pow_t(k),
            1 => Gamma02Element::pow_r(k).unwrap(),
            _ => Gamma02Element::NEG_I,
        };
        m = m.mul(&g).unwrap();
    }
    m
}

#[test]
fn decomposition_examples() {
    assert!(modular::decompose(&Gamma02Element::IDENTITY).unwrap().is_empty());
    assert_eq!(modular::decompose(&Gamma02Element::T).unwrap().0, vec![Generator::T(1)]);
    let m = Gamma02Element::new(1, -1, 12, -11).unwrap();
    assert_eq!(modular::decompose(&m).unwrap().product().unwrap(), m);
    assert!(Gamma02Element::new(1, 0, 1, 1).is_err());
    assert!(Gamma02Element::new(2, 0, 0, 1).is_err());
}

#[test]
fn decomposition_reassembles_random_elements_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let m = random_element(&mut rng, 1_000_000);
        let w = modular::decompose(&m).unwrap();
        assert_eq!(w.product().unwrap(), m, "{m} via {w}");
        // Euclidean reduction: logarithmic length
        assert!(w.len() <= 2 * 64 + 4);
    }
}

#[test]
fn hard_coded_generators_match_the_weil_fold() {
    for f in Family::ALL {
        let spec = f.spec();
        for m in [Gamma02Element::T, Gamma02Element::R, Gamma02Element::NEG_I] {
            let hard = modular::multiplier(f, &m).unwrap();
            let fold = modular::fold_multiplier(&spec, &m).unwrap();
            assert!(hard.distance(&fold) < 1e-12, "{f} {m}");
        }
    }
}

#[test]
fn printed_entries() {
    let r = modular::multiplier(Family::F, &Gamma02Element::R).unwrap();
    let want = modular::zeta(32, 31) * (3.0 * PI / 16.0).cos() / 2f64.sqrt();
    assert!((r.get(0, 0) - want).norm() < 1e-15);
    let t = modular::multiplier(Family::F, &Gamma02Element::T).unwrap();
    for (j, k) in [31, 7, 23, 15].iter().enumerate() {
        assert!((t.get(j, j) - modular::zeta(32, *k)).norm() < 1e-15);
    }
    let h = modular::multiplier(Family::H, &Gamma02Element::R).unwrap();
    let pre = ((2.0 - 2f64.sqrt()) / 12.0).sqrt();
    assert!((h.get(0, 0) - modular::zeta(16, 15) * pre).norm() < 1e-15);
    let g = modular::multiplier(Family::G, &Gamma02Element::R).unwrap();
    assert!((g.get(0, 1) - modular::zeta(12, 1) * (2.0 / 3f64.sqrt())).norm() < 1e-15);
    for f in Family::ALL {
        let id = modular::multiplier(f, &Gamma02Element::NEG_I).unwrap();
        assert!(id.distance(&MultiplierMatrix::identity(f)) == 0.0);
    }
}

#[test]
fn representation_property_on_random_words() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for f in Family::ALL {
        for _ in 0..200 {
            let l1 = rng.gen_range(0..=6);
            let l2 = rng.gen_range(0..=6);
            let m1 = random_word(&mut rng, l1);
            let m2 = random_word(&mut rng, l2);
            let lhs = modular::multiplier(f, &m1.mul(&m2).unwrap()).unwrap();
            let rhs = modular::multiplier(f, &m1).unwrap().mul(&modular::multiplier(f, &m2).unwrap());
            assert!(lhs.distance(&rhs) < 1e-12, "{f}: {m1} · {m2}");
        }
    }
}

#[test]
fn multiplier_agrees_with_fold_on_random_elements() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for f in Family::ALL {
        let spec = f.spec();
        for _ in 0..50 {
            let m = random_element(&mut rng, 40);
            let hard = modular::multiplier(f, &m).unwrap();
            let fold = modular::fold_multiplier(&spec, &m).unwrap();
            assert!(hard.distance(&fold) < 1e-11, "{f} {m}: {}", hard.distance(&fold));
        }
    }
}

#[test]
fn multipliers_preserve_the_component_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for f in Family::ALL {
        let w = modular::invariant_metric(f);
        for _ in 0..30 {
            let m = random_element(&mut rng, 60);
            let psi = modular::multiplier(f, &m).unwrap();
            assert!(psi.unitarity_defect(&w) < 1e-12, "{f} {m}");
        }
    }
    // with equal orbit sizes the metric is a multiple of the identity
    let (_, r) = modular::generator_matrices(Family::F);
    assert!(r.unitarity_defect(&[1.0; 4]) < 1e-12);
    // unequal orbit sizes: the plain inner product is not preserved
    for f in [Family::G, Family::H] {
        let (_, r) = modular::generator_matrices(f);
        assert!(r.unitarity_defect(&[1.0; 4]) > 0.1);
    }
}

fn group_psi(form: &QuadraticForm, m: &Sl2z) -> Vec<Vec<Complex64>> {
    let g = form.discriminant_group();
    g.iter().map(|mu| g.iter().map(|nu| modular::weil_psi(form, m, mu, nu).unwrap()).collect()).collect()
}

#[test]
fn weil_representation_oracles() {
    let form = QuadraticForm::new(6, 2).unwrap();
    let group = form.discriminant_group();
    let t = Sl2z::new(1, 1, 0, 1).unwrap();
    let d = form.discriminant() as f64;
    for mu in &group {
        for nu in &group {
            let v = modular::weil_psi(&form, &t, mu, nu).unwrap();
            let q = qmf::theta::q_value(&form, mu.mu);
            let want = if mu == nu { Complex64::from_polar(1.0, 2.0 * PI * q) } else { Complex64::new(0.0, 0.0) };
            assert!((v - want).norm() < 1e-13);
            let id = modular::weil_psi(&form, &Sl2z::IDENTITY, mu, nu).unwrap();
            assert_eq!(id.re, if mu == nu { 1.0 } else { 0.0 });
            // S: e^{−2πiB(μ,ν)}/√|det A|
            let s = modular::weil_psi(&form, &Sl2z::S, mu, nu).unwrap();
            let b = form.b(mu.as_f64(), nu.as_f64());
            assert!((s - Complex64::from_polar(1.0 / d.sqrt(), -2.0 * PI * b)).norm() < 1e-13);
        }
    }
    let r = Sl2z::new(1, 0, 2, 1).unwrap();
    let pr = group_psi(&form, &r);
    for row in &pr {
        let s: f64 = row.iter().map(|z| z.norm_sqr()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
    // ψ is a representation of SL₂(ℤ), also for negative c
    let m1 = Sl2z::new(2, 1, -7, -3).unwrap();
    let m2 = Sl2z::new(1, 2, 3, 7).unwrap();
    let (p1, p2, p12) = (group_psi(&form, &m1), group_psi(&form, &m2), group_psi(&form, &m1.mul(&m2).unwrap()));
    let n = group.len();
    for i in 0..n {
        for k in 0..n {
            let prod: Complex64 = (0..n).map(|l| p1[i][l] * p2[l][k]).sum();
            assert!((prod - p12[i][k]).norm() < 1e-12);
        }
    }
    let bad = Coset::from_ints(1, 5, 0, 1);
    assert!(modular::weil_psi(&form, &r, &bad, &group[0]).is_err());
}

#[test]
fn cusp_matrices() {
    let c = modular::cusp_matrix(Rational64::new(11, 12)).unwrap();
    assert_eq!(c.matrix, Gamma02Element::new(1, -1, 12, -11).unwrap());
    assert_eq!(c.matrix.pole(), Some(Rational64::new(11, 12)));
    assert_eq!(modular::cusp_matrix(Rational64::new(-1, 2)).unwrap().matrix, Gamma02Element::R);
    assert!(matches!(modular::cusp_matrix(Rational64::new(1, 3)), Err(Error::NotInCuspSet(_))));
    assert!(matches!(modular::cusp_matrix(Rational64::new(0, 2)), Err(Error::NotInCuspSet(_))));
    assert!(modular::parse_cusp("11/34").is_ok());
    for q in (2..60).step_by(2) {
        for p in -q..q {
            if p.gcd(&q) != 1 {
                continue;
            }
            let x = Rational64::new(p, q);
            let m = modular::cusp_matrix(x).unwrap().matrix;
            assert_eq!(m.pole(), Some(x));
            assert!(m.a >= 0 && m.a < q && m.c == q);
        }
    }
}

#[test]
fn gamma_constants() {
    let g = Family::G.spec();
    let x = modular::cusp_matrix(Rational64::new(11, 12)).unwrap();
    let v = modular::gamma_constant(&g, 0, &x).unwrap();
    assert!((v.re - 0.10974649141040139).abs() < 1e-15 && v.im.abs() < 1e-15);
    assert!((v.re - (1.0 / 3f64.sqrt()).atanh() / 6.0).abs() < 1e-15);
    let f = Family::F.spec();
    for j in 0..4 {
        assert_eq!(modular::gamma_constant(&f, j, &x).unwrap(), Complex64::new(0.0, 0.0));
    }
    // independent of the representative T^r·M_x
    for xr in ["11/12", "11/34", "-1/2", "3/8"] {
        let cusp = modular::parse_cusp(xr).unwrap();
        for j in 0..4 {
            let base = modular::gamma_constant(&g, j, &cusp).unwrap();
            for r in -3..=3 {
                let m = Gamma02Element::pow_t(r).mul(&cusp.matrix).unwrap();
                let alt = qmf::modular::CuspRational { x: cusp.x, matrix: m };
                assert!((modular::gamma_constant(&g, j, &alt).unwrap() - base).norm() < 1e-14);
            }
        }
    }
}
