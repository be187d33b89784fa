//! Γ₀(2) arithmetic, generator words in T = [[1,1],[0,1]], R = [[1,0],[2,1]]
//! and −I, the hard-coded multiplier systems of the three families, and the
//! Weil representation used as an independent oracle for them.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::theta::{Coset, Family, FamilySpec, QuadraticForm};
use crate::Error;

// ==========================================================================
// Matrices
// ==========================================================================

/// An element of SL₂(ℤ).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sl2z {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

fn overflow() -> Error {
    Error::Domain("matrix entries overflow i64".into())
}

impl Sl2z {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self, Error> {
        let det = (a as i128) * (d as i128) - (b as i128) * (c as i128);
        if det != 1 {
            return Err(Error::Domain(format!("[[{a}, {b}], [{c}, {d}]] has determinant {det}, not 1")));
        }
        Ok(Sl2z { a, b, c, d })
    }

    pub const IDENTITY: Sl2z = Sl2z { a: 1, b: 0, c: 0, d: 1 };
    pub const S: Sl2z = Sl2z { a: 0, b: -1, c: 1, d: 0 };

    pub fn mul(&self, o: &Sl2z) -> Result<Sl2z, Error> {
        let m = |x: i64, y: i64, z: i64, w: i64| -> Result<i64, Error> {
            x.checked_mul(y).and_then(|p| z.checked_mul(w).and_then(|q| p.checked_add(q))).ok_or_else(overflow)
        };
        Ok(Sl2z {
            a: m(self.a, o.a, self.b, o.c)?,
            b: m(self.a, o.b, self.b, o.d)?,
            c: m(self.c, o.a, self.d, o.c)?,
            d: m(self.c, o.b, self.d, o.d)?,
        })
    }

    pub fn inverse(&self) -> Sl2z {
        Sl2z { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn neg(&self) -> Sl2z {
        Sl2z { a: -self.a, b: -self.b, c: -self.c, d: -self.d }
    }

    /// Möbius action on the upper half-plane.
    pub fn act(&self, tau: Complex64) -> Complex64 {
        (tau * self.a as f64 + self.b as f64) / (tau * self.c as f64 + self.d as f64)
    }

    /// Möbius action on a rational; None at the pole x = −d/c.
    pub fn act_rational(&self, x: Rational64) -> Option<Rational64> {
        let den = x * self.c + self.d;
        if den == Rational64::from(0) {
            None
        } else {
            Some((x * self.a + self.b) / den)
        }
    }
}

impl fmt::Display for Sl2z {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// An element of Γ₀(2) = {M ∈ SL₂(ℤ) : c ≡ 0 mod 2}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gamma02Element {
    pub a: i64,
    pub b: i64,
    pub c: i64,
    pub d: i64,
}

impl Gamma02Element {
    pub fn new(a: i64, b: i64, c: i64, d: i64) -> Result<Self, Error> {
        Sl2z::new(a, b, c, d)?;
        if c % 2 != 0 {
            return Err(Error::Domain(format!("c = {c} is odd: [[{a}, {b}], [{c}, {d}]] is not in Γ₀(2)")));
        }
        Ok(Gamma02Element { a, b, c, d })
    }

    pub const IDENTITY: Gamma02Element = Gamma02Element { a: 1, b: 0, c: 0, d: 1 };
    pub const T: Gamma02Element = Gamma02Element { a: 1, b: 1, c: 0, d: 1 };
    pub const R: Gamma02Element = Gamma02Element { a: 1, b: 0, c: 2, d: 1 };
    pub const NEG_I: Gamma02Element = Gamma02Element { a: -1, b: 0, c: 0, d: -1 };

    pub fn sl2z(&self) -> Sl2z {
        Sl2z { a: self.a, b: self.b, c: self.c, d: self.d }
    }

    fn from_sl2z(m: Sl2z) -> Self {
        Gamma02Element { a: m.a, b: m.b, c: m.c, d: m.d }
    }

    pub fn mul(&self, o: &Gamma02Element) -> Result<Gamma02Element, Error> {
        Ok(Self::from_sl2z(self.sl2z().mul(&o.sl2z())?))
    }

    pub fn inverse(&self) -> Gamma02Element {
        Self::from_sl2z(self.sl2z().inverse())
    }

    pub fn pow_t(k: i64) -> Gamma02Element {
        Gamma02Element { a: 1, b: k, c: 0, d: 1 }
    }

    pub fn pow_r(k: i64) -> Result<Gamma02Element, Error> {
        let c = k.checked_mul(2).ok_or_else(overflow)?;
        Ok(Gamma02Element { a: 1, b: 0, c, d: 1 })
    }

    pub fn act(&self, tau: Complex64) -> Complex64 {
        self.sl2z().act(tau)
    }

    /// The cusp −d/c this element sends to i∞ (None when c = 0).
    pub fn pole(&self) -> Option<Rational64> {
        (self.c != 0).then(|| Rational64::new(-self.d, self.c))
    }
}

impl fmt::Display for Gamma02Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.sl2z().fmt(f)
    }
}

// ==========================================================================
// Generator words
// ==========================================================================

/// One letter of a word in the generators of Γ₀(2).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Generator {
    T(i64),
    R(i64),
    Neg,
}

impl Generator {
    pub fn matrix(&self) -> Result<Gamma02Element, Error> {
        match *self {
            Generator::T(k) => Ok(Gamma02Element::pow_t(k)),
            Generator::R(k) => Gamma02Element::pow_r(k),
            Generator::Neg => Ok(Gamma02Element::NEG_I),
        }
    }
}

/// A word whose ordered product is the represented element.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorWord(pub Vec<Generator>);

impl GeneratorWord {
    pub fn product(&self) -> Result<Gamma02Element, Error> {
        self.0.iter().try_fold(Gamma02Element::IDENTITY, |acc, g| acc.mul(&g.matrix()?))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for GeneratorWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("I");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|g| match g {
                Generator::T(k) => format!("T^{k}"),
                Generator::R(k) => format!("R^{k}"),
                Generator::Neg => "-I".to_string(),
            })
            .collect();
        f.write_str(&parts.join(" "))
    }
}

/// Nearest-integer quotient round(x / y) for y ≠ 0.
fn round_div(x: i64, y: i64) -> i64 {
    let (q, r) = x.div_mod_floor(&y);
    if 2 * r.abs() > y.abs() {
        q + 1
    } else {
        q
    }
}

/// Writes M as a word in T, R, −I by a Euclidean reduction of the first
/// column: T^k shifts a by kc, R^k shifts c by 2ka; |c| at least halves each
/// round, so the word has O(log max|entry|) letters.
pub fn decompose(m: &Gamma02Element) -> Result<GeneratorWord, Error> {
    Gamma02Element::new(m.a, m.b, m.c, m.d)?;
    let mut cur = *m;
    // letters applied on the left, in order
    let mut applied: Vec<Generator> = Vec::new();
    while cur.c != 0 {
        let k = round_div(cur.a, cur.c);
        if k != 0 {
            cur = Gamma02Element::pow_t(-k).mul(&cur)?;
            applied.push(Generator::T(-k));
        }
        if cur.c == 0 {
            break;
        }
        // here |a| ≤ |c|/2 and a is odd
        let k = round_div(cur.c, 2 * cur.a);
        if k != 0 {
            cur = Gamma02Element::pow_r(-k)?.mul(&cur)?;
            applied.push(Generator::R(-k));
        }
    }
    // cur = ±T^b, and M = applied⁻¹ (reversed) · cur
    let mut word: Vec<Generator> = applied
        .iter()
        .map(|g| match *g {
            Generator::T(k) => Generator::T(-k),
            Generator::R(k) => Generator::R(-k),
            Generator::Neg => Generator::Neg,
        })
        .collect();
    if cur.a == -1 {
        word.push(Generator::Neg);
        cur = Gamma02Element::NEG_I.mul(&cur)?;
    }
    if cur.b != 0 {
        word.push(Generator::T(cur.b));
    }
    let word = GeneratorWord(word);
    debug_assert_eq!(word.product().ok(), Some(*m));
    Ok(word)
}

// ==========================================================================
// Multiplier matrices
// ==========================================================================

/// ζ_n^k = e^{2πik/n} with the exponent reduced exactly before use.
pub fn zeta(n: i64, k: i64) -> Complex64 {
    let r = k.rem_euclid(n);
    Complex64::from_polar(1.0, 2.0 * PI * r as f64 / n as f64)
}

/// A 4×4 complex matrix acting on family components:
/// U_j(Mτ) = Σ_k Ψ_M(j, k)·U_k(τ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultiplierMatrix {
    pub family: Family,
    pub entries: [[Complex64; 4]; 4],
}

impl MultiplierMatrix {
    pub fn identity(family: Family) -> Self {
        let mut e = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (i, row) in e.iter_mut().enumerate() {
            row[i] = Complex64::new(1.0, 0.0);
        }
        MultiplierMatrix { family, entries: e }
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.entries[j][k]
    }

    pub fn mul(&self, o: &MultiplierMatrix) -> MultiplierMatrix {
        let mut e = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (i, row) in e.iter_mut().enumerate() {
            for (k, cell) in row.iter_mut().enumerate() {
                *cell = (0..4).map(|m| self.entries[i][m] * o.entries[m][k]).sum();
            }
        }
        MultiplierMatrix { family: self.family, entries: e }
    }

    pub fn apply(&self, v: &[Complex64; 4]) -> [Complex64; 4] {
        let mut out = [Complex64::new(0.0, 0.0); 4];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|k| self.entries[j][k] * v[k]).sum();
        }
        out
    }

    /// max |Ψ − Φ| entrywise.
    pub fn distance(&self, o: &MultiplierMatrix) -> f64 {
        let mut m = 0.0f64;
        for j in 0..4 {
            for k in 0..4 {
                m = m.max((self.entries[j][k] - o.entries[j][k]).norm());
            }
        }
        m
    }

    /// max |Ψ†·W·Ψ − W| for the diagonal metric W = diag(weights).
    pub fn unitarity_defect(&self, weights: &[f64; 4]) -> f64 {
        let mut m = 0.0f64;
        for j in 0..4 {
            for k in 0..4 {
                let s: Complex64 = (0..4).map(|i| self.entries[i][j].conj() * weights[i] * self.entries[i][k]).sum();
                let target = if j == k { weights[j] } else { 0.0 };
                m = m.max((s - target).norm());
            }
        }
        m
    }

    /// Entries as [[[re, im]; 4]; 4] for JSON output.
    pub fn to_pairs(&self) -> Vec<Vec<[f64; 2]>> {
        self.entries.iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect()
    }
}

/// Diagonal metric W with Ψ†WΨ = W for every family multiplier. The Weil
/// representation is unitary on the full coset space, and U_j stands for all
/// cosets in the orbits of μ_j and μ_j + λ, so W_j is that coset count.
pub fn invariant_metric(family: Family) -> [f64; 4] {
    let spec = family.spec();
    let mut w = [0.0; 4];
    for (j, wj) in w.iter_mut().enumerate() {
        let [a, b] = spec.component_cosets(j);
        let n = orbit(&a).len() as f64;
        let m = orbit(&b).len() as f64;
        *wj = n + m;
    }
    w
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Hard-coded generator matrices (Ψ_T, Ψ_R) of a family.
pub fn generator_matrices(family: Family) -> (MultiplierMatrix, MultiplierMatrix) {
    let z0 = c(0.0, 0.0);
    let diag = |d: [Complex64; 4]| {
        let mut e = [[z0; 4]; 4];
        for i in 0..4 {
            e[i][i] = d[i];
        }
        MultiplierMatrix { family, entries: e }
    };
    match family {
        Family::F => {
            let t = diag([zeta(32, 31), zeta(32, 7), zeta(32, 23), zeta(32, 15)]);
            let s = 1.0 / 2f64.sqrt();
            let c3 = (3.0 * PI / 16.0).cos();
            let c1 = (PI / 16.0).cos();
            let s1 = (PI / 16.0).sin();
            let s3 = (3.0 * PI / 16.0).sin();
            let a = zeta(32, 31) * c3;
            let b = zeta(32, 3) * c1;
            let cc = zeta(32, 11) * s1;
            let d = zeta(32, 23) * s3;
            let r = MultiplierMatrix {
                family,
                entries: [[a * s, b * s, cc * s, d * s], [b * s, d * s, a * s, cc * s], [cc * s, a * s, d * s, b * s], [
                    d * s,
                    cc * s,
                    b * s,
                    a * s,
                ]],
            };
            (t, r)
        }
        Family::G => {
            let t = diag([c(1.0, 0.0), zeta(6, 1), zeta(3, 2), c(-1.0, 0.0)]);
            let s = 1.0 / 3f64.sqrt();
            let (z1, z11, i3) = (zeta(12, 1) * s, zeta(12, 11) * s, zeta(4, 3) * s);
            let r = MultiplierMatrix {
                family,
                entries: [[z0, z1 * 2.0, z0, i3], [z1, z0, z11, z0], [z0, z11, z0, z1], [i3, z0, z1 * 2.0, z0]],
            };
            (t, r)
        }
        Family::H => {
            let t = diag([zeta(16, 15), zeta(48, 5), zeta(48, 29), zeta(16, 7)]);
            let s = ((2.0 - 2f64.sqrt()) / 12.0).sqrt();
            let p = 1.0 + 2f64.sqrt();
            let (a, b5, b13, b41, a11, b1) =
                (zeta(16, 15), zeta(48, 5), zeta(48, 13), zeta(48, 41), zeta(16, 11), zeta(48, 1));
            let e = [
                [a, b1 * (2.0 * p), b13 * 2.0, a11 * p],
                [b1 * p, b5, b41 * p, b13],
                [b13, b41 * p, b5, b1 * p],
                [a11 * p, b13 * 2.0, b1 * (2.0 * p), a],
            ];
            let r = MultiplierMatrix { family, entries: e.map(|row| row.map(|z| z * s)) };
            (t, r)
        }
    }
}

fn matrix_power(m: &MultiplierMatrix, k: i64) -> Result<MultiplierMatrix, Error> {
    let base = if k < 0 { inverse_in_metric(m) } else { *m };
    let mut acc = MultiplierMatrix::identity(m.family);
    let mut p = base;
    let mut e = k.unsigned_abs();
    while e > 0 {
        if e & 1 == 1 {
            acc = acc.mul(&p);
        }
        p = p.mul(&p);
        e >>= 1;
    }
    Ok(acc)
}

/// Ψ⁻¹ = W⁻¹Ψ†W for a matrix preserving the diagonal metric W.
fn inverse_in_metric(m: &MultiplierMatrix) -> MultiplierMatrix {
    let w = invariant_metric(m.family);
    let mut e = [[Complex64::new(0.0, 0.0); 4]; 4];
    for (j, row) in e.iter_mut().enumerate() {
        for (k, cell) in row.iter_mut().enumerate() {
            *cell = m.entries[k][j].conj() * (w[k] / w[j]);
        }
    }
    MultiplierMatrix { family: m.family, entries: e }
}

/// Ψ_M from the generator matrices along decompose(M); −I acts trivially.
pub fn multiplier(family: Family, m: &Gamma02Element) -> Result<MultiplierMatrix, Error> {
    let (t, r) = generator_matrices(family);
    let word = decompose(m)?;
    let mut acc = MultiplierMatrix::identity(family);
    for g in &word.0 {
        let f = match *g {
            Generator::T(k) => matrix_power(&t, k)?,
            Generator::R(k) => matrix_power(&r, k)?,
            Generator::Neg => continue,
        };
        acc = acc.mul(&f);
    }
    Ok(acc)
}

// ==========================================================================
// Weil representation
// ==========================================================================

/// ψ_M(μ, ν) of the Weil representation of Q:
/// c = 0: e^{2πi·ab·Q(μ)}·δ_{μ, sgn(d)ν};
/// c ≠ 0: (1/(|c|√|det A|))·Σ_{m ∈ ℤ²/cℤ²} e^{(2πi/c)(aQ(m+μ) − B(m+μ,ν) + dQ(ν))}.
/// Phases are reduced exactly as integers mod |c|·4α₁α₂.
pub fn weil_psi(form: &QuadraticForm, m: &Sl2z, mu: &Coset, nu: &Coset) -> Result<Complex64, Error> {
    let big_mu = mu.scaled(form)?;
    let big_nu = nu.scaled(form)?;
    let disc = form.discriminant();
    let (a1, a2) = (form.alpha1 as i128, form.alpha2 as i128);
    if m.c == 0 {
        let target = if m.d > 0 { *nu } else { nu.neg() };
        if *mu != target {
            return Ok(Complex64::new(0.0, 0.0));
        }
        // Q(μ) = key/disc
        let key = form.key(big_mu) as i128;
        let num = ((m.a as i128) * (m.b as i128) * key).rem_euclid(disc as i128);
        return Ok(Complex64::from_polar(1.0, 2.0 * PI * num as f64 / disc as f64));
    }
    let cabs = m.c.unsigned_abs() as i64;
    let sign = m.c.signum() as i128;
    let modulus = cabs as i128 * disc as i128;
    let key = |n: [i128; 2]| a2 * n[0] * n[0] - a1 * n[1] * n[1];
    let nu_i = [big_nu[0] as i128, big_nu[1] as i128];
    let d_term = (m.d as i128) * key(nu_i);
    let mut re = 0.0;
    let mut im = 0.0;
    for m1 in 0..cabs {
        for m2 in 0..cabs {
            let n = [big_mu[0] as i128 + 2 * a1 * m1 as i128, big_mu[1] as i128 + 2 * a2 * m2 as i128];
            // disc·B(n, ν) = 2(α₂N₁V₁ − α₁N₂V₂)
            let b = 2 * (a2 * n[0] * nu_i[0] - a1 * n[1] * nu_i[1]);
            let num = (sign * ((m.a as i128) * key(n) - b + d_term)).rem_euclid(modulus);
            let angle = 2.0 * PI * num as f64 / modulus as f64;
            re += angle.cos();
            im += angle.sin();
        }
    }
    let scale = 1.0 / (cabs as f64 * (disc as f64).sqrt());
    Ok(Complex64::new(re * scale, im * scale))
}

/// Distinct cosets in {±μ, ±(μ₁, −μ₂)}; Θ̂ is constant on this orbit.
pub fn orbit(mu: &Coset) -> Vec<Coset> {
    let mut v = vec![*mu, mu.neg(), mu.reflect(), mu.reflect().neg()];
    v.sort();
    v.dedup();
    v
}

/// Ψ_M derived from the Weil representation: for each component j sum
/// ψ_M(μ_j, ν) + ψ_M(μ_j + λ, ν) over the discriminant group, then fold every
/// ν onto the class of μ_k or μ_k + λ it belongs to. The two classes of a
/// component must receive equal coefficients, and no weight may fall on a
/// coset outside the components.
pub fn fold_multiplier(spec: &FamilySpec, m: &Gamma02Element) -> Result<MultiplierMatrix, Error> {
    let sl = m.sl2z();
    let group = spec.form.discriminant_group();
    let classes: Vec<[Vec<Coset>; 2]> = (0..4)
        .map(|k| {
            let [a, b] = spec.component_cosets(k);
            [orbit(&a), orbit(&b)]
        })
        .collect();
    let mut e = [[Complex64::new(0.0, 0.0); 4]; 4];
    for j in 0..4 {
        let [mj, mjl] = spec.component_cosets(j);
        let mut per_class = [[Complex64::new(0.0, 0.0); 2]; 4];
        for nu in &group {
            let coeff = weil_psi(&spec.form, &sl, &mj, nu)? + weil_psi(&spec.form, &sl, &mjl, nu)?;
            let hit = classes
                .iter()
                .enumerate()
                .find_map(|(k, cl)| cl.iter().position(|o| o.contains(nu)).map(|h| (k, h)));
            match hit {
                Some((k, h)) => per_class[k][h] += coeff,
                None if coeff.norm() < 1e-12 => {}
                None => {
                    return Err(Error::Internal(format!(
                        "Weil coefficient {coeff} on coset {nu} outside the {} components",
                        spec.family
                    )))
                }
            }
        }
        for k in 0..4 {
            let [x, y] = per_class[k];
            if (x - y).norm() > 1e-10 {
                return Err(Error::Internal(format!(
                    "component {k} of family {} receives unequal class coefficients {x} and {y}",
                    spec.family
                )));
            }
            e[j][k] = (x + y) * 0.5;
        }
    }
    Ok(MultiplierMatrix { family: spec.family, entries: e })
}

// ==========================================================================
// Cusps
// ==========================================================================

/// A rational x = p/q (q even) together with a fixed M_x ∈ Γ₀(2) with
/// x = −d/c.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CuspRational {
    pub x: Rational64,
    pub matrix: Gamma02Element,
}

impl fmt::Display for CuspRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.x)
    }
}

/// M_x = [[a, b], [q, −p]] with a the least nonnegative solution of
/// a·(−p) ≡ 1 (mod q) and b = (ad − 1)/c.
pub fn cusp_matrix(x: Rational64) -> Result<CuspRational, Error> {
    let (p, q) = (*x.numer(), *x.denom());
    if q % 2 != 0 {
        return Err(Error::NotInCuspSet(x.to_string()));
    }
    let d = -p;
    let g = d.extended_gcd(&q);
    if g.gcd != 1 {
        return Err(Error::Internal(format!("{p}/{q} not in lowest terms")));
    }
    let a = g.x.rem_euclid(q);
    let num = (a as i128) * (d as i128) - 1;
    let b = (num / q as i128) as i64;
    let matrix = Gamma02Element::new(a, b, q, d)?;
    Ok(CuspRational { x, matrix })
}

/// Parses "p/q" (or an integer) into a cusp.
pub fn parse_cusp(s: &str) -> Result<CuspRational, Error> {
    let r: Rational64 = s.trim().parse().map_err(|_| Error::Domain(format!("cannot parse rational {s:?}")))?;
    cusp_matrix(r)
}

/// γ_{j,x} = (1/|c_x|)·Σ_k Ψ_{M_x⁻¹}(j, k)·c_k.
pub fn gamma_constant(spec: &FamilySpec, j: usize, x: &CuspRational) -> Result<Complex64, Error> {
    if j > 3 {
        return Err(Error::Domain(format!("component index must be 0..=3, got {j}")));
    }
    let psi = multiplier(spec.family, &x.matrix.inverse())?;
    let s: Complex64 = (0..4).map(|k| psi.get(j, k) * spec.const_terms[k]).sum();
    Ok(s / x.matrix.c.abs() as f64)
}
