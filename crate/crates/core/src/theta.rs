//! Lattices, cones and the theta-type functions of a diagonal indefinite
//! binary form Q(n) = α₁n₁² − α₂n₂², plus the three concrete families.
//!
//! ## Lattice representation
//!
//! Every coset μ of the discriminant group A⁻¹ℤ²/ℤ² (A = diag(2α₁, −2α₂)) has
//! coordinates in (1/2α₁)ℤ × (1/2α₂)ℤ, so lattice points n ∈ ℤ² + μ are stored
//! as *scaled integers* N with n = (N₁/2α₁, N₂/2α₂). Then
//!
//! ```text
//! 4α₁α₂·Q(n) = α₂N₁² − α₁N₂²   (an exact integer "exponent key")
//! ```
//!
//! ## Truncation
//!
//! With x = Pn (P = diag(√α₁, √α₂)) the positive-definite majorant is
//! maj(n) = α₁n₁² + α₂n₂² = |x|². On the support of either cone weight,
//! |Q(n)| ≥ maj(n)/cosh(2t_max), and every term of the completed and shadow
//! sums is bounded by e^{−2πτ₂e^{−2t_max}·maj(n)} (times an O(1) factor), so
//! all sums are truncated on an ellipse maj(n) ≤ R.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use num_rational::{BigRational, Rational64};
use num_traits::{Signed, Zero};

use crate::kernel::{self, quad_interval, GaussLegendre, KahanSum, Tolerance};
use crate::qseries::{self, FormalSeries, SeriesId};
use crate::Error;

/// Smallest τ₂ accepted by the direct lattice evaluators.
pub const TAU2_MIN: f64 = 1e-3;

/// Extra log-margin added to ln(1/ε) when choosing truncation radii.
pub const TRUNCATION_MARGIN: f64 = 40.0;

// ==========================================================================
// Quadratic form and cones
// ==========================================================================

/// Q(n) = α₁n₁² − α₂n₂², Gram matrix A = diag(2α₁, −2α₂).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadraticForm {
    pub alpha1: i64,
    pub alpha2: i64,
}

impl QuadraticForm {
    /// Requires α₁, α₂ > 0 and α₁/α₂ not the square of a rational (so Q is
    /// anisotropic over ℚ).
    pub fn new(alpha1: i64, alpha2: i64) -> Result<Self, Error> {
        if alpha1 <= 0 || alpha2 <= 0 {
            return Err(Error::Domain(format!("alpha1, alpha2 must be positive, got ({alpha1}, {alpha2})")));
        }
        let p = alpha1 * alpha2;
        let r = (p as f64).sqrt().round() as i64;
        if r * r == p {
            return Err(Error::Domain(format!("{alpha1}/{alpha2} is a rational square: the form is isotropic")));
        }
        Ok(QuadraticForm { alpha1, alpha2 })
    }

    pub fn gram(&self) -> [[i64; 2]; 2] {
        [[2 * self.alpha1, 0], [0, -2 * self.alpha2]]
    }

    /// |det A| = 4α₁α₂ = size of the discriminant group.
    pub fn discriminant(&self) -> i64 {
        4 * self.alpha1 * self.alpha2
    }

    pub fn q(&self, n: [f64; 2]) -> f64 {
        self.alpha1 as f64 * n[0] * n[0] - self.alpha2 as f64 * n[1] * n[1]
    }

    pub fn b(&self, n: [f64; 2], m: [f64; 2]) -> f64 {
        2.0 * (self.alpha1 as f64 * n[0] * m[0] - self.alpha2 as f64 * n[1] * m[1])
    }

    pub fn q_rational(&self, n: [Rational64; 2]) -> Rational64 {
        Rational64::from(self.alpha1) * n[0] * n[0] - Rational64::from(self.alpha2) * n[1] * n[1]
    }

    pub fn b_rational(&self, n: [Rational64; 2], m: [Rational64; 2]) -> Rational64 {
        Rational64::from(2 * self.alpha1) * n[0] * m[0] - Rational64::from(2 * self.alpha2) * n[1] * m[1]
    }

    /// maj(n) = α₁n₁² + α₂n₂².
    pub fn majorant(&self, n: [f64; 2]) -> f64 {
        self.alpha1 as f64 * n[0] * n[0] + self.alpha2 as f64 * n[1] * n[1]
    }

    /// Exponent key 4α₁α₂·Q(n) of a scaled point.
    pub fn key(&self, big_n: [i64; 2]) -> i64 {
        self.alpha2 * big_n[0] * big_n[0] - self.alpha1 * big_n[1] * big_n[1]
    }

    pub fn unscale(&self, big_n: [i64; 2]) -> [f64; 2] {
        [big_n[0] as f64 / (2 * self.alpha1) as f64, big_n[1] as f64 / (2 * self.alpha2) as f64]
    }

    pub fn unscale_rational(&self, big_n: [i64; 2]) -> [Rational64; 2] {
        [Rational64::new(big_n[0], 2 * self.alpha1), Rational64::new(big_n[1], 2 * self.alpha2)]
    }

    /// All elements of A⁻¹ℤ²/ℤ² as cosets.
    pub fn discriminant_group(&self) -> Vec<Coset> {
        let (m1, m2) = (2 * self.alpha1, 2 * self.alpha2);
        let mut out = Vec::with_capacity((m1 * m2) as usize);
        for a in 0..m1 {
            for b in 0..m2 {
                out.push(Coset::new(Rational64::new(a, m1), Rational64::new(b, m2)));
            }
        }
        out
    }
}

/// sgn with sgn(0) = 0.
fn sgn_i(x: i64) -> i64 {
    x.signum()
}

/// A pair c₁, c₂ in the negative cone C_Q together with their orthogonal
/// partners in C_Q^⊥, parametrised by c(t) = P⁻¹(sinh t, cosh t) and
/// c^⊥(t) = P⁻¹(cosh t, sinh t).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConePair {
    pub t1: f64,
    pub t2: f64,
    pub c1: [f64; 2],
    pub c2: [f64; 2],
    pub c1_perp: [f64; 2],
    pub c2_perp: [f64; 2],
    /// Integer linear forms (p, r) with sgn B(n, v) = sgn(p·n₁ + r·n₂) for
    /// v = c₁, c₂, c₁^⊥, c₂^⊥ (in that order); makes cone weights exact.
    pub sign_forms: [[i64; 2]; 4],
}

impl ConePair {
    /// Builds the pair from the parameters and checks Q(c_i) = −1,
    /// Q(c_i^⊥) = +1, c_i₂ > 0 and that the integer sign forms agree with
    /// the real bilinear form.
    pub fn new(form: &QuadraticForm, t1: f64, t2: f64, sign_forms: [[i64; 2]; 4]) -> Result<Self, Error> {
        if !(t1 < t2) {
            return Err(Error::Domain(format!("cone parameters must satisfy t1 < t2, got {t1}, {t2}")));
        }
        let c = |t: f64| cone_vector(form, t);
        let cp = |t: f64| cone_perp_vector(form, t);
        let pair = ConePair { t1, t2, c1: c(t1), c2: c(t2), c1_perp: cp(t1), c2_perp: cp(t2), sign_forms };
        for v in [pair.c1, pair.c2] {
            if (form.q(v) + 1.0).abs() > 1e-14 || v[1] <= 0.0 {
                return Err(Error::Internal(format!("cone vector {v:?} is not in C_Q")));
            }
        }
        for v in [pair.c1_perp, pair.c2_perp] {
            if (form.q(v) - 1.0).abs() > 1e-14 || v[0] <= 0.0 {
                return Err(Error::Internal(format!("vector {v:?} is not in C_Q^perp")));
            }
        }
        // The sign forms must be positive multiples of n ↦ B(n, v).
        for (v, f) in [pair.c1, pair.c2, pair.c1_perp, pair.c2_perp].iter().zip(sign_forms) {
            let b = [2.0 * form.alpha1 as f64 * v[0], -2.0 * form.alpha2 as f64 * v[1]];
            let (p, r) = (f[0] as f64, f[1] as f64);
            let cross = b[0] * r - b[1] * p;
            let dot = b[0] * p + b[1] * r;
            if cross.abs() > 1e-12 * dot.abs() || dot <= 0.0 {
                return Err(Error::Internal(format!("sign form {f:?} does not match B(·, {v:?})")));
            }
        }
        Ok(pair)
    }

    pub fn t_max(&self) -> f64 {
        self.t1.abs().max(self.t2.abs())
    }

    /// cosh(2·t_max): the majorant ratio bound maj(n) ≤ κ⁻¹|Q(n)| on the
    /// weight support.
    pub fn majorant_ratio(&self) -> f64 {
        (2.0 * self.t_max()).cosh()
    }

    fn exact_sign(&self, which: usize, form: &QuadraticForm, big_n: [i64; 2]) -> i64 {
        let [p, r] = self.sign_forms[which];
        // p·n₁ + r·n₂ scaled by 2α₁α₂ > 0
        sgn_i(p * form.alpha2 * big_n[0] + r * form.alpha1 * big_n[1])
    }

    /// 1 − sgn B(n,c₁)·sgn B(n,c₂) for a scaled lattice point (exact).
    pub fn weight_plus(&self, form: &QuadraticForm, big_n: [i64; 2]) -> i64 {
        1 - self.exact_sign(0, form, big_n) * self.exact_sign(1, form, big_n)
    }

    /// 1 − sgn B(n,c₁^⊥)·sgn B(n,c₂^⊥) for a scaled lattice point (exact).
    pub fn weight_perp(&self, form: &QuadraticForm, big_n: [i64; 2]) -> i64 {
        1 - self.exact_sign(2, form, big_n) * self.exact_sign(3, form, big_n)
    }
}

/// c(t) = P⁻¹(sinh t, cosh t).
pub fn cone_vector(form: &QuadraticForm, t: f64) -> [f64; 2] {
    [t.sinh() / (form.alpha1 as f64).sqrt(), t.cosh() / (form.alpha2 as f64).sqrt()]
}

/// c^⊥(t) = P⁻¹(cosh t, sinh t).
pub fn cone_perp_vector(form: &QuadraticForm, t: f64) -> [f64; 2] {
    [t.cosh() / (form.alpha1 as f64).sqrt(), t.sinh() / (form.alpha2 as f64).sqrt()]
}

/// sgn of a real bilinear value, with values below `1e-11·scale` treated as 0.
fn snapped_sign(x: f64, scale: f64) -> i64 {
    if x.abs() <= 1e-11 * scale.max(1.0) {
        0
    } else if x > 0.0 {
        1
    } else {
        -1
    }
}

/// 1 − sgn(B(n,c₁))·sgn(B(n,c₂)) for a real vector n (sgn(0) = 0; values of
/// B within rounding of zero count as zero).
pub fn weight_indefinite(form: &QuadraticForm, n: [f64; 2], cones: &ConePair) -> i64 {
    let scale = n[0].abs() + n[1].abs();
    let s1 = snapped_sign(form.b(n, cones.c1), scale * form.alpha1 as f64);
    let s2 = snapped_sign(form.b(n, cones.c2), scale * form.alpha1 as f64);
    1 - s1 * s2
}

// ==========================================================================
// Cosets and lattice enumeration
// ==========================================================================

/// A rational 2-vector modulo ℤ², stored reduced into [0, 1)².
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coset {
    pub mu: [Rational64; 2],
}

fn frac(r: Rational64) -> Rational64 {
    r - r.floor()
}

impl Coset {
    pub fn new(mu1: Rational64, mu2: Rational64) -> Self {
        Coset { mu: [frac(mu1), frac(mu2)] }
    }

    pub fn from_ints(p1: i64, q1: i64, p2: i64, q2: i64) -> Self {
        Coset::new(Rational64::new(p1, q1), Rational64::new(p2, q2))
    }

    pub fn zero() -> Self {
        Coset::new(Rational64::zero(), Rational64::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.mu[0].is_zero() && self.mu[1].is_zero()
    }

    pub fn add(&self, other: &Coset) -> Coset {
        Coset::new(self.mu[0] + other.mu[0], self.mu[1] + other.mu[1])
    }

    pub fn neg(&self) -> Coset {
        Coset::new(-self.mu[0], -self.mu[1])
    }

    /// (μ₁, −μ₂)
    pub fn reflect(&self) -> Coset {
        Coset::new(self.mu[0], -self.mu[1])
    }

    /// Residues N mod (2α₁, 2α₂) of the scaled representation; requires Aμ ∈ ℤ².
    pub fn scaled(&self, form: &QuadraticForm) -> Result<[i64; 2], Error> {
        let a = self.mu[0] * Rational64::from(2 * form.alpha1);
        let b = self.mu[1] * Rational64::from(2 * form.alpha2);
        if !a.is_integer() || !b.is_integer() {
            return Err(Error::Domain(format!("coset {self} is not in the discriminant group of {form:?}")));
        }
        Ok([a.to_integer(), b.to_integer()])
    }

    pub fn as_f64(&self) -> [f64; 2] {
        [r64(self.mu[0]), r64(self.mu[1])]
    }
}

impl fmt::Display for Coset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.mu[0], self.mu[1])
    }
}

pub(crate) fn r64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

const MAX_POINTS: f64 = 1e8;

/// Scaled points N ≡ residue (mod 2α) with maj(n) ≤ radius.
fn enumerate_scaled(form: &QuadraticForm, residue: [i64; 2], radius: f64) -> Result<Vec<[i64; 2]>, Error> {
    let estimate = PI * radius / ((form.alpha1 * form.alpha2) as f64).sqrt();
    if estimate > MAX_POINTS {
        return Err(Error::Resource(format!("lattice enumeration would visit about {estimate:.3e} points")));
    }
    let (m1, m2) = (2 * form.alpha1, 2 * form.alpha2);
    // maj = N₁²/(4α₁) + N₂²/(4α₂)
    let n1_max = (4.0 * form.alpha1 as f64 * radius).sqrt().floor() as i64 + 1;
    let mut out = Vec::with_capacity(estimate as usize + 16);
    let start1 = first_in_class(-n1_max, residue[0], m1);
    let mut n1 = start1;
    while n1 <= n1_max {
        let rest = radius - (n1 * n1) as f64 / (4 * form.alpha1) as f64;
        if rest >= 0.0 {
            let n2_max = (4.0 * form.alpha2 as f64 * rest).sqrt().floor() as i64 + 1;
            let mut n2 = first_in_class(-n2_max, residue[1], m2);
            while n2 <= n2_max {
                let maj = (n1 * n1) as f64 / (4 * form.alpha1) as f64 + (n2 * n2) as f64 / (4 * form.alpha2) as f64;
                if maj <= radius {
                    out.push([n1, n2]);
                }
                n2 += m2;
            }
        }
        n1 += m1;
    }
    Ok(out)
}

fn first_in_class(lo: i64, residue: i64, modulus: i64) -> i64 {
    lo + (residue - lo).rem_euclid(modulus)
}

/// All n ∈ ℤ² + μ with |Q(n)| ≤ q_bound and maj(n) ≤ q_bound·cosh(2t_max):
/// complete for every point of nonzero cone weight with |Q| ≤ q_bound.
pub fn enumerate_lattice(
    form: &QuadraticForm,
    cones: &ConePair,
    mu: &Coset,
    q_bound: f64,
) -> Result<Vec<[Rational64; 2]>, Error> {
    if !(q_bound >= 1.0) {
        return Err(Error::Domain(format!("q_bound must be ≥ 1, got {q_bound}")));
    }
    let radius = q_bound * cones.majorant_ratio();
    let pts = enumerate_scaled(form, mu.scaled(form)?, radius)?;
    let d = form.discriminant() as f64;
    Ok(pts
        .into_iter()
        .filter(|n| (form.key(*n) as f64).abs() <= q_bound * d)
        .map(|n| form.unscale_rational(n))
        .collect())
}

// ==========================================================================
// Families
// ==========================================================================

/// The three families of the construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    /// Q = 8n₁² − 4n₂²; series L₁…L₄.
    F,
    /// Q = 6n₁² − 2n₂²; series L₅…L₈.
    G,
    /// Q = 6n₁² − 4n₂²; series L₉…L₁₂.
    H,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::F, Family::G, Family::H];

    pub fn spec(self) -> FamilySpec {
        FamilySpec::new(self)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::F => "F",
            Family::G => "G",
            Family::H => "H",
        };
        f.write_str(s)
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "F" | "f" => Ok(Family::F),
            "G" | "g" => Ok(Family::G),
            "H" | "h" => Ok(Family::H),
            other => Err(Error::Domain(format!("unknown family {other:?} (expected F, G or H)"))),
        }
    }
}

/// How a series L_id relates to a family component:
/// `q^{offset}·L_id(q) + artanh_coefficient·artanh(1/√3)/π = component`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesLink {
    pub id: SeriesId,
    pub component: usize,
    pub offset: Rational64,
    pub artanh_coefficient: Rational64,
}

/// Immutable description of one family.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilySpec {
    pub family: Family,
    pub form: QuadraticForm,
    pub cones: ConePair,
    /// μ₀…μ₃; component j combines the cosets μ_j and μ_j + λ.
    pub mus: [Coset; 4],
    pub lambda: Coset,
    /// Link of each component j to its series.
    pub links: [SeriesLink; 4],
    /// Constant terms c_j of the component Maass forms (coefficient of √τ₂).
    pub const_terms: [f64; 4],
}

fn link(id: u8, component: usize, num: i64, den: i64, artanh: i64) -> SeriesLink {
    SeriesLink {
        id: SeriesId::new(id).expect("static id"),
        component,
        offset: Rational64::new(num, den),
        artanh_coefficient: Rational64::from(artanh),
    }
}

impl FamilySpec {
    pub fn new(family: Family) -> Self {
        let r = Rational64::new;
        let lambda = Coset::new(r(1, 2), r(1, 2));
        let (form, t2, sign_forms, mus, links, c0) = match family {
            Family::F => (
                QuadraticForm { alpha1: 8, alpha2: 4 },
                1f64.asinh(),
                [[-1, -1], [1, -1], [2, 1], [2, -1]],
                [0, 1, 2, 3].map(|j| Coset::new(r(2 * j + 1, 16), r(1, 8))),
                [link(3, 0, -33, 32, 0), link(2, 1, 7, 32, 0), link(4, 2, -9, 32, 0), link(1, 3, -17, 32, 0)],
                0.0,
            ),
            Family::G => (
                QuadraticForm { alpha1: 6, alpha2: 2 },
                (1.0 / 3f64.sqrt()).atanh(),
                [[-1, -1], [1, -1], [3, 1], [3, -1]],
                [0, 1, 2, 3].map(|j| Coset::new(r(j, 6), r(0, 1))),
                [link(5, 0, -1, 1, -2), link(7, 1, 1, 6, 0), link(8, 2, -1, 3, 0), link(6, 3, -1, 2, 0)],
                2.0 * qseries::artanh_inv_sqrt3(),
            ),
            Family::H => (
                QuadraticForm { alpha1: 6, alpha2: 4 },
                2f64.sqrt().asinh(),
                [[-1, -1], [1, -1], [3, 2], [3, -2]],
                [0, 1, 2, 3].map(|j| Coset::new(r(j, 6), r(1, 8))),
                [link(10, 0, -17, 16, 0), link(11, 1, 5, 48, 0), link(12, 2, -19, 48, 0), link(9, 3, -9, 16, 0)],
                0.0,
            ),
        };
        let cones = ConePair::new(&form, -t2, t2, sign_forms).expect("family cone data is consistent");
        FamilySpec { family, form, cones, mus, lambda, links, const_terms: [c0, 0.0, 0.0, 0.0] }
    }

    /// The two cosets μ_j and μ_j + λ combined in component j.
    pub fn component_cosets(&self, j: usize) -> [Coset; 2] {
        [self.mus[j], self.mus[j].add(&self.lambda)]
    }

    /// Link for series `id`, if it belongs to this family.
    pub fn link_for(&self, id: SeriesId) -> Option<&SeriesLink> {
        self.links.iter().find(|l| l.id == id)
    }

    pub fn link_for_component(&self, j: usize) -> &SeriesLink {
        self.links.iter().find(|l| l.component == j).expect("every component has a link")
    }

    /// Family owning series `id`.
    pub fn for_series(id: SeriesId) -> FamilySpec {
        let fam = match id.index() {
            1..=4 => Family::F,
            5..=8 => Family::G,
            _ => Family::H,
        };
        FamilySpec::new(fam)
    }

    /// t₂ − t₁ (the weight of the n = 0 term in the completed theta function).
    pub fn cone_length(&self) -> f64 {
        self.cones.t2 - self.cones.t1
    }
}

fn check_component(j: usize) -> Result<(), Error> {
    if j < 4 {
        Ok(())
    } else {
        Err(Error::Domain(format!("component index must be 0..=3, got {j}")))
    }
}

// ==========================================================================
// Fourier data
// ==========================================================================

/// Σ of cone weights per exponent key for one coset:
/// key = 4α₁α₂·Q(n) ↦ Σ w(n) (w⁺ for Q > 0, w^⊥ for Q < 0), n ≠ 0,
/// over all points with |Q(n)| ≤ exponent_bound.
pub fn coset_weight_sums(
    form: &QuadraticForm,
    cones: &ConePair,
    mu: &Coset,
    exponent_bound: f64,
) -> Result<BTreeMap<i64, i64>, Error> {
    let radius = exponent_bound * cones.majorant_ratio() * (1.0 + 1e-12) + 1e-9;
    let key_bound = exponent_bound * form.discriminant() as f64;
    let mut map = BTreeMap::new();
    for n in enumerate_scaled(form, mu.scaled(form)?, radius)? {
        let key = form.key(n);
        if key == 0 || (key as f64).abs() > key_bound {
            continue;
        }
        let w = if key > 0 { cones.weight_plus(form, n) } else { cones.weight_perp(form, n) };
        if w != 0 {
            *map.entry(key).or_insert(0) += w;
        }
    }
    Ok(map)
}

/// Consolidated Fourier data of a family component:
/// U_j(τ) = c_j√τ₂ + √τ₂·Σ_e d_j(e)·K₀(2π|e|τ₂)·e^{2πieτ₁}.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierTable {
    pub constant: f64,
    /// (exponent e, coefficient d(e)), sorted by |e| then e.
    pub terms: Vec<(Rational64, Rational64)>,
}

impl FourierTable {
    /// JSON-ready rows [exponent numerator, exponent denominator, coefficient].
    pub fn rows(&self) -> Vec<(i64, i64, f64)> {
        self.terms.iter().map(|(e, d)| (*e.numer(), *e.denom(), r64(*d))).collect()
    }

    pub fn expansion(&self) -> FourierExpansion {
        FourierExpansion::new(
            Complex64::new(self.constant, 0.0),
            self.terms.iter().map(|(e, d)| (r64(*e), Complex64::new(r64(*d), 0.0))).collect(),
        )
    }
}

/// Fourier data {(e, d_j(e))} of component j for 0 < |e| ≤ exponent_bound.
pub fn fourier_table(spec: &FamilySpec, j: usize, exponent_bound: f64) -> Result<FourierTable, Error> {
    check_component(j)?;
    if !(exponent_bound >= 1.0) {
        return Err(Error::Domain(format!("exponent bound must be ≥ 1, got {exponent_bound}")));
    }
    let mut total: BTreeMap<i64, i64> = BTreeMap::new();
    for mu in spec.component_cosets(j) {
        for (k, w) in coset_weight_sums(&spec.form, &spec.cones, &mu, exponent_bound)? {
            *total.entry(k).or_insert(0) += w;
        }
    }
    let d = spec.form.discriminant();
    let mut terms: Vec<(Rational64, Rational64)> =
        total.into_iter().filter(|(_, w)| *w != 0).map(|(k, w)| (Rational64::new(k, d), Rational64::new(w, 2))).collect();
    terms.sort_by(|a, b| a.0.abs().cmp(&b.0.abs()).then(a.0.cmp(&b.0)));
    Ok(FourierTable { constant: spec.const_terms[j], terms })
}

/// Numeric Fourier–Bessel expansion
/// V(x + iy) = C√y + √y·Σ D(e)·K₀(2π|e|y)·e^{2πiex} with complex data.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierExpansion {
    pub constant: Complex64,
    /// (e, D(e)) sorted by |e|.
    terms: Vec<(f64, Complex64)>,
}

/// Bessel arguments beyond this are dropped (K₀(60) ≈ 1.4e−27).
pub const BESSEL_ARG_MAX: f64 = 60.0;

impl FourierExpansion {
    pub fn new(constant: Complex64, mut terms: Vec<(f64, Complex64)>) -> Self {
        terms.retain(|(_, d)| *d != Complex64::new(0.0, 0.0));
        terms.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()).then(a.0.total_cmp(&b.0)));
        FourierExpansion { constant, terms }
    }

    pub fn terms(&self) -> &[(f64, Complex64)] {
        &self.terms
    }

    /// Smallest |e| present.
    pub fn min_exponent(&self) -> Option<f64> {
        self.terms.first().map(|t| t.0.abs())
    }

    /// Largest |e| present (the table is complete up to this bound).
    pub fn max_exponent(&self) -> f64 {
        self.terms.last().map_or(0.0, |t| t.0.abs())
    }

    /// (V, ∂V) at x + iy with ∂ = ½(∂_x − i∂_y), constant included or not.
    pub fn value_and_dz(&self, x: f64, y: f64, with_constant: bool) -> (Complex64, Complex64) {
        let sy = y.sqrt();
        let mut v = (KahanSum::new(), KahanSum::new());
        let mut dv = (KahanSum::new(), KahanSum::new());
        let half_i = Complex64::new(0.0, 0.5);
        for &(e, d) in &self.terms {
            let arg = 2.0 * PI * e.abs() * y;
            if arg > BESSEL_ARG_MAX {
                break;
            }
            let (k0, k1) = kernel::k0_k1(arg);
            let phase = Complex64::from_polar(1.0, 2.0 * PI * frac_mul(e, x));
            let t = d * phase;
            let val = t * (sy * k0);
            // ½[2πie√y·K₀ − i(K₀/(2√y) − 2π|e|√y·K₁)]
            let dterm = t * (Complex64::new(0.0, PI * e * sy * k0) - half_i * (k0 / (2.0 * sy) - arg / sy * k1));
            v.0.add(val.re);
            v.1.add(val.im);
            dv.0.add(dterm.re);
            dv.1.add(dterm.im);
        }
        let mut value = Complex64::new(v.0.value(), v.1.value());
        let mut dz = Complex64::new(dv.0.value(), dv.1.value());
        if with_constant {
            value += self.constant * sy;
            dz += self.constant * Complex64::new(0.0, -0.25 / sy);
        }
        (value, dz)
    }

    pub fn value(&self, x: f64, y: f64) -> Complex64 {
        self.value_and_dz(x, y, true).0
    }
}

/// e·x reduced mod 1 without losing the fractional part for large e·x.
fn frac_mul(e: f64, x: f64) -> f64 {
    let p = e * x;
    p - p.floor()
}

// ==========================================================================
// False-indefinite theta series
// ==========================================================================

/// Exact q-expansion of ϑ_{μ_j} + ϑ_{μ_j+λ} with the exponent offset of the
/// linked series: coefficient n ↔ exponent offset + n, n < order, plus the
/// constant −(t₂−t₁)/π·δ_{μ∈ℤ²} carried symbolically for family G.
pub fn false_theta_series(spec: &FamilySpec, j: usize, order: usize) -> Result<FormalSeries, Error> {
    check_component(j)?;
    if order == 0 {
        return Err(Error::Domain("order must be at least 1".into()));
    }
    let link = spec.link_for_component(j);
    let offset = link.offset;
    let top = offset + Rational64::from(order as i64);
    let bound = r64(top).max(1.0);
    let table = fourier_table(spec, j, bound)?;
    let mut coeffs = vec![BigRational::zero(); order];
    for (e, d) in &table.terms {
        if *e <= Rational64::zero() {
            // only the Q > 0 half contributes to the holomorphic q-series
            continue;
        }
        let idx = *e - offset;
        if !idx.is_integer() || idx.is_negative() {
            return Err(Error::Internal(format!("exponent {e} not in the class of offset {offset}")));
        }
        let idx = idx.to_integer() as usize;
        if idx < order {
            coeffs[idx] = BigRational::new((*d.numer()).into(), (*d.denom()).into());
        }
    }
    let mut series = FormalSeries::new(BigRational::new((*offset.numer()).into(), (*offset.denom()).into()), coeffs);
    let zero_cosets = spec.component_cosets(j).iter().filter(|c| c.is_zero()).count();
    if zero_cosets > 0 {
        // −(t₂ − t₁)/π with t₂ − t₁ = 2·artanh(1/√3) for the G family
        if spec.family != Family::G {
            return Err(Error::Internal("integral coset outside family G".into()));
        }
        series = series.with_artanh_constant(BigRational::from_integer((-2 * zero_cosets as i64).into()))?;
    }
    Ok(series)
}

/// q^{offset}·L_id + artanh constant, i.e. the series side of the identity
/// with the matching family component.
pub fn linked_series(id: SeriesId, order: usize) -> Result<(FamilySpec, usize, FormalSeries), Error> {
    let spec = FamilySpec::for_series(id);
    let link = spec.link_for(id).expect("family owns its series").clone();
    let raw = qseries::l_series(id, order)?;
    let offset = BigRational::new((*link.offset.numer()).into(), (*link.offset.denom()).into());
    let mut s = raw.with_offset(offset);
    if !link.artanh_coefficient.is_zero() {
        s = s.with_artanh_constant(BigRational::from_integer((*link.artanh_coefficient.numer()).into()))?;
    }
    Ok((spec, link.component, s))
}

// ==========================================================================
// Mock Maass theta functions
// ==========================================================================

fn check_tau(tau: Complex64) -> Result<(), Error> {
    if !(tau.im >= TAU2_MIN) || !tau.re.is_finite() {
        return Err(Error::Domain(format!(
            "Im τ = {} is below {TAU2_MIN}; use the period module's transformed evaluation instead",
            tau.im
        )));
    }
    Ok(())
}

/// Exponent bound from the K₀ decay: |Q| ≤ (ln(1/ε) + margin)/(2πτ₂).
pub fn bessel_exponent_bound(tau2: f64, tol: &Tolerance) -> f64 {
    ((1.0 / tol.abs_tol).ln().max(0.0) + TRUNCATION_MARGIN) / (2.0 * PI * tau2)
}

/// Fourier–Bessel expansion of Θ_μ for a single coset, |e| ≤ bound.
pub fn coset_expansion(form: &QuadraticForm, cones: &ConePair, mu: &Coset, bound: f64) -> Result<FourierExpansion, Error> {
    let d = form.discriminant() as f64;
    let terms = coset_weight_sums(form, cones, mu, bound)?
        .into_iter()
        .map(|(k, w)| (k as f64 / d, Complex64::new(0.5 * w as f64, 0.0)))
        .collect();
    let constant = if mu.is_zero() { cones.t2 - cones.t1 } else { 0.0 };
    Ok(FourierExpansion::new(Complex64::new(constant, 0.0), terms))
}

/// Θ_μ(τ) for a single coset.
pub fn mock_maass_coset(
    form: &QuadraticForm,
    cones: &ConePair,
    mu: &Coset,
    tau: Complex64,
    tol: &Tolerance,
) -> Result<Complex64, Error> {
    check_tau(tau)?;
    let bound = bessel_exponent_bound(tau.im, tol).max(1.0);
    Ok(coset_expansion(form, cones, mu, bound)?.value(tau.re, tau.im))
}

fn family_expansion(spec: &FamilySpec, j: usize, tau2: f64, tol: &Tolerance) -> Result<FourierExpansion, Error> {
    let bound = bessel_exponent_bound(tau2, tol).max(1.0);
    Ok(fourier_table(spec, j, bound)?.expansion())
}

/// Component j of the family Maass form, Θ_{μ_j}(τ) + Θ_{μ_j+λ}(τ).
pub fn mock_maass_value(spec: &FamilySpec, j: usize, tau: Complex64, tol: &Tolerance) -> Result<Complex64, Error> {
    check_component(j)?;
    check_tau(tau)?;
    Ok(family_expansion(spec, j, tau.im, tol)?.value(tau.re, tau.im))
}

/// ∂/∂τ (= ½(∂_{τ₁} − i∂_{τ₂})) of [`mock_maass_value`], term by term.
pub fn mock_maass_dz(spec: &FamilySpec, j: usize, tau: Complex64, tol: &Tolerance) -> Result<Complex64, Error> {
    check_component(j)?;
    check_tau(tau)?;
    Ok(family_expansion(spec, j, tau.im, tol)?.value_and_dz(tau.re, tau.im, true).1)
}

// ==========================================================================
// Completed theta and shadows
// ==========================================================================

/// Radius for sums whose terms are bounded by e^{−2πτ₂e^{−2t}·maj(n)}.
fn gaussian_radius(tau2: f64, t: f64, tol: &Tolerance) -> f64 {
    ((1.0 / tol.abs_tol).ln().max(0.0) + TRUNCATION_MARGIN) / (2.0 * PI * tau2 * (-2.0 * t.abs()).exp())
}

/// Θ̂_μ(τ) = √τ₂·Σ_n q^{Q(n)}·∫_{t₁}^{t₂} e^{−πB(n,c(t))²τ₂} dt, the t-integral by
/// composite Gauss–Legendre with panels resolving the Gaussian.
pub fn completed_theta_value(
    form: &QuadraticForm,
    cones: &ConePair,
    mu: &Coset,
    tau: Complex64,
    tol: &Tolerance,
) -> Result<Complex64, Error> {
    check_tau(tau)?;
    let (x, y) = (tau.re, tau.im);
    let radius = gaussian_radius(y, cones.t_max(), tol);
    let gl = GaussLegendre::new(16);
    let (sa1, sa2) = ((form.alpha1 as f64).sqrt(), (form.alpha2 as f64).sqrt());
    let len = cones.t2 - cones.t1;
    let cosh2 = cones.majorant_ratio();
    let d = form.discriminant();
    let mut re = KahanSum::new();
    let mut im = KahanSum::new();
    for big_n in enumerate_scaled(form, mu.scaled(form)?, radius)? {
        let n = form.unscale(big_n);
        let q = form.key(big_n) as f64 / d as f64;
        let (x1, x2) = (sa1 * n[0] * y.sqrt(), sa2 * n[1] * y.sqrt());
        // y(t) = 2(x₁ sinh t − x₂ cosh t); exponent −π(y(t)² + 2Qτ₂)
        let integrand = |t: f64| {
            let yt = 2.0 * (x1 * t.sinh() - x2 * t.cosh());
            (-PI * (yt * yt + 2.0 * q * y)).exp()
        };
        let scale = 2.0 * (y * form.majorant(n) * cosh2).sqrt();
        let panels = ((len * scale).ceil() as usize).clamp(1, 400);
        let h = len / panels as f64;
        let mut integral = 0.0;
        for p in 0..panels {
            let a = cones.t1 + h * p as f64;
            integral += gl.integrate(integrand, a, a + h);
        }
        let phase = Complex64::from_polar(1.0, 2.0 * PI * frac_mul(q, x));
        let term = phase * integral;
        re.add(term.re);
        im.add(term.im);
    }
    Ok(Complex64::new(re.value(), im.value()) * y.sqrt())
}

/// α_{t₀}(v) for a real 2-vector v (already scaled by √τ₂), combined with the
/// factor e^{−2πQ(v)}: the half-line t-integral after the substitution
/// |B(v, c(t))| = |y₀| + s², which removes the endpoint singularity.
fn alpha_times_q(form: &QuadraticForm, v: [f64; 2], t0: f64, scale: f64) -> Result<f64, Error> {
    let c0 = cone_vector(form, t0);
    let c0p = cone_perp_vector(form, t0);
    let y0 = form.b(v, c0);
    let y0p = form.b(v, c0p);
    let s = snapped_sign(y0, scale) * snapped_sign(y0p, scale);
    if s == 0 {
        return Ok(0.0);
    }
    let a = y0.abs();
    // (|y₀| + s²)² − y₀² ≥ 60/π is negligible
    let s_max = (((a * a + 60.0 / PI).sqrt() - a).max(0.0)).sqrt();
    let q2 = 2.0 * form.q(v);
    let f = |s2: f64| {
        let u = a + s2 * s2;
        let den = (s2 * s2 * (s2 * s2 + 2.0 * a) + y0p * y0p).sqrt();
        2.0 * s2 * (-PI * (u * u + q2)).exp() / den
    };
    let tol = Tolerance { abs_tol: 1e-17, rel_tol: 1e-13, max_refinement: 50 };
    let r = quad_interval(&f, 0.0, s_max, &tol).or_else(|e| match e {
        Error::Quadrature { best, error_estimate, .. } if error_estimate < 1e-14 => {
            Ok(kernel::QuadratureResult { value: best[0].re, error_estimate, evaluations: 0 })
        }
        other => Err(other),
    })?;
    Ok(s as f64 * r.value)
}

/// φ_μ^{[c₀]}(τ) = √τ₂·Σ_n α_{t₀}(n√τ₂)·q^{Q(n)} with c₀ = c(t₀).
pub fn shadow_value(
    form: &QuadraticForm,
    mu: &Coset,
    t0: f64,
    tau: Complex64,
    tol: &Tolerance,
) -> Result<Complex64, Error> {
    check_tau(tau)?;
    QuadraticForm::new(form.alpha1, form.alpha2)?;
    let (x, y) = (tau.re, tau.im);
    let radius = gaussian_radius(y, t0, tol);
    let d = form.discriminant();
    let mut re = KahanSum::new();
    let mut im = KahanSum::new();
    for big_n in enumerate_scaled(form, mu.scaled(form)?, radius)? {
        let n = form.unscale(big_n);
        let v = [n[0] * y.sqrt(), n[1] * y.sqrt()];
        let scale = (form.alpha1 as f64) * (v[0].abs() + v[1].abs());
        let a = alpha_times_q(form, v, t0, scale)?;
        if a == 0.0 {
            continue;
        }
        let q = form.key(big_n) as f64 / d as f64;
        let term = Complex64::from_polar(1.0, 2.0 * PI * frac_mul(q, x)) * a;
        re.add(term.re);
        im.add(term.im);
    }
    Ok(Complex64::new(re.value(), im.value()) * y.sqrt())
}

/// Completed family component Θ̂_{μ_j} + Θ̂_{μ_j+λ}.
pub fn completed_family_value(spec: &FamilySpec, j: usize, tau: Complex64, tol: &Tolerance) -> Result<Complex64, Error> {
    check_component(j)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for mu in spec.component_cosets(j) {
        acc += completed_theta_value(&spec.form, &spec.cones, &mu, tau, tol)?;
    }
    Ok(acc)
}

/// Σ over the two cosets of component j of φ^{[c₁]} − φ^{[c₂]}.
pub fn family_shadow(spec: &FamilySpec, j: usize, tau: Complex64, tol: &Tolerance) -> Result<Complex64, Error> {
    check_component(j)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for mu in spec.component_cosets(j) {
        acc += shadow_value(&spec.form, &mu, spec.cones.t1, tau, tol)?;
        acc -= shadow_value(&spec.form, &mu, spec.cones.t2, tau, tol)?;
    }
    Ok(acc)
}

/// Convenience: exact rational Q of a rational vector as f64.
pub fn q_value(form: &QuadraticForm, n: [Rational64; 2]) -> f64 {
    r64(form.q_rational(n))
}
