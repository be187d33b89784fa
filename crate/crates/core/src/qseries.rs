//! Exact truncated q-expansions and numeric values of the twelve series
//! L₁…L₁₂.
//!
//! Every series is a double sum over 0 ≤ k ≤ n (or 1 ≤ k ≤ n) of
//!
//! ```text
//! (−1)^{n+k} · X_k(q) · Z_k(n; q) · q^{e(n,k)}
//! ```
//!
//! where `X_k` collects the k-only factors (including the inner denominator
//! 1/(1−q^{2k±1})), `Z_k(k) = 1` and `Z_k(n+1)/Z_k(n)` is a ratio of two
//! binomials in q. Both the exact expansion and the complex evaluator walk the
//! same factor description, updating `Z_k` incrementally.
//!
//! Ids 7, 8, 11 and 12 are divergent in n at fixed k; their value is defined
//! as the limit of the average of consecutive partial sums (S_N + S_{N+1})/2.

use std::fmt;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::kernel::Tolerance;
use crate::Error;

// ==========================================================================
// Formal series
// ==========================================================================

/// Truncated q-expansion Σ_{n < order} coeffs[n]·q^{offset+n}, optionally
/// plus a transcendental constant `artanh_coefficient · artanh(1/√3)/π`
/// sitting at exponent 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormalSeries {
    offset: BigRational,
    coeffs: Vec<BigRational>,
    artanh_coefficient: BigRational,
}

/// artanh(1/√3) = ½·ln(2 + √3).
pub fn artanh_inv_sqrt3() -> f64 {
    0.658_478_948_462_408_2
}

impl FormalSeries {
    /// Series with the given offset and coefficients; `order = coeffs.len()`.
    pub fn new(offset: BigRational, coeffs: Vec<BigRational>) -> Self {
        FormalSeries { offset, coeffs, artanh_coefficient: BigRational::zero() }
    }

    pub fn zero(order: usize) -> Self {
        Self::new(BigRational::zero(), vec![BigRational::zero(); order])
    }

    /// The constant 1 truncated at `order`.
    pub fn one(order: usize) -> Self {
        Self::constant(BigRational::one(), order)
    }

    pub fn constant(c: BigRational, order: usize) -> Self {
        let mut s = Self::zero(order);
        if order > 0 {
            s.coeffs[0] = c;
        }
        s
    }

    /// The monomial q^m (m ≥ 0) truncated at `order`.
    pub fn monomial(m: usize, order: usize) -> Self {
        let mut s = Self::zero(order);
        if m < order {
            s.coeffs[m] = BigRational::one();
        }
        s
    }

    fn from_integers(offset: BigRational, v: &[BigInt]) -> Self {
        Self::new(offset, v.iter().map(|c| BigRational::from_integer(c.clone())).collect())
    }

    pub fn offset(&self) -> &BigRational {
        &self.offset
    }

    /// Number of valid coefficients.
    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// Coefficient of q^{offset+n}; `None` at or beyond the truncation order.
    pub fn coeff(&self, n: usize) -> Option<&BigRational> {
        self.coeffs.get(n)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    /// Rational multiple of artanh(1/√3)/π carried at exponent 0.
    pub fn artanh_coefficient(&self) -> &BigRational {
        &self.artanh_coefficient
    }

    /// Adds `c · artanh(1/√3)/π` at exponent 0. The offset must be an
    /// integer ≤ 0 and exponent 0 must lie below the truncation order.
    pub fn with_artanh_constant(mut self, c: BigRational) -> Result<Self, Error> {
        let index = -self.offset.clone();
        if !index.is_integer() || index.is_negative() || index.to_integer() >= BigInt::from(self.order()) {
            return Err(Error::Domain(format!(
                "exponent 0 is not a valid index of a series with offset {} and order {}",
                self.offset,
                self.order()
            )));
        }
        self.artanh_coefficient += c;
        Ok(self)
    }

    /// The same coefficients re-labelled with a new global exponent offset,
    /// i.e. multiplication by q^{new − old}.
    pub fn with_offset(mut self, offset: BigRational) -> Self {
        self.offset = offset;
        self
    }

    /// Truncate to a smaller order.
    pub fn truncated(mut self, order: usize) -> Self {
        self.coeffs.truncate(order);
        self
    }

    fn check_compatible(&self, other: &Self) -> Result<(), Error> {
        if self.offset != other.offset {
            return Err(Error::Domain(format!("offset mismatch: {} vs {}", self.offset, other.offset)));
        }
        Ok(())
    }

    /// Sum; the result is truncated at the smaller order.
    pub fn add(&self, other: &Self) -> Result<Self, Error> {
        self.check_compatible(other)?;
        let order = self.order().min(other.order());
        let coeffs = (0..order).map(|i| &self.coeffs[i] + &other.coeffs[i]).collect();
        Ok(FormalSeries {
            offset: self.offset.clone(),
            coeffs,
            artanh_coefficient: &self.artanh_coefficient + &other.artanh_coefficient,
        })
    }

    pub fn neg(&self) -> Self {
        FormalSeries {
            offset: self.offset.clone(),
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
            artanh_coefficient: -self.artanh_coefficient.clone(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self, Error> {
        self.add(&other.neg())
    }

    pub fn scale(&self, s: &BigRational) -> Self {
        FormalSeries {
            offset: self.offset.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
            artanh_coefficient: &self.artanh_coefficient * s,
        }
    }

    /// Cauchy product; offsets add, order is the smaller of the two.
    /// Transcendental constants are not supported in products.
    pub fn mul(&self, other: &Self) -> Result<Self, Error> {
        if !self.artanh_coefficient.is_zero() || !other.artanh_coefficient.is_zero() {
            return Err(Error::Domain("product of series carrying a transcendental constant".into()));
        }
        let order = self.order().min(other.order());
        let mut coeffs = vec![BigRational::zero(); order];
        for (i, a) in self.coeffs.iter().take(order).enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().take(order - i).enumerate() {
                if !b.is_zero() {
                    coeffs[i + j] += a * b;
                }
            }
        }
        Ok(FormalSeries::new(&self.offset + &other.offset, coeffs))
    }

    /// Numeric value at q = e^{2πiτ}, the fractional offset resolved as
    /// e^{2πiτ·offset}. Truncation error is not estimated.
    pub fn eval_tau(&self, tau: Complex64) -> Complex64 {
        let two_pi_i = Complex64::new(0.0, 2.0 * std::f64::consts::PI);
        let q = (two_pi_i * tau).exp();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut qn = Complex64::new(1.0, 0.0);
        for c in &self.coeffs {
            acc += qn * rational_to_f64(c);
            qn *= q;
        }
        let off = rational_to_f64(&self.offset);
        acc *= (two_pi_i * tau * off).exp();
        acc + artanh_inv_sqrt3() / std::f64::consts::PI * rational_to_f64(&self.artanh_coefficient)
    }

    /// Numeric value at a complex q for a series with integral offset ≥ 0.
    pub fn eval_q(&self, q: Complex64) -> Result<Complex64, Error> {
        if !self.offset.is_integer() || self.offset.is_negative() {
            return Err(Error::Domain(format!("eval_q needs a nonnegative integral offset, got {}", self.offset)));
        }
        let shift = self.offset.to_integer().to_i32().unwrap_or(i32::MAX);
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * q + rational_to_f64(c);
        }
        let constant = artanh_inv_sqrt3() / std::f64::consts::PI * rational_to_f64(&self.artanh_coefficient);
        Ok(acc * q.powi(shift) + constant)
    }

    /// JSON record `{ "id", "offset": "p/q", "order", "coeffs": [[n, "p/q"], …] }`
    /// listing the nonzero coefficients.
    pub fn to_record(&self, id: Option<u8>) -> SeriesRecord {
        SeriesRecord {
            id,
            offset: self.offset.to_string(),
            order: self.order(),
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(n, c)| (n, c.to_string()))
                .collect(),
            artanh_over_pi: if self.artanh_coefficient.is_zero() {
                None
            } else {
                Some(self.artanh_coefficient.to_string())
            },
        }
    }

    pub fn from_record(record: &SeriesRecord) -> Result<Self, Error> {
        let offset = parse_rational(&record.offset)?;
        let mut coeffs = vec![BigRational::zero(); record.order];
        for (n, c) in &record.coeffs {
            if *n >= record.order {
                return Err(Error::Domain(format!("coefficient index {n} beyond order {}", record.order)));
            }
            coeffs[*n] = parse_rational(c)?;
        }
        let mut s = FormalSeries::new(offset, coeffs);
        if let Some(a) = &record.artanh_over_pi {
            s = s.with_artanh_constant(parse_rational(a)?)?;
        }
        Ok(s)
    }
}

impl fmt::Display for FormalSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q^({}) * (", self.offset)?;
        let mut first = true;
        if !self.artanh_coefficient.is_zero() {
            write!(f, "[{}·artanh(1/√3)/π at q^0]", self.artanh_coefficient)?;
            first = false;
        }
        for (n, c) in self.coeffs.iter().enumerate().filter(|(_, c)| !c.is_zero()) {
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "({c})q^{n}")?;
            first = false;
        }
        write!(f, " + O(q^{}))", self.order())
    }
}

/// Serialized form of a [`FormalSeries`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesRecord {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub id: Option<u8>,
    pub offset: String,
    pub order: usize,
    pub coeffs: Vec<(usize, String)>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub artanh_over_pi: Option<String>,
}

/// Parses `"p/q"` or `"p"` into a reduced rational.
pub fn parse_rational(s: &str) -> Result<BigRational, Error> {
    let bad = || Error::Domain(format!("not a rational number: {s:?}"));
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(p, q))
        }
        None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Length argument of [`pochhammer`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PochhammerLength {
    Finite(usize),
    Infinite,
}

/// (a; q)_n = Π_{j<n} (1 − a·q^j), truncated at `order`. `a` must have an
/// integral nonnegative offset. For n = ∞ factors with j ≥ order (which are
/// 1 + O(q^order)) are dropped.
pub fn pochhammer(a: &FormalSeries, n: PochhammerLength, order: usize) -> Result<FormalSeries, Error> {
    if order == 0 {
        return Err(Error::Domain("order must be at least 1".into()));
    }
    if !a.offset.is_integer() || a.offset.is_negative() || !a.artanh_coefficient.is_zero() {
        return Err(Error::Domain("pochhammer base must be a power series in q".into()));
    }
    let shift = a.offset.to_integer().to_usize().unwrap_or(usize::MAX);
    // a as a plain coefficient vector of length `order`
    let mut base = vec![BigRational::zero(); order];
    for (i, c) in a.coeffs.iter().enumerate() {
        if i + shift < order {
            base[i + shift] = c.clone();
        }
    }
    let count = match n {
        PochhammerLength::Finite(n) => n,
        PochhammerLength::Infinite => {
            if base[0].is_zero() {
                order
            } else {
                return Err(Error::Domain("(a;q)_∞ with a(0) ≠ 0 does not converge formally".into()));
            }
        }
    };
    let mut acc = FormalSeries::one(order);
    for j in 0..count {
        // factor 1 − a·q^j
        let mut factor = FormalSeries::one(order);
        for (i, c) in base.iter().enumerate() {
            if i + j < order {
                factor.coeffs[i + j] -= c;
            }
        }
        acc = acc.mul(&factor)?;
    }
    Ok(acc)
}

// ==========================================================================
// The twelve series
// ==========================================================================

/// Index 1..=12 of one of the series L₁…L₁₂.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeriesId(u8);

impl SeriesId {
    pub fn new(index: u8) -> Result<Self, Error> {
        if (1..=12).contains(&index) {
            Ok(SeriesId(index))
        } else {
            Err(Error::Domain(format!("series id must be in 1..=12, got {index}")))
        }
    }

    pub fn index(self) -> u8 {
        self.0
    }

    /// Whether the series is defined through averaged partial sums.
    pub fn is_star_averaged(self) -> bool {
        matches!(self.0, 7 | 8 | 11 | 12)
    }

    pub fn all() -> impl Iterator<Item = SeriesId> {
        (1..=12).map(SeriesId)
    }
}

impl fmt::Display for SeriesId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

/// Elementary factors out of which the k-only part X_k is assembled.
#[derive(Clone, Copy, Debug)]
enum Factor {
    Const(i64),
    OneMinus(usize),
    OnePlus(usize),
    InvOneMinus(usize),
}

/// Numerator of Z_k(n+1)/Z_k(n); the denominator is always 1 − q^{n+1−k}.
#[derive(Clone, Copy, Debug)]
enum Ratio {
    /// 1 − q^n
    OneMinusN,
    /// 1 − q^{n+1}
    OneMinusNPlus1,
    /// (1 + q^n)(1 − q^n) = 1 − q^{2n}
    OneMinus2N,
    /// 1 − q^{2n+2}
    OneMinus2NPlus2,
}

impl Ratio {
    fn exponent(self, n: usize) -> usize {
        match self {
            Ratio::OneMinusN => n,
            Ratio::OneMinusNPlus1 => n + 1,
            Ratio::OneMinus2N => 2 * n,
            Ratio::OneMinus2NPlus2 => 2 * n + 2,
        }
    }
}

struct SeriesDef {
    k_start: usize,
    star: bool,
    /// Additive constant in front of the sum.
    constant: i64,
    /// Multiplier of the sum.
    scale: i64,
    ratio: Ratio,
    exponent: fn(usize, usize) -> usize,
    x_factors: fn(usize) -> Vec<Factor>,
}

fn tri(m: usize) -> usize {
    m * (m + 1) / 2
}

fn inv_odd_minus(k: usize) -> Vec<Factor> {
    vec![Factor::InvOneMinus(2 * k - 1)]
}

fn inv_odd_plus(k: usize) -> Vec<Factor> {
    vec![Factor::InvOneMinus(2 * k + 1)]
}

/// (−1; q)_k = 2·Π_{j=1}^{k−1}(1 + q^j) for k ≥ 1.
fn minus_one_poch(k: usize) -> Vec<Factor> {
    let mut f = vec![Factor::Const(2)];
    f.extend((1..k).map(Factor::OnePlus));
    f
}

fn x_l5(k: usize) -> Vec<Factor> {
    let mut f = minus_one_poch(k);
    f.extend((1..k).map(Factor::OneMinus));
    f.push(Factor::InvOneMinus(2 * k - 1));
    f.extend((1..k).map(|j| Factor::InvOneMinus(2 * j)));
    f
}

fn x_l9(k: usize) -> Vec<Factor> {
    let mut f = minus_one_poch(k);
    f.push(Factor::InvOneMinus(2 * k - 1));
    f
}

fn x_l11(k: usize) -> Vec<Factor> {
    let mut f: Vec<Factor> = (1..=k).map(Factor::OnePlus).collect();
    f.push(Factor::InvOneMinus(2 * k + 1));
    f
}

fn definition(id: SeriesId) -> SeriesDef {
    use Ratio::*;
    let d = |k_start, star, constant, scale, ratio, exponent, x_factors| SeriesDef {
        k_start,
        star,
        constant,
        scale,
        ratio,
        exponent,
        x_factors,
    };
    match id.0 {
        1 => d(1, false, 0, 1, OneMinusN, |n, k| tri(n) + tri(k), inv_odd_minus),
        2 => d(0, false, 0, 1, OneMinusNPlus1, |n, k| tri(n) + tri(k), inv_odd_plus),
        3 => d(1, false, 0, 1, OneMinusN, |n, k| 1 + tri(n) + tri(k - 1), inv_odd_minus),
        4 => d(0, false, -1, 1, OneMinusNPlus1, |n, k| tri(n) + k * (k.max(1) - 1) / 2, inv_odd_plus),
        5 => d(1, false, 0, 1, OneMinus2N, |n, k| 1 + n + k * k - k, x_l5),
        6 => d(1, false, 0, 1, OneMinus2N, |n, k| n + k * k, x_l5),
        7 => d(0, true, 0, 2, OneMinus2NPlus2, |_, k| k * k + k, inv_odd_plus),
        8 => d(0, true, -1, 2, OneMinus2NPlus2, |_, k| k * k, inv_odd_plus),
        9 => d(1, false, 0, 1, OneMinus2N, |n, k| n + tri(k), x_l9),
        10 => d(1, false, 0, 1, OneMinus2N, |n, k| 1 + n + tri(k - 1), x_l9),
        11 => d(0, true, 0, 2, OneMinus2NPlus2, |_, k| tri(k), x_l11),
        12 => d(0, true, -2, 2, OneMinus2NPlus2, |_, k| k * k.saturating_sub(1) / 2, x_l11),
        _ => unreachable!("SeriesId is validated at construction"),
    }
}

// Exact integer series helpers on coefficient vectors of fixed length.

fn mul_one_plus_sign(v: &mut [BigInt], m: usize, sign: i32) {
    if m == 0 {
        for c in v.iter_mut() {
            *c *= 1 + sign;
        }
        return;
    }
    for i in (m..v.len()).rev() {
        let t = v[i - m].clone();
        if sign > 0 {
            v[i] += t;
        } else {
            v[i] -= t;
        }
    }
}

fn div_one_minus(v: &mut [BigInt], m: usize) {
    debug_assert!(m >= 1);
    for i in m..v.len() {
        let t = v[i - m].clone();
        v[i] += t;
    }
}

fn mul_vec(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let n = a.len();
    let mut out = vec![BigInt::zero(); n];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().take(n - i).enumerate() {
            if !y.is_zero() {
                out[i + j] += x * y;
            }
        }
    }
    out
}

fn apply_factors(v: &mut Vec<BigInt>, factors: &[Factor]) {
    for f in factors {
        match *f {
            Factor::Const(c) => v.iter_mut().for_each(|x| *x *= c),
            Factor::OneMinus(m) => mul_one_plus_sign(v, m, -1),
            Factor::OnePlus(m) => mul_one_plus_sign(v, m, 1),
            Factor::InvOneMinus(m) => div_one_minus(v, m),
        }
    }
}

fn factor_series(factors: &[Factor], order: usize) -> Vec<BigInt> {
    let mut v = vec![BigInt::zero(); order];
    v[0] = BigInt::one();
    apply_factors(&mut v, factors);
    v
}

/// Z_k(n) → Z_k(n+1), exact.
fn step_z(z: &mut [BigInt], ratio: Ratio, n: usize, k: usize) {
    mul_one_plus_sign(z, ratio.exponent(n), -1);
    div_one_minus(z, n + 1 - k);
}

/// Adds sign·q^shift·z into acc (truncated).
fn add_shifted(acc: &mut [BigInt], z: &[BigInt], shift: usize, negative: bool) {
    for i in shift..acc.len() {
        let t = &z[i - shift];
        if negative {
            acc[i] -= t;
        } else {
            acc[i] += t;
        }
    }
}

/// Cap on the partial-sum index used for averaged series.
fn star_cap(order: usize) -> usize {
    4 * order + 64
}

/// Exact q-expansion of L_id, coefficients of q^0…q^{order−1}.
pub fn l_series(id: SeriesId, order: usize) -> Result<FormalSeries, Error> {
    if order == 0 {
        return Err(Error::Domain("order must be at least 1".into()));
    }
    let def = definition(id);
    let mut total = vec![BigInt::zero(); order];
    let mut k = def.k_start;
    while (def.exponent)(k, k) < order {
        let x = factor_series(&(def.x_factors)(k), order);
        let inner = if def.star { star_inner(&def, k, order)? } else { plain_inner(&def, k, order) };
        let prod = mul_vec(&x, &inner);
        // averaged inner sums come back doubled
        let mult = if def.star { def.scale / 2 } else { def.scale };
        for (t, p) in total.iter_mut().zip(prod) {
            *t += p * mult;
        }
        k += 1;
    }
    total[0] += def.constant;
    Ok(FormalSeries::from_integers(BigRational::zero(), &total))
}

/// Σ_{n ≥ k} (−1)^{n+k} Z_k(n) q^{e(n,k)}, truncated; e grows with n.
fn plain_inner(def: &SeriesDef, k: usize, order: usize) -> Vec<BigInt> {
    let mut acc = vec![BigInt::zero(); order];
    let mut z = vec![BigInt::zero(); order];
    z[0] = BigInt::one();
    let mut n = k;
    loop {
        let e = (def.exponent)(n, k);
        if e >= order {
            break;
        }
        add_shifted(&mut acc, &z, e, (n + k) % 2 == 1);
        step_z(&mut z, def.ratio, n, k);
        n += 1;
    }
    acc
}

/// For averaged series: q^{e_k}·(P_N + P_{N+1}) with P_N = Σ_{n=k}^{N}(−1)^{n+k}Z_k(n),
/// at the first N where three consecutive values agree below the order.
fn star_inner(def: &SeriesDef, k: usize, order: usize) -> Result<Vec<BigInt>, Error> {
    let e = (def.exponent)(k, k);
    let len = order - e;
    let mut z = vec![BigInt::zero(); len];
    z[0] = BigInt::one();
    let mut partial = vec![BigInt::zero(); len];
    let mut history: Vec<Vec<BigInt>> = Vec::new();
    let mut prev_partial: Option<Vec<BigInt>> = None;
    for n in k..=k + star_cap(order) {
        add_shifted(&mut partial, &z, 0, (n + k) % 2 == 1);
        if let Some(p) = prev_partial.take() {
            let doubled: Vec<BigInt> = p.iter().zip(&partial).map(|(a, b)| a + b).collect();
            history.push(doubled);
            let h = history.len();
            if h >= 3 && history[h - 1] == history[h - 2] && history[h - 2] == history[h - 3] {
                let mut out = vec![BigInt::zero(); order];
                add_shifted(&mut out, &history[h - 1], e, false);
                return Ok(out);
            }
        }
        prev_partial = Some(partial.clone());
        step_z(&mut z, def.ratio, n, k);
    }
    Err(Error::Convergence(format!(
        "averaged partial sums at k = {k} did not stabilise below order {order}"
    )))
}

// ==========================================================================
// Numeric evaluation
// ==========================================================================

fn factor_value(factors: &[Factor], q: Complex64) -> Complex64 {
    let one = Complex64::new(1.0, 0.0);
    factors.iter().fold(one, |acc, f| match *f {
        Factor::Const(c) => acc * c as f64,
        Factor::OneMinus(m) => acc * (one - q.powi(m as i32)),
        Factor::OnePlus(m) => acc * (one + q.powi(m as i32)),
        Factor::InvOneMinus(m) => acc / (one - q.powi(m as i32)),
    })
}

const MAX_TERMS: usize = 200_000;

/// Numeric value of L_id(q) for |q| < 1 by direct summation.
///
/// Plain series stop once successive terms fall below the tolerance relative
/// to the running sum for several consecutive indices (terms decay at least
/// geometrically); averaged series stop once three consecutive averaged
/// partial sums agree to the tolerance. Reliable in practice for
/// |q| ≤ e^{−2π·0.005}; closer to the unit circle the inner products lose
/// digits to cancellation.
pub fn l_eval(id: SeriesId, q: Complex64, tol: &Tolerance) -> Result<Complex64, Error> {
    let r = q.norm();
    if !(r < 1.0) {
        return Err(Error::Domain(format!("|q| = {r} is not < 1")));
    }
    let def = definition(id);
    if r == 0.0 {
        let c = l_series(id, 1)?;
        return Ok(Complex64::new(rational_to_f64(&c.coeffs[0]), 0.0));
    }
    let eps = tol.rel_tol.min(1e-16);
    let mut total = Complex64::new(def.constant as f64, 0.0);
    let mut k = def.k_start;
    let mut small_k = 0;
    loop {
        let e_min = (def.exponent)(k, k) as f64;
        let x = factor_value(&(def.x_factors)(k), q);
        let inner = if def.star { star_inner_value(&def, k, q, tol)? } else { plain_inner_value(&def, k, q, tol)? };
        let contribution = x * inner * def.scale as f64;
        total += contribution;
        let scale = total.norm().max(1.0);
        if contribution.norm() <= eps * scale && r.powf(e_min) <= eps {
            small_k += 1;
            if small_k >= 3 {
                return Ok(total);
            }
        } else {
            small_k = 0;
        }
        k += 1;
        if k > MAX_TERMS {
            return Err(Error::Convergence(format!("L{} outer sum not converged; partial value {total}", id.0)));
        }
    }
}

fn plain_inner_value(def: &SeriesDef, k: usize, q: Complex64, tol: &Tolerance) -> Result<Complex64, Error> {
    let one = Complex64::new(1.0, 0.0);
    let eps = tol.rel_tol.min(1e-16);
    let mut z = one;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut small = 0;
    for n in k..k + MAX_TERMS {
        let e = (def.exponent)(n, k) as i32;
        let sign = if (n + k) % 2 == 1 { -1.0 } else { 1.0 };
        let term = z * q.powi(e) * sign;
        acc += term;
        if term.norm() <= eps * acc.norm().max(f64::MIN_POSITIVE) {
            small += 1;
            if small >= 4 {
                return Ok(acc);
            }
        } else {
            small = 0;
        }
        z *= (one - q.powi(def.ratio.exponent(n) as i32)) / (one - q.powi((n + 1 - k) as i32));
        if !z.is_finite() {
            break;
        }
    }
    Err(Error::Convergence(format!("inner sum at k = {k} not converged; partial value {acc}")))
}

fn star_inner_value(def: &SeriesDef, k: usize, q: Complex64, tol: &Tolerance) -> Result<Complex64, Error> {
    let one = Complex64::new(1.0, 0.0);
    let eps = tol.rel_tol.min(1e-16);
    let qe = q.powi((def.exponent)(k, k) as i32);
    let mut z = one;
    let mut partial = Complex64::new(0.0, 0.0);
    let mut prev_avg: Option<Complex64> = None;
    let mut agree = 0;
    for n in k..k + MAX_TERMS {
        let sign = if (n + k) % 2 == 1 { -1.0 } else { 1.0 };
        let next_z = z * (one - q.powi(def.ratio.exponent(n) as i32)) / (one - q.powi((n + 1 - k) as i32));
        partial += z * sign;
        // (P_n + P_{n+1})/2 = P_n − sign·Z(n+1)/2
        let avg = partial - next_z * (0.5 * sign);
        if let Some(p) = prev_avg {
            if (avg - p).norm() <= 4.0 * eps * avg.norm().max(1.0) {
                agree += 1;
                if agree >= 2 {
                    return Ok(qe * avg);
                }
            } else {
                agree = 0;
            }
        }
        prev_avg = Some(avg);
        z = next_z;
    }
    Err(Error::Convergence(format!("averaged partial sums at k = {k} not converged")))
}
