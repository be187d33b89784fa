//! Period integrals of the family Maass forms U_j: the holomorphic functions
//! u_j on ℍ, the obstructions 𝒰_{j,ρ}, the quantum values 𝔲_j at rationals,
//! and checks of their transformation laws.
//!
//! ## Evaluating U near the real line
//!
//! Every integral here needs U_j and ∂U_j = ∂U_j/∂z at points with tiny
//! imaginary part. [`MaassEvaluator`] maps such a point z into the standard
//! fundamental domain of SL₂(ℤ), z = A·z₀, and splits A = M·g with M ∈ Γ₀(2)
//! and g ∈ {I, S, ST}. Then U(z) = Ψ_M·U(g·z₀), where U(z₀) comes from the
//! Fourier–Bessel expansion at ∞ and U(S·w) from the expansion at the cusp 0,
//!
//! ```text
//! U_j(S·w) = Σ_ν (ψ_S(μ_j, ν) + ψ_S(μ_j + λ, ν))·Θ_ν(w)
//! ```
//!
//! summed over the whole discriminant group. Both expansions are only ever
//! evaluated at Im ≥ √3/2, so a short table suffices.
//!
//! Points carry an exact rational base plus a floating offset ([`Point`]):
//! near a cusp x the reducing matrix has a pole at x, and subtracting x in
//! exact arithmetic keeps the transformed point accurate.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use num_integer::Integer;
use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};

use crate::kernel::{quad_exp_tail, quad_finite_between, quad_interval, CVec, EndpointSingularity, QuadValue, Tolerance};
use crate::modular::{self, CuspRational, Gamma02Element, MultiplierMatrix, Sl2z};
use crate::theta::{self, Family, FamilySpec, FourierExpansion};
use crate::Error;

type V4 = CVec<4>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// τ₂ from which u_value uses the q-series directly.
pub const DIRECT_ROUTE_TAU2: f64 = 0.05;

/// Smallest Im τ accepted off the vertical lines above cusps.
pub const SPLIT_ROUTE_TAU2_MIN: f64 = 1e-10;

/// Points with Im z at least this are evaluated without reduction.
const DIRECT_EVAL_IM: f64 = 0.6;

/// Exponent bound of the evaluator tables; complete for Im ≥ 0.6 since
/// 2π·16·0.6 > 60.
const EVALUATOR_EXPONENT_BOUND: f64 = 16.0;

/// Guard for sgn(cτ₁ + d) and the cut line of 𝒰 with floating τ₁.
const SIGN_GUARD: f64 = 1e-14;

fn check_component(j: usize) -> Result<(), Error> {
    if j < 4 {
        Ok(())
    } else {
        Err(Error::Domain(format!("component index must be 0..=3, got {j}")))
    }
}

// ==========================================================================
// Points
// ==========================================================================

/// z = base + offset with an exact rational base.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub base: Rational64,
    pub offset: Complex64,
}

impl Point {
    pub fn new(base: Rational64, offset: Complex64) -> Self {
        Point { base, offset }
    }

    /// x + it.
    pub fn vertical(x: Rational64, t: f64) -> Self {
        Point { base: x, offset: Complex64::new(0.0, t) }
    }

    pub fn value(&self) -> Complex64 {
        self.offset + r64(self.base)
    }

    pub fn re(&self) -> f64 {
        r64(self.base) + self.offset.re
    }

    pub fn im(&self) -> f64 {
        self.offset.im
    }

    pub fn shifted(&self, dz: Complex64) -> Point {
        Point { base: self.base, offset: self.offset + dz }
    }

    /// True when the point lies exactly on the vertical line above its base.
    pub fn is_vertical(&self) -> bool {
        self.offset.re == 0.0
    }

    /// z − x as a complex number, with the rational part subtracted exactly.
    pub fn minus(&self, x: Rational64) -> Result<Complex64, Error> {
        let diff = checked_sub(self.base, x)?;
        Ok(self.offset + r64(diff))
    }

    /// M·z, keeping the base exact: M z = M β + δ/((cβ+d)(cβ+d+cδ)), or, if
    /// cβ + d = 0, a/c − 1/(c²δ).
    pub fn act(&self, m: &Gamma02Element) -> Result<Point, Error> {
        let (p, q) = (*self.base.numer() as i128, *self.base.denom() as i128);
        let (a, b, c, d) = (m.a as i128, m.b as i128, m.c as i128, m.d as i128);
        let e_num = c * p + d * q;
        if e_num == 0 {
            if self.offset == ZERO {
                return Err(Error::Domain(format!("{} is the pole of {m}", self.base)));
            }
            let base = rat(a, c)?;
            let cf = m.c as f64;
            return Ok(Point { base, offset: -1.0 / (self.offset * cf * cf) });
        }
        let base = rat(a * p + b * q, e_num)?;
        let e = e_num as f64 / q as f64;
        let offset = self.offset / (e * (self.offset * m.c as f64 + e));
        Ok(Point { base, offset })
    }
}

impl From<Complex64> for Point {
    fn from(z: Complex64) -> Self {
        Point { base: Rational64::zero(), offset: z }
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.base.is_zero() {
            write!(f, "{}", self.offset)
        } else {
            write!(f, "{} + ({})", self.base, self.offset)
        }
    }
}

fn r64(x: Rational64) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn rat(num: i128, den: i128) -> Result<Rational64, Error> {
    let g = num.gcd(&den).max(1);
    let (mut n, mut d) = (num / g, den / g);
    if d < 0 {
        n = -n;
        d = -d;
    }
    match (i64::try_from(n), i64::try_from(d)) {
        (Ok(n), Ok(d)) if d != 0 => Ok(Rational64::new_raw(n, d)),
        _ => Err(Error::Resource(format!("rational {num}/{den} exceeds 64-bit range"))),
    }
}

fn checked_sub(x: Rational64, y: Rational64) -> Result<Rational64, Error> {
    let (a, b) = (*x.numer() as i128, *x.denom() as i128);
    let (c, d) = (*y.numer() as i128, *y.denom() as i128);
    rat(a * d - c * b, b * d)
}

// ==========================================================================
// Evaluating U anywhere on ℍ
// ==========================================================================

/// U, ∂U and their parts without the constant term c_j√y of the expansion at ∞.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaassValues {
    pub u: [Complex64; 4],
    pub du: [Complex64; 4],
    /// U_j − c_j√y.
    pub u_bessel: [Complex64; 4],
    /// ∂U_j − ∂(c_j√y) = ∂U_j + i c_j/(4√y).
    pub du_bessel: [Complex64; 4],
}

/// Evaluates all four components of a family's Maass form at any point of ℍ.
#[derive(Clone, Debug)]
pub struct MaassEvaluator {
    spec: FamilySpec,
    at_infinity: Vec<FourierExpansion>,
    at_zero: Vec<FourierExpansion>,
    min_exponent: f64,
}

impl MaassEvaluator {
    pub fn new(spec: &FamilySpec) -> Result<Self, Error> {
        let bound = EVALUATOR_EXPONENT_BOUND;
        let mut at_infinity = Vec::with_capacity(4);
        for j in 0..4 {
            at_infinity.push(theta::fourier_table(spec, j, bound)?.expansion());
        }
        let form = spec.form;
        let disc = form.discriminant();
        let mut acc: Vec<BTreeMap<i64, Complex64>> = vec![BTreeMap::new(); 4];
        let mut constants = [ZERO; 4];
        for nu in form.discriminant_group() {
            let mut coeff = [ZERO; 4];
            for (j, c) in coeff.iter_mut().enumerate() {
                let [a, b] = spec.component_cosets(j);
                *c = modular::weil_psi(&form, &Sl2z::S, &a, &nu)? + modular::weil_psi(&form, &Sl2z::S, &b, &nu)?;
            }
            if coeff.iter().all(|c| c.norm() < 1e-15) {
                continue;
            }
            let sums = theta::coset_weight_sums(&form, &spec.cones, &nu, bound)?;
            for j in 0..4 {
                if nu.is_zero() {
                    constants[j] += coeff[j] * spec.cone_length();
                }
                for (&k, &w) in &sums {
                    *acc[j].entry(k).or_insert(ZERO) += coeff[j] * (0.5 * w as f64);
                }
            }
        }
        let at_zero = acc
            .into_iter()
            .zip(constants)
            .map(|(m, c)| {
                let terms = m.into_iter().filter(|(_, d)| d.norm() > 1e-14).map(|(k, d)| (k as f64 / disc as f64, d)).collect();
                FourierExpansion::new(c, terms)
            })
            .collect();
        let min_exponent = at_infinity
            .iter()
            .filter_map(|e| e.min_exponent())
            .fold(f64::INFINITY, f64::min);
        if !min_exponent.is_finite() {
            return Err(Error::Internal(format!("family {} has an empty expansion", spec.family)));
        }
        Ok(MaassEvaluator { spec: spec.clone(), at_infinity, at_zero, min_exponent })
    }

    /// Shared evaluator per family, built on first use.
    pub fn for_family(family: Family) -> Result<&'static MaassEvaluator, Error> {
        static CELLS: [OnceLock<MaassEvaluator>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
        let cell = &CELLS[family as usize];
        if let Some(e) = cell.get() {
            return Ok(e);
        }
        let built = MaassEvaluator::new(&family.spec())?;
        let _ = cell.set(built);
        cell.get().ok_or_else(|| Error::Internal("evaluator cache".into()))
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    /// Smallest |e| in the expansions at ∞: the Bessel parts decay at least
    /// like e^{−2π·min_exponent·y}.
    pub fn min_exponent(&self) -> f64 {
        self.min_exponent
    }

    /// Expansion of U_j(S·w) in w.
    pub fn cusp_zero_expansion(&self, j: usize) -> &FourierExpansion {
        &self.at_zero[j]
    }

    pub fn eval(&self, z: &Point) -> Result<MaassValues, Error> {
        let y = z.im();
        if !(y > 0.0) || !z.offset.re.is_finite() {
            return Err(Error::Domain(format!("point {z} is not in the upper half-plane")));
        }
        let c = self.spec.const_terms;
        let sy = y.sqrt();
        if y >= DIRECT_EVAL_IM {
            let x = z.re();
            let mut out = MaassValues { u: [ZERO; 4], du: [ZERO; 4], u_bessel: [ZERO; 4], du_bessel: [ZERO; 4] };
            for j in 0..4 {
                let (v, dv) = self.at_infinity[j].value_and_dz(x, y, false);
                out.u_bessel[j] = v;
                out.du_bessel[j] = dv;
                out.u[j] = v + c[j] * sy;
                out.du[j] = dv + Complex64::new(0.0, -0.25 * c[j] / sy);
            }
            return Ok(out);
        }
        let a = reduce(z.value())?;
        // z₀ = A⁻¹z with A⁻¹ = [[d, −b], [−c, a]] and the base handled exactly
        let (p, q) = (*z.base.numer() as i128, *z.base.denom() as i128);
        let (aa, bb, cc, dd) = (a.a as i128, a.b as i128, a.c as i128, a.d as i128);
        let qf = q as f64;
        let num = Complex64::new((dd * p - bb * q) as f64 / qf, 0.0) + z.offset * a.d as f64;
        let den = Complex64::new((aa * q - cc * p) as f64 / qf, 0.0) - z.offset * a.c as f64;
        let z0 = num / den;
        let jac = 1.0 / (den * den);
        if !(z0.im >= DIRECT_EVAL_IM) {
            return Err(Error::NoCuspAnchor(format!(
                "reduction of {z} lost accuracy (Im z₀ = {}); the point is too close to the real line",
                z0.im
            )));
        }
        let (m, table, w) = if a.c % 2 == 0 {
            (Gamma02Element::new(a.a, a.b, a.c, a.d)?, &self.at_infinity, z0)
        } else if a.d % 2 == 0 {
            (Gamma02Element::new(-a.b, a.a, -a.d, a.c)?, &self.at_zero, z0)
        } else {
            (Gamma02Element::new(a.a - a.b, a.a, a.c - a.d, a.c)?, &self.at_zero, z0 + 1.0)
        };
        let psi = modular::multiplier(self.spec.family, &m)?;
        let mut v = [ZERO; 4];
        let mut dv = [ZERO; 4];
        for j in 0..4 {
            let (val, d) = table[j].value_and_dz(w.re, w.im, true);
            v[j] = val;
            dv[j] = d * jac;
        }
        let u = psi.apply(&v);
        let du = psi.apply(&dv);
        let mut u_bessel = [ZERO; 4];
        let mut du_bessel = [ZERO; 4];
        for j in 0..4 {
            u_bessel[j] = u[j] - c[j] * sy;
            du_bessel[j] = du[j] + Complex64::new(0.0, 0.25 * c[j] / sy);
        }
        Ok(MaassValues { u, du, u_bessel, du_bessel })
    }
}

/// A ∈ SL₂(ℤ) with A⁻¹z in the standard fundamental domain.
fn reduce(z: Complex64) -> Result<Sl2z, Error> {
    let s_inv = Sl2z { a: 0, b: 1, c: -1, d: 0 };
    let mut acc = Sl2z::IDENTITY;
    let mut w = z;
    for _ in 0..100_000 {
        let n = w.re.round();
        if n != 0.0 {
            w.re -= n;
            let t = Sl2z { a: 1, b: n as i64, c: 0, d: 1 };
            acc = acc.mul(&t)?;
        }
        if w.norm_sqr() < 1.0 - 1e-12 {
            w = -1.0 / w;
            acc = acc.mul(&s_inv)?;
        } else {
            return Ok(acc);
        }
    }
    Err(Error::NoCuspAnchor(format!("reduction of {z} did not terminate")))
}

// ==========================================================================
// Results
// ==========================================================================

/// How a value of u_j was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// −c_j/π + Σ_{e>0} d_j(e) qᵉ.
    DirectQseries,
    /// The v-integral of U and ∂U against the explicit kernels.
    SplitIntegral,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::DirectQseries => "direct_qseries",
            Route::SplitIntegral => "split_integral",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodValue {
    pub value: Complex64,
    pub route: Route,
    pub error_estimate: f64,
}

/// All four components of u at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeriodVector {
    pub values: [Complex64; 4],
    pub route: Route,
    pub error_estimate: f64,
}

impl PeriodVector {
    pub fn component(&self, j: usize) -> PeriodValue {
        PeriodValue { value: self.values[j], route: self.route, error_estimate: self.error_estimate }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObstructionValue {
    pub rho: CuspRational,
    pub arg: Point,
    pub value: Complex64,
    pub error_estimate: f64,
}

/// All four components of 𝒰_{·,ρ}(arg).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObstructionVector {
    pub rho: CuspRational,
    pub arg: Point,
    pub values: [Complex64; 4],
    pub error_estimate: f64,
}

/// 𝔲_j(x) for all j with the growth constants γ_{j,x}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantumVector {
    pub x: CuspRational,
    pub values: [Complex64; 4],
    pub gammas: [Complex64; 4],
    pub error_estimate: f64,
}

// ==========================================================================
// Quadrature plumbing
// ==========================================================================

/// Runs a quadrature over a fallible integrand; the first failure wins.
fn integrate<F, Q>(f: F, run: Q) -> Result<(V4, f64), Error>
where
    F: Fn(f64) -> Result<V4, Error>,
    Q: FnOnce(&dyn Fn(f64) -> V4) -> Result<crate::QuadratureResult<V4>, Error>,
{
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let g = |v: f64| match f(v) {
        Ok(x) => x,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            V4::zero()
        }
    };
    let r = run(&g);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let r = r?;
    Ok((r.value, r.error_estimate))
}

/// ∫_a^b with geometric panels [a·2^k, a·2^{k+1}] (a > 0), so integrands
/// varying on the scale of v itself are resolved evenly.
fn integrate_geometric<F>(f: &F, a: f64, b: f64, tol: &Tolerance) -> Result<(V4, f64), Error>
where
    F: Fn(f64) -> Result<V4, Error>,
{
    let mut total = V4::zero();
    let mut err = 0.0;
    let mut lo = a;
    while lo < b {
        let hi = (2.0 * lo).min(b);
        let hi = if b / hi < 1.05 { b } else { hi };
        let (v, e) = integrate(f, |g| quad_interval(&g, lo, hi, tol))?;
        total = total + v;
        err += e;
        lo = hi;
    }
    Ok((total, err))
}

/// Splits a tolerance over `pieces` integrals and tightens it for cusps with
/// denominator c, never below min(requested, 1e-14) where Gauss–Kronrod error
/// estimates are dominated by rounding.
fn piece_tolerance(tol: &Tolerance, pieces: f64, c: f64) -> Tolerance {
    let factor = 1.0 / (pieces * (c * c / 4.0).max(1.0));
    let floor = |x: f64| (x * factor).max(x.min(1e-14));
    Tolerance { abs_tol: floor(tol.abs_tol), rel_tol: floor(tol.rel_tol), ..*tol }
}

fn apply(psi: &MultiplierMatrix, v: [Complex64; 4]) -> [Complex64; 4] {
    psi.apply(&v)
}

fn const_vector(spec: &FamilySpec) -> [Complex64; 4] {
    spec.const_terms.map(|c| Complex64::new(c, 0.0))
}

// ==========================================================================
// u_j
// ==========================================================================

/// u_j(τ) with automatic route choice.
pub fn u_value(family: Family, j: usize, tau: impl Into<Point>, tol: &Tolerance) -> Result<PeriodValue, Error> {
    check_component(j)?;
    Ok(u_vector(family, &tau.into(), None, tol)?.component(j))
}

/// u(τ) for all components. `route` forces a route; otherwise the direct
/// q-series is used for τ₂ ≥ 0.05 and the split integral below.
pub fn u_vector(family: Family, tau: &Point, route: Option<Route>, tol: &Tolerance) -> Result<PeriodVector, Error> {
    let y = tau.im();
    if !(y > 0.0) {
        return Err(Error::Domain(format!("u is defined on ℍ only, got {tau}")));
    }
    let route = route.unwrap_or(if y >= DIRECT_ROUTE_TAU2 { Route::DirectQseries } else { Route::SplitIntegral });
    match route {
        Route::DirectQseries => u_direct(&family.spec(), tau, tol),
        Route::SplitIntegral => {
            let ev = MaassEvaluator::for_family(family)?;
            if tau.is_vertical() && tau.base.denom() % 2 == 0 {
                let x = modular::cusp_matrix(tau.base)?;
                let (regular, gamma, err) = vertical_parts(ev, &x, y, tol)?;
                let grow = 1.0 / (PI * y * (1.0 + 2.0 * y).sqrt());
                let values = std::array::from_fn(|j| regular[j] + gamma[j] * grow);
                Ok(PeriodVector { values, route, error_estimate: err })
            } else {
                u_split_general(ev, tau, tol)
            }
        }
    }
}

/// u(x + it) − γ_x/(πt) for t > 0, with the growing part removed analytically.
pub fn u_minus_growth(family: Family, x: &CuspRational, t: f64, tol: &Tolerance) -> Result<PeriodVector, Error> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let ev = MaassEvaluator::for_family(family)?;
    let (regular, gamma, err) = vertical_parts(ev, x, t, tol)?;
    // 1/(t√(1+2t)) − 1/t = −2/(√(1+2t)(1 + √(1+2t)))
    let s = (1.0 + 2.0 * t).sqrt();
    let shift = -2.0 / (PI * s * (1.0 + s));
    let values = std::array::from_fn(|j| regular[j] + gamma[j] * shift);
    Ok(PeriodVector { values, route: Route::SplitIntegral, error_estimate: err })
}

/// Σ_{e>0} d_j(e)·e^{2πieτ} − c_j/π, truncated where e^{−2πeτ₂} < ε·e^{−40}.
fn u_direct(spec: &FamilySpec, tau: &Point, tol: &Tolerance) -> Result<PeriodVector, Error> {
    let y = tau.im();
    let bound = theta::bessel_exponent_bound(y, tol).max(1.0);
    let mut values = [ZERO; 4];
    let mut err: f64 = 0.0;
    for (j, out) in values.iter_mut().enumerate() {
        let table = theta::fourier_table(spec, j, bound)?;
        let mut sum = crate::kernel::ComplexSum::new();
        for (e, d) in &table.terms {
            if *e <= Rational64::zero() {
                continue;
            }
            // e·β reduced exactly mod 1, then the floating offset
            let eb = *e * tau.base;
            let frac = eb - eb.floor();
            let ef = r64(*e);
            let phase = 2.0 * PI * (r64(frac) + (ef * tau.offset.re).rem_euclid(1.0));
            let term = Complex64::from_polar(r64(*d) * (-2.0 * PI * ef * y).exp(), phase);
            sum.add(term);
        }
        *out = sum.value() - spec.const_terms[j] / PI;
        err = err.max(1e-16 * (1.0 + out.norm()));
    }
    err += (-theta::TRUNCATION_MARGIN).exp() * tol.abs_tol;
    Ok(PeriodVector { values, route: Route::DirectQseries, error_estimate: err })
}

/// Kernels of the explicit v-integral at height τ₂ = y:
/// k₁ = √(v+y)/(√v√(v+2y)), k₂ = √v/(√(v+y)(v+2y)^{3/2}).
fn u_kernels(v: f64, y: f64) -> (f64, f64) {
    let k1 = (v + y).sqrt() / (v.sqrt() * (v + 2.0 * y).sqrt());
    let k2 = v.sqrt() / ((v + y).sqrt() * (v + 2.0 * y).powf(1.5));
    (k1, k2)
}

/// (1/2π)[−4i∂Uᵇ(z)k₁ + Uᵇ(z)k₂] for all components.
fn u_integrand(m: &MaassValues, k1: f64, k2: f64) -> V4 {
    let four_i = Complex64::new(0.0, 4.0);
    CVec(std::array::from_fn(|j| (-four_i * m.du_bessel[j] * k1 + m.u_bessel[j] * k2) / (2.0 * PI)))
}

/// Tail ∫_L^∞ of the u-integrand along τ + iv, using the exponential decay of
/// the Bessel parts.
fn u_tail(ev: &MaassEvaluator, tau: &Point, y: f64, from: f64, tol: &Tolerance) -> Result<(V4, f64), Error> {
    let f = |v: f64| -> Result<V4, Error> {
        let m = ev.eval(&tau.shifted(Complex64::new(0.0, v)))?;
        let (k1, k2) = u_kernels(v, y);
        Ok(u_integrand(&m, k1, k2))
    };
    let rate = 2.0 * PI * ev.min_exponent();
    integrate(f, |g| quad_exp_tail(g, rate, from, tol))
}

/// u(τ) = −c/π + ∫₀^∞ of the Bessel parts, the constant part having been
/// integrated in closed form.
fn u_split_general(ev: &MaassEvaluator, tau: &Point, tol: &Tolerance) -> Result<PeriodVector, Error> {
    let y = tau.im();
    if y < SPLIT_ROUTE_TAU2_MIN {
        return Err(Error::NoCuspAnchor(format!(
            "Im τ = {y:e} is below {SPLIT_ROUTE_TAU2_MIN:e} and τ is not on a vertical line above an \
             even-denominator rational; give τ as x + it with x ∈ 𝒬 or use quantum_value"
        )));
    }
    let f = |v: f64| -> Result<V4, Error> {
        let m = ev.eval(&tau.shifted(Complex64::new(0.0, v)))?;
        let (k1, k2) = u_kernels(v, y);
        Ok(u_integrand(&m, k1, k2))
    };
    let part = piece_tolerance(tol, 4.0, 1.0);
    let first = y.min(1.0);
    let (mut total, mut err) =
        integrate(&f, |g| quad_finite_between(g, EndpointSingularity::InverseSqrtAt0, 0.0, first, &part))?;
    let top = y.max(1.0);
    if first < top {
        let (v, e) = integrate_geometric(&f, first, top, &part)?;
        total = total + v;
        err += e;
    }
    let (v, e) = u_tail(ev, tau, y, top, &part)?;
    total = total + v;
    err += e;
    let c = ev.spec().const_terms;
    let values = std::array::from_fn(|j| total.0[j] - c[j] / PI);
    Ok(PeriodVector { values, route: Route::SplitIntegral, error_estimate: err })
}

/// Pieces of u(x + it) for t ≥ 0 at a cusp x = −d/c, M = M_x:
/// returns (regular part, γ, error) with
/// u(x + it) = regular + γ/(πt√(1+2t)) and 𝔲(x) = regular(t = 0) − γ/π.
///
/// regular = ∫₁^∞ (Bessel parts along x + i(v+t)) − (c/π)(1 − 1/√(1+2t))
///         + (1/2πc²)·Ψ_{M⁻¹}∫₀¹ 4i∂Uᵇ(Mz)/(√v√(v+2t)(v+t)^{3/2}) dv
///         + (1/2π)·Ψ_{M⁻¹}∫₀¹ Uᵇ(Mz)·√v/(√(v+t)(v+2t)^{3/2}) dv,
/// with Mz = a/c + i/(c²(v+t)).
fn vertical_parts(
    ev: &MaassEvaluator,
    x: &CuspRational,
    t: f64,
    tol: &Tolerance,
) -> Result<([Complex64; 4], [Complex64; 4], f64), Error> {
    let spec = ev.spec();
    let m = x.matrix;
    let psi_inv = modular::multiplier(spec.family, &m.inverse())?;
    let cf = m.c as f64;
    let gamma = apply(&psi_inv, const_vector(spec)).map(|g| g / cf.abs());
    let a_over_c = rat(m.a as i128, m.c as i128)?;
    let part = piece_tolerance(tol, 4.0, cf);

    // [1, ∞) along x + i(v + t)
    let tau = Point::vertical(x.x, t);
    let (tail, e_tail) = u_tail(ev, &tau, t, 1.0, &part)?;

    // [0, 1] through M
    let inner = |v: f64| -> Result<V4, Error> {
        let s = v + t;
        let mz = Point::vertical(a_over_c, 1.0 / (cf * cf * s));
        let vals = ev.eval(&mz)?;
        let k1 = 1.0 / (v.sqrt() * (v + 2.0 * t).sqrt() * s.powf(1.5)) / (cf * cf);
        let k2 = v.sqrt() / (s.sqrt() * (v + 2.0 * t).powf(1.5));
        let four_i = Complex64::new(0.0, 4.0);
        let w: [Complex64; 4] = std::array::from_fn(|k| (four_i * vals.du_bessel[k] * k1 + vals.u_bessel[k] * k2) / (2.0 * PI));
        Ok(CVec(psi_inv.apply(&w)))
    };
    let (mut body, mut e_body) = if t > 0.0 && t < 1.0 {
        let (v0, e0) = integrate(&inner, |g| quad_finite_between(g, EndpointSingularity::InverseSqrtAt0, 0.0, t, &part))?;
        let (v1, e1) = integrate_geometric(&inner, t, 1.0, &part)?;
        (v0 + v1, e0 + e1)
    } else {
        integrate(&inner, |g| quad_finite_between(g, EndpointSingularity::InverseSqrtAt0, 0.0, 1.0, &part))?
    };
    body = body + tail;
    e_body += e_tail;
    let c = spec.const_terms;
    let const_tail = 1.0 - 1.0 / (1.0 + 2.0 * t).sqrt();
    let regular = std::array::from_fn(|j| body.0[j] - c[j] / PI * const_tail);
    Ok((regular, gamma, e_body))
}

// ==========================================================================
// Quantum values
// ==========================================================================

/// 𝔲_j(x) = lim (u_j(x + it) − γ_{j,x}/(πt)), evaluated at t = 0 exactly.
pub fn quantum_vector(family: Family, x: &CuspRational, tol: &Tolerance) -> Result<QuantumVector, Error> {
    let ev = MaassEvaluator::for_family(family)?;
    let (regular, gammas, err) = vertical_parts(ev, x, 0.0, tol)?;
    let values = std::array::from_fn(|j| regular[j] - gammas[j] / PI);
    Ok(QuantumVector { x: *x, values, gammas, error_estimate: err })
}

/// (𝔲_j(x), γ_{j,x}).
pub fn quantum_value(family: Family, j: usize, x: &CuspRational, tol: &Tolerance) -> Result<(Complex64, Complex64), Error> {
    check_component(j)?;
    let q = quantum_vector(family, x, tol)?;
    Ok((q.values[j], q.gammas[j]))
}

// ==========================================================================
// Obstructions
// ==========================================================================

/// Default split point of the obstruction integral.
pub const OBSTRUCTION_SPLIT: f64 = 1.0;

pub fn obstruction_value(
    family: Family,
    j: usize,
    rho: &CuspRational,
    arg: impl Into<Point>,
    tol: &Tolerance,
) -> Result<ObstructionValue, Error> {
    check_component(j)?;
    let o = obstruction_vector(family, rho, &arg.into(), OBSTRUCTION_SPLIT, tol)?;
    Ok(ObstructionValue { rho: o.rho, arg: o.arg, value: o.values[j], error_estimate: o.error_estimate })
}

/// 𝒰_{·,ρ}(τ) split at t = T, with w = τ − ρ, r(t) = (t + iw)/(t − iw) and
/// the measure dt/(√t√(t² + w²)):
///
/// (1/2π)∫_T^∞ (4it∂U(ρ+it) − r·U(ρ+it))
/// − (1/2π)·Ψ_{M⁻¹}∫₀^T ((4i/c²t)∂U(a/c + i/c²t) + r·U(a/c + i/c²t)).
///
/// In both pieces the constant terms combine to c√t·(−2iw)/(t − iw) and
/// (c/|c|√t)·2t/(t − iw) respectively, evaluated in that form.
pub fn obstruction_vector(
    family: Family,
    rho: &CuspRational,
    arg: &Point,
    split: f64,
    tol: &Tolerance,
) -> Result<ObstructionVector, Error> {
    if !(split > 0.0) || !split.is_finite() {
        return Err(Error::Domain(format!("split point must be positive, got {split}")));
    }
    if arg.im() < 0.0 {
        return Err(Error::Domain(format!("obstruction argument {arg} must satisfy Im ≥ 0")));
    }
    let w = arg.minus(rho.x)?;
    let on_cut = if arg.base == rho.x { arg.offset.re == 0.0 } else { w.re.abs() < SIGN_GUARD };
    if on_cut {
        return Err(Error::Domain(format!("argument {arg} lies on the cut Re = {} of 𝒰_ρ", rho.x)));
    }
    let ev = MaassEvaluator::for_family(family)?;
    let spec = ev.spec();
    let c = spec.const_terms;
    let m = rho.matrix;
    let cf = m.c as f64;
    let psi_inv = modular::multiplier(family, &m.inverse())?;
    let a_over_c = rat(m.a as i128, m.c as i128)?;
    let iw = Complex64::i() * w;
    let four_i = Complex64::new(0.0, 4.0);
    let measure = |t: f64| 1.0 / (t.sqrt() * (t * t + w * w).sqrt());
    let part = piece_tolerance(tol, 2.0, cf);

    // [T, ∞) with t = T/s
    let upper = |s: f64| -> Result<V4, Error> {
        let t = split / s;
        let vals = ev.eval(&Point::vertical(rho.x, t))?;
        let r = (t + iw) / (t - iw);
        let k = measure(t) * (split / (s * s));
        let cst = -2.0 * iw / (t - iw) * t.sqrt();
        let v: [Complex64; 4] = std::array::from_fn(|j| {
            ((four_i * t * vals.du_bessel[j] - r * vals.u_bessel[j]) + cst * c[j]) * k / (2.0 * PI)
        });
        Ok(CVec(v))
    };
    let (hi, e_hi) = integrate(upper, |g| quad_interval(&g, 0.0, 1.0, &part))?;

    // (0, T] through M
    let lower = |t: f64| -> Result<V4, Error> {
        let vals = ev.eval(&Point::vertical(a_over_c, 1.0 / (cf * cf * t)))?;
        let r = (t + iw) / (t - iw);
        let k = measure(t);
        let cst = 2.0 * t.sqrt() / (cf.abs() * (t - iw));
        let v: [Complex64; 4] = std::array::from_fn(|j| {
            ((four_i / (cf * cf * t)) * vals.du_bessel[j] + r * vals.u_bessel[j] + cst * c[j]) * k / (2.0 * PI)
        });
        Ok(CVec(psi_inv.apply(&v)))
    };
    let (lo, e_lo) = integrate(lower, |g| quad_interval(&g, 0.0, split, &part))?;
    let values = std::array::from_fn(|j| hi.0[j] - lo.0[j]);
    Ok(ObstructionVector { rho: *rho, arg: *arg, values, error_estimate: e_hi + e_lo })
}

// ==========================================================================
// Transformation checks
// ==========================================================================

/// sgn(cτ₁ + d)·(cτ + d), exact when τ₁ is rational.
fn automorphy_factor(m: &Gamma02Element, tau: &Point) -> Result<Complex64, Error> {
    let (p, q) = (*tau.base.numer() as i128, *tau.base.denom() as i128);
    let e = ((m.c as i128) * p + (m.d as i128) * q) as f64 / q as f64;
    let factor = tau.offset * m.c as f64 + e;
    let sign = if tau.offset.re == 0.0 {
        if e == 0.0 {
            return Err(Error::Domain(format!("τ₁ = {} is the pole of {m}", tau.base)));
        }
        e.signum()
    } else {
        let s = factor.re;
        if s.abs() < SIGN_GUARD {
            return Err(Error::Domain(format!("τ₁ of {tau} is within {SIGN_GUARD:e} of the pole of {m}")));
        }
        s.signum()
    };
    Ok(factor * sign)
}

/// max_j |u_j(Mτ) − sgn(cτ₁+d)(cτ+d)·Σ_k Ψ_M(j,k)(u_k(τ) + 𝒰_{k,−d/c}(τ))|,
/// each side computed independently.
pub fn verify_modular(family: Family, m: &Gamma02Element, tau: &Point, tol: &Tolerance) -> Result<f64, Error> {
    let lhs = u_vector(family, &tau.act(m)?, None, tol)?.values;
    let u = u_vector(family, tau, None, tol)?.values;
    let psi = modular::multiplier(family, m)?;
    let factor = automorphy_factor(m, tau)?;
    let mut inner = u;
    if m.c != 0 {
        let rho = modular::cusp_matrix(Rational64::new(-m.d, m.c))?;
        let o = obstruction_vector(family, &rho, tau, OBSTRUCTION_SPLIT, tol)?;
        for k in 0..4 {
            inner[k] += o.values[k];
        }
    }
    let rhs = psi.apply(&inner).map(|z| z * factor);
    Ok((0..4).map(|j| (lhs[j] - rhs[j]).norm()).fold(0.0, f64::max))
}

/// max_j |𝔲_j(Mx) − |cx+d|·Σ_k Ψ_M(j,k)(𝔲_k(x) + 𝒰_{k,−d/c}(x))|.
pub fn verify_quantum(family: Family, m: &Gamma02Element, x: &CuspRational, tol: &Tolerance) -> Result<f64, Error> {
    let mx = m
        .sl2z()
        .act_rational(x.x)
        .ok_or_else(|| Error::Domain(format!("{} is the pole of {m}", x.x)))?;
    let lhs = quantum_vector(family, &modular::cusp_matrix(mx)?, tol)?.values;
    let mut inner = quantum_vector(family, x, tol)?.values;
    if m.c != 0 {
        let rho = modular::cusp_matrix(Rational64::new(-m.d, m.c))?;
        let o = obstruction_vector(family, &rho, &Point::new(x.x, ZERO), OBSTRUCTION_SPLIT, tol)?;
        for k in 0..4 {
            inner[k] += o.values[k];
        }
    }
    let scale = r64(x.x * m.c + m.d).abs();
    let rhs = modular::multiplier(family, m)?.apply(&inner).map(|z| z * scale);
    Ok((0..4).map(|j| (lhs[j] - rhs[j]).norm()).fold(0.0, f64::max))
}

/// Polynomial extrapolation of (tᵢ, fᵢ) to t = 0 (Neville).
pub fn extrapolate_to_zero(ts: &[f64], values: &[Complex64]) -> Result<Complex64, Error> {
    if ts.is_empty() || ts.len() != values.len() {
        return Err(Error::Domain("extrapolation needs matching, nonempty samples".into()));
    }
    let mut p = values.to_vec();
    let n = ts.len();
    for m in 1..n {
        for i in 0..n - m {
            let (a, b) = (ts[i], ts[i + m]);
            if a == b {
                return Err(Error::Domain(format!("repeated sample t = {a}")));
            }
            p[i] = (p[i] * (-b) + p[i + 1] * a) / (a - b);
        }
    }
    Ok(p[0])
}

/// Default t-samples for [`path_deformation_check`]: small enough that the
/// parabola's higher-order corrections are below the extrapolation error.
pub const DEFAULT_PATH_SEQUENCE: [f64; 5] = [4e-4, 2e-4, 1e-4, 5e-5, 2.5e-5];

/// Limit of u_j(x + it + Bt²) − γ/(πt) along the parabola, extrapolated from
/// `t_sequence`, compared against 𝔲_j(x) + iBγ/π.
pub fn path_deformation_check(
    family: Family,
    j: usize,
    x: &CuspRational,
    b: f64,
    t_sequence: &[f64],
    tol: &Tolerance,
) -> Result<f64, Error> {
    check_component(j)?;
    if t_sequence.is_empty() || t_sequence.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Domain("t_sequence must contain positive values".into()));
    }
    if t_sequence.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("t_sequence must be strictly decreasing".into()));
    }
    let (frak, gamma) = quantum_value(family, j, x, tol)?;
    let mut vals = Vec::with_capacity(t_sequence.len());
    for &t in t_sequence {
        let p = Point::new(x.x, Complex64::new(b * t * t, t));
        let u = if b == 0.0 {
            u_minus_growth(family, x, t, tol)?.values[j]
        } else {
            u_vector(family, &p, Some(Route::SplitIntegral), tol)?.values[j] - gamma / (PI * t)
        };
        vals.push(u);
    }
    let limit = extrapolate_to_zero(t_sequence, &vals)?;
    let want = frak + Complex64::i() * gamma * (b / PI);
    Ok((limit - want).norm())
}
