//! Published reference values for family G near the cusp 11/12, and the
//! routines that recompute them.
//!
//! The numbers live in `data/reference_values.json`; nothing here hard-codes
//! a published digit.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use num_complex::Complex64;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::modular::{self, Gamma02Element};
use crate::period::{self, Point};
use crate::theta::Family;
use crate::{Error, Tolerance};

const RAW: &str = include_str!("../data/reference_values.json");

/// Complex number stored as `[re, im]`.
pub type Pair = [f64; 2];

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NearCuspRow {
    /// τ = 11/12 + i·10^{−k}.
    pub k: u32,
    pub g: [Pair; 4],
    pub g_r: [Pair; 4],
    pub obstruction: [Pair; 4],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NearCusp {
    pub source: String,
    pub tolerance: f64,
    pub rows: Vec<NearCuspRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubtractedRow {
    pub k: u32,
    pub value: Pair,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Subtracted {
    pub source: String,
    pub tolerance: f64,
    pub rows: Vec<SubtractedRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Quantum {
    pub source: String,
    pub tolerance: f64,
    pub at_11_12: [Pair; 4],
    pub at_11_34: [Pair; 4],
    pub obstruction_at_11_12: [Pair; 4],
}

/// Decimal strings, kept verbatim because they exceed binary64 precision.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HighPrecision {
    pub source: String,
    pub re: String,
    pub im: String,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaValue {
    pub source: String,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReferenceSet {
    pub version: u32,
    pub description: String,
    pub near_cusp: NearCusp,
    pub subtracted: Subtracted,
    pub quantum: Quantum,
    pub high_precision: HighPrecision,
    pub gamma: GammaValue,
}

/// The embedded reference set, parsed once.
pub fn published() -> &'static ReferenceSet {
    static SET: OnceLock<ReferenceSet> = OnceLock::new();
    SET.get_or_init(|| serde_json::from_str(RAW).expect("embedded reference data is valid JSON"))
}

fn c(p: Pair) -> Complex64 {
    Complex64::new(p[0], p[1])
}

/// The cusp all reference values are anchored at.
pub fn anchor() -> Rational64 {
    Rational64::new(11, 12)
}

/// 11/12 + i·10^{−k}, with the real part kept exact.
pub fn near_cusp_point(k: u32) -> Point {
    Point::vertical(anchor(), 10f64.powi(-(k as i32)))
}

/// R = [[1, 0], [2, 1]], so Rτ = τ/(2τ + 1).
pub fn r_matrix() -> Gamma02Element {
    Gamma02Element::new(1, 0, 2, 1).expect("R has determinant 1")
}

/// One recomputed reference cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellCheck {
    pub group: String,
    pub cell: String,
    pub computed: Pair,
    pub published: Pair,
    pub difference: f64,
    pub tolerance: f64,
}

impl CellCheck {
    fn new(group: &str, cell: String, computed: Complex64, published: Complex64, tolerance: f64) -> Self {
        CellCheck {
            group: group.to_string(),
            cell,
            computed: [computed.re, computed.im],
            published: [published.re, published.im],
            difference: (computed - published).norm(),
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.difference < self.tolerance
    }
}

impl fmt::Display for CellCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: computed {:+.12e} {:+.12e}i, published {:+.12e} {:+.12e}i, |Δ| = {:.3e} ({})",
            self.group,
            self.cell,
            self.computed[0],
            self.computed[1],
            self.published[0],
            self.published[1],
            self.difference,
            if self.passed() { "pass" } else { "FAIL" }
        )
    }
}

/// Independent units of work; each recomputes a block of cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Group {
    /// u(τ), u(Rτ) and 𝒰_{·,−1/2}(τ) at τ = 11/12 + i·10^{−k}.
    NearCusp(u32),
    /// u_0(τ) − γ/(πτ₂) at the same points.
    Subtracted(u32),
    /// 𝔲(11/12), 𝔲(11/34) and 𝒰_{·,−1/2}(11/12).
    Quantum,
    /// 𝔲_0(11/12) against the 19-digit value.
    HighPrecision,
    /// γ_{0,11/12}.
    Gamma,
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::NearCusp(k) => write!(f, "near_cusp[k={k}]"),
            Group::Subtracted(k) => write!(f, "subtracted[k={k}]"),
            Group::Quantum => f.write_str("quantum"),
            Group::HighPrecision => f.write_str("high_precision"),
            Group::Gamma => f.write_str("gamma"),
        }
    }
}

/// Every group, in report order.
pub fn groups() -> Vec<Group> {
    let set = published();
    let mut out: Vec<Group> = set.near_cusp.rows.iter().map(|r| Group::NearCusp(r.k)).collect();
    out.extend(set.subtracted.rows.iter().map(|r| Group::Subtracted(r.k)));
    out.extend([Group::Quantum, Group::HighPrecision, Group::Gamma]);
    out
}

fn minus_half() -> Result<modular::CuspRational, Error> {
    modular::cusp_matrix(Rational64::new(-1, 2))
}

/// Recomputes one group of cells.
pub fn check_group(group: Group, tol: &Tolerance) -> Result<Vec<CellCheck>, Error> {
    let set = published();
    let family = Family::G;
    let name = group.to_string();
    match group {
        Group::NearCusp(k) => {
            let row = set
                .near_cusp
                .rows
                .iter()
                .find(|r| r.k == k)
                .ok_or_else(|| Error::Domain(format!("no reference row for k = {k}")))?;
            let tau = near_cusp_point(k);
            let g = period::u_vector(family, &tau, None, tol)?.values;
            let g_r = period::u_vector(family, &tau.act(&r_matrix())?, None, tol)?.values;
            let obs = period::obstruction_vector(family, &minus_half()?, &tau, period::OBSTRUCTION_SPLIT, tol)?.values;
            let tl = set.near_cusp.tolerance;
            let mut out = Vec::with_capacity(12);
            for (label, got, want) in [("g", g, row.g), ("g_r", g_r, row.g_r), ("obstruction", obs, row.obstruction)] {
                for j in 0..4 {
                    out.push(CellCheck::new(&name, format!("{label}[{j}]"), got[j], c(want[j]), tl));
                }
            }
            Ok(out)
        }
        Group::Subtracted(k) => {
            let row = set
                .subtracted
                .rows
                .iter()
                .find(|r| r.k == k)
                .ok_or_else(|| Error::Domain(format!("no reference row for k = {k}")))?;
            let tau = near_cusp_point(k);
            let x = modular::cusp_matrix(anchor())?;
            let gamma = modular::gamma_constant(&family.spec(), 0, &x)?;
            let u = period::u_vector(family, &tau, None, tol)?.values[0];
            let got = u - gamma / (PI * tau.im());
            Ok(vec![CellCheck::new(&name, "g[0] - γ/(πt)".into(), got, c(row.value), set.subtracted.tolerance)])
        }
        Group::Quantum => {
            let q = &set.quantum;
            let x = modular::cusp_matrix(anchor())?;
            let y = modular::cusp_matrix(Rational64::new(11, 34))?;
            let at_x = period::quantum_vector(family, &x, tol)?.values;
            let at_y = period::quantum_vector(family, &y, tol)?.values;
            let obs =
                period::obstruction_vector(family, &minus_half()?, &Point::new(anchor(), Complex64::new(0.0, 0.0)), period::OBSTRUCTION_SPLIT, tol)?
                    .values;
            let mut out = Vec::with_capacity(12);
            for (label, got, want) in
                [("at_11_12", at_x, q.at_11_12), ("at_11_34", at_y, q.at_11_34), ("obstruction_at_11_12", obs, q.obstruction_at_11_12)]
            {
                for j in 0..4 {
                    out.push(CellCheck::new(&name, format!("{label}[{j}]"), got[j], c(want[j]), q.tolerance));
                }
            }
            Ok(out)
        }
        Group::HighPrecision => {
            let h = &set.high_precision;
            let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Internal(format!("bad reference decimal {s:?}: {e}")));
            let want = Complex64::new(parse(&h.re)?, parse(&h.im)?);
            let (got, _) = period::quantum_value(family, 0, &modular::cusp_matrix(anchor())?, tol)?;
            Ok(vec![CellCheck::new(&name, "at_11_12[0]".into(), got, want, h.tolerance)])
        }
        Group::Gamma => {
            let g = &set.gamma;
            let got = modular::gamma_constant(&family.spec(), 0, &modular::cusp_matrix(anchor())?)?;
            Ok(vec![CellCheck::new(&name, "gamma[0]".into(), got, Complex64::new(g.value, 0.0), g.tolerance)])
        }
    }
}

/// All groups, sequentially.
pub fn check_all(tol: &Tolerance) -> Result<Vec<CellCheck>, Error> {
    let mut out = Vec::new();
    for g in groups() {
        out.extend(check_group(g, tol)?);
    }
    Ok(out)
}
