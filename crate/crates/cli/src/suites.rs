//! Verification suites behind `qmf verify`. Samples are deterministic
//! (fixed grids and strides) so reports are reproducible.

use std::fmt;

use num_complex::Complex64;
use qmf::modular::{self, Gamma02Element};
use qmf::period::{self, Point};
use qmf::qseries::SeriesId;
use qmf::theta::{self, Family};
use qmf::{Error, Tolerance};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Coeffs,
    Shadows,
    Multipliers,
    Modular,
    Quantum,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
        })
    }
}

/// One line of the verification report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub status: Status,
    pub max_residual: f64,
    pub tolerance: f64,
    pub samples: usize,
}

impl CheckRecord {
    fn new(check: impl Into<String>, residuals: &[f64], tolerance: f64) -> Self {
        let max_residual = residuals.iter().copied().fold(0.0, f64::max);
        // NaN residuals fail
        let ok = residuals.iter().all(|r| *r < tolerance);
        CheckRecord {
            check: check.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            max_residual,
            tolerance,
            samples: residuals.len(),
        }
    }
}

pub fn run(suite: Suite, tol: &Tolerance) -> Result<Vec<CheckRecord>, Error> {
    match suite {
        Suite::Coeffs => coeffs(),
        Suite::Shadows => shadows(),
        Suite::Multipliers => multipliers(),
        Suite::Modular => modular_checks(tol),
        Suite::Quantum => quantum(tol),
        Suite::All => {
            let mut out = Vec::new();
            for s in [Suite::Coeffs, Suite::Shadows, Suite::Multipliers, Suite::Modular, Suite::Quantum] {
                out.extend(run(s, tol)?);
            }
            Ok(out)
        }
    }
}

/// Exact equality of q^offset·L_id with its false theta component to q^40;
/// the residual counts differing coefficients.
fn coeffs() -> Result<Vec<CheckRecord>, Error> {
    let ids: Vec<SeriesId> = SeriesId::all().collect();
    let residuals = ids
        .par_iter()
        .map(|&id| {
            let (spec, j, series) = theta::linked_series(id, 40)?;
            let theta_side = theta::false_theta_series(&spec, j, 40)?;
            let differing = (0..40).filter(|&n| series.coeff(n) != theta_side.coeff(n)).count()
                + usize::from(series.offset() != theta_side.offset())
                + usize::from(series.artanh_coefficient() != theta_side.artanh_coefficient());
            Ok(differing as f64)
        })
        .collect::<Result<Vec<f64>, Error>>()?;
    Ok(vec![CheckRecord::new("coeffs: l_series = false_theta_series to q^40", &residuals, 0.5)])
}

/// Ten points per family spread over τ₁ ∈ [−½, ½), τ₂ ∈ [0.2, 2].
fn tau_grid(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|i| {
            let s = (i as f64 + 0.5) / n as f64;
            // golden-ratio stride decorrelates the two coordinates
            let r = (i as f64 * 0.618_033_988_749_895).fract();
            Complex64::new(r - 0.5, 0.2 + 1.8 * s)
        })
        .collect()
}

fn shadows() -> Result<Vec<CheckRecord>, Error> {
    let t = Tolerance::uniform(1e-13);
    let mut out = Vec::new();
    for family in Family::ALL {
        let spec = family.spec();
        let jobs: Vec<(Complex64, usize)> = tau_grid(10).into_iter().flat_map(|z| (0..4).map(move |j| (z, j))).collect();
        let residuals = jobs
            .par_iter()
            .map(|&(tau, j)| {
                let hat = theta::completed_family_value(&spec, j, tau, &t)?;
                let mock = theta::mock_maass_value(&spec, j, tau, &t)?;
                Ok((hat - mock).norm())
            })
            .collect::<Result<Vec<f64>, Error>>()?;
        out.push(CheckRecord::new(format!("shadows[{family}]: |completed − mock|"), &residuals, 1e-10));
    }
    Ok(out)
}

/// Elements of Γ₀(2) with |c| ≤ 40 from a fixed stride over bottom rows.
fn elements(count: usize) -> Vec<Gamma02Element> {
    let mut rows = Vec::new();
    for c in (-40i64..=40).step_by(2) {
        for d in -41i64..=41 {
            if num_integer::gcd(c, d) == 1 {
                rows.push((c, d));
            }
        }
    }
    let stride = (rows.len() / count).max(1);
    rows.iter()
        .step_by(stride)
        .take(count)
        .map(|&(c, d)| {
            if c == 0 {
                return Gamma02Element::new(d, 3, 0, d);
            }
            let a = (0..c.abs()).find(|a| (a * d - 1).rem_euclid(c) == 0).expect("d is a unit mod c");
            Gamma02Element::new(a, (a * d - 1) / c, c, d)
        })
        .collect::<Result<_, _>>()
        .expect("constructed with determinant 1")
}

fn multipliers() -> Result<Vec<CheckRecord>, Error> {
    let mut out = Vec::new();
    let ms = elements(50);
    for family in Family::ALL {
        let spec = family.spec();
        let residuals = ms
            .par_iter()
            .map(|m| Ok(modular::multiplier(family, m)?.distance(&modular::fold_multiplier(&spec, m)?)))
            .collect::<Result<Vec<f64>, Error>>()?;
        out.push(CheckRecord::new(format!("multipliers[{family}]: generator word vs Weil fold"), &residuals, 1e-11));
        let pairs: Vec<(Gamma02Element, Gamma02Element)> = ms.iter().zip(ms.iter().rev()).map(|(a, b)| (*a, *b)).collect();
        let residuals = pairs
            .par_iter()
            .map(|(a, b)| {
                let lhs = modular::multiplier(family, &a.mul(b)?)?;
                let rhs = modular::multiplier(family, a)?.mul(&modular::multiplier(family, b)?);
                Ok(lhs.distance(&rhs))
            })
            .collect::<Result<Vec<f64>, Error>>()?;
        out.push(CheckRecord::new(format!("multipliers[{family}]: Ψ_AB = Ψ_A·Ψ_B"), &residuals, 1e-12));
    }
    Ok(out)
}

/// Words of length 1..=4 in T^{±k}, R^{±k}, −I, enumerated by a fixed stride.
fn words(count: usize) -> Vec<Gamma02Element> {
    let gens: Vec<Gamma02Element> = [1, -1, 2, -2]
        .iter()
        .flat_map(|&k| [Gamma02Element::pow_t(k), Gamma02Element::pow_r(k).expect("R power")])
        .chain([Gamma02Element::NEG_I])
        .collect();
    (0..count)
        .map(|i| {
            let len = 1 + i % 4;
            let mut m = Gamma02Element::IDENTITY;
            let mut code = i * 7919 + 13;
            for _ in 0..len {
                m = m.mul(&gens[code % gens.len()]).expect("small word");
                code /= gens.len();
                code += 5;
            }
            m
        })
        .collect()
}

fn modular_checks(tol: &Tolerance) -> Result<Vec<CheckRecord>, Error> {
    let ms = words(50);
    let taus: Vec<Complex64> = tau_grid(50).into_iter().map(|z| Complex64::new(2.0 * z.re, 0.1 + (z.im - 0.2) / 2.0)).collect();
    let mut out = Vec::new();
    for family in Family::ALL {
        let residuals = ms
            .par_iter()
            .zip(taus.par_iter())
            .map(|(m, tau)| period::verify_modular(family, m, &Point::from(*tau), tol))
            .collect::<Result<Vec<f64>, Error>>()?;
        out.push(CheckRecord::new(format!("modular[{family}]: u(Mτ) vs transformed u + 𝒰"), &residuals, 1e-8));
    }
    Ok(out)
}

/// Farey points p/q ∈ (−1, 1), q even, q ≤ `max`, in lowest terms.
pub fn farey_cusps(max: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for q in (2..=max).step_by(2) {
        for p in -(q - 1)..q {
            if num_integer::gcd(p, q) == 1 {
                out.push((p, q));
            }
        }
    }
    out.sort_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)));
    out
}

fn quantum(tol: &Tolerance) -> Result<Vec<CheckRecord>, Error> {
    // −1/2 is the pole of R
    let points: Vec<(i64, i64)> = farey_cusps(40).into_iter().filter(|&p| p != (-1, 2)).collect();
    let mut out = Vec::new();
    for family in Family::ALL {
        let residuals = points
            .par_iter()
            .map(|&(p, q)| {
                let x = modular::cusp_matrix(num_rational::Rational64::new(p, q))?;
                period::verify_quantum(family, &Gamma02Element::R, &x, tol)
            })
            .collect::<Result<Vec<f64>, Error>>()?;
        out.push(CheckRecord::new(format!("quantum[{family}]: 𝔲(Rx) vs transformed 𝔲 + 𝒰, q ≤ 40"), &residuals, 1e-6));
    }
    Ok(out)
}
