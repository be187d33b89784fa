//! `qmf` — evaluation, reference-value reproduction, verification suites and
//! plot-data emission for the families F, G and H.
//!
//! Exit codes: 0 success, 1 verification or numerical failure, 2 usage error.

mod output;
mod suites;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use num_rational::Rational64;
use qmf::modular::{self, Gamma02Element};
use qmf::period::{self, Point};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use qmf::qseries::{self, FormalSeries, SeriesId, SeriesRecord};
use qmf::reference::{self, CellCheck};
use qmf::theta::{self, Family};
use qmf::{Error, Tolerance};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use output::{complex_text, pair, sig12};
use suites::Suite;

const MAX_DENOMINATOR: i64 = 200;

#[derive(Parser, Debug)]
#[command(name = "qmf", version, about = "Quantum modular forms from false-indefinite theta functions on Γ₀(2)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Output format.
    #[arg(long, value_enum, global = true)]
    output: Option<OutputFormat>,
    /// Write output to this file instead of stdout.
    #[arg(long = "out", global = true)]
    out_path: Option<PathBuf>,
    /// Uniform absolute and relative tolerance for quadratures.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Worker threads (default: machine parallelism).
    #[arg(long, env = "QMF_THREADS", global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact expansion of L_id and of its family component.
    Series {
        #[arg(long)]
        id: u8,
        #[arg(long, default_value_t = 40)]
        order: usize,
    },
    /// Recompute every published reference value and compare.
    Tables,
    /// Quantum values at Farey points and the transformation defect under R.
    Quantum {
        #[arg(long, value_parser = parse_family)]
        family: Family,
        #[arg(long = "denominator-max", default_value_t = 40)]
        denominator_max: i64,
    },
    /// Run verification suites.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
    },
    /// u(τ) at a point of ℍ, or 𝔲(x) and γ at a cusp x.
    Eval {
        #[arg(long, value_parser = parse_family)]
        family: Family,
        /// Single component (default: all four).
        #[arg(long)]
        j: Option<usize>,
        /// τ as two decimals RE IM.
        #[arg(long, num_args = 2, value_names = ["RE", "IM"], allow_negative_numbers = true)]
        tau: Option<Vec<String>>,
        /// Cusp p/q with q even.
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
    Text,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse::<Family>().map_err(|e| e.to_string())
}

/// Failure of a run, mapped to its exit code.
#[derive(Debug, thiserror::Error)]
enum RunError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Library(#[from] Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl RunError {
    fn exit_code(&self) -> u8 {
        match self {
            RunError::Usage(_) => 2,
            RunError::Library(Error::Domain(_) | Error::NotInCuspSet(_) | Error::NoCuspAnchor(_)) => 2,
            _ => 1,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qmf: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), RunError> {
    let common = cli.common.clone();
    let tol = match common.tol {
        None => Tolerance::default(),
        Some(eps) => Tolerance::new(eps, eps, Tolerance::default().max_refinement)
            .map_err(|e| RunError::Usage(e.to_string()))?,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(RunError::Usage("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| RunError::Failed(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Series { id, order } => cmd_series(id, order, &common),
        Command::Tables => cmd_tables(&tol, &common),
        Command::Quantum { family, denominator_max } => cmd_quantum(family, denominator_max, &tol, &common),
        Command::Verify { suite } => cmd_verify(suite, &tol, &common),
        Command::Eval { family, j, tau, x } => cmd_eval(family, j, tau, x, &tol, &common),
    })
}

fn emit(common: &Common, text: &str) -> Result<(), RunError> {
    match &common.out_path {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn format_of(common: &Common, default: OutputFormat, allowed: &[OutputFormat]) -> Result<OutputFormat, RunError> {
    let f = common.output.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(RunError::Usage(format!("output format {f:?} is not available for this command")))
    }
}

// ==========================================================================
// series
// ==========================================================================

#[derive(Debug, Serialize, Deserialize)]
struct ComponentRecord {
    family: String,
    j: usize,
    /// Exponent of the lowest nonzero term, offset included.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    leading_exponent: Option<String>,
    series: SeriesRecord,
}

#[derive(Debug, Serialize, Deserialize)]
struct SeriesReport {
    id: u8,
    star_averaged: bool,
    raw: SeriesRecord,
    component: ComponentRecord,
}

fn cmd_series(id: u8, order: usize, common: &Common) -> Result<(), RunError> {
    let sid = SeriesId::new(id).map_err(|e| RunError::Usage(e.to_string()))?;
    if order == 0 {
        return Err(RunError::Usage("--order must be positive".into()));
    }
    let raw = qseries::l_series(sid, order)?;
    let (spec, j, component) = theta::linked_series(sid, order)?;
    let report = SeriesReport {
        id,
        star_averaged: sid.is_star_averaged(),
        raw: raw.to_record(Some(id)),
        component: ComponentRecord {
            family: spec.family.to_string(),
            j,
            leading_exponent: leading_exponent(&component),
            series: component.to_record(Some(id)),
        },
    };
    match format_of(common, OutputFormat::Json, &[OutputFormat::Json, OutputFormat::Text])? {
        OutputFormat::Text => emit(common, &format!("{sid} = {raw}\ncomponent {}{j} = {component}\n", spec.family)),
        _ => emit(common, &(serde_json::to_string_pretty(&report)? + "\n")),
    }
}

fn leading_exponent(s: &FormalSeries) -> Option<String> {
    let n = s.coeffs().iter().position(|c| !c.is_zero())?;
    Some((s.offset() + BigRational::from_integer(BigInt::from(n))).to_string())
}

// ==========================================================================
// tables
// ==========================================================================

fn cmd_tables(tol: &Tolerance, common: &Common) -> Result<(), RunError> {
    let groups = reference::groups();
    let checks: Vec<CellCheck> = groups
        .par_iter()
        .map(|g| reference::check_group(*g, tol))
        .collect::<Result<Vec<_>, Error>>()?
        .into_iter()
        .flatten()
        .collect();
    let text = match format_of(common, OutputFormat::Text, &[OutputFormat::Json, OutputFormat::Csv, OutputFormat::Text])? {
        OutputFormat::Json => serde_json::to_string_pretty(&checks)? + "\n",
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["group", "cell", "computed_re", "computed_im", "published_re", "published_im", "difference", "tolerance"])?;
            for c in &checks {
                w.write_record([
                    c.group.clone(),
                    c.cell.clone(),
                    c.computed[0].to_string(),
                    c.computed[1].to_string(),
                    c.published[0].to_string(),
                    c.published[1].to_string(),
                    c.difference.to_string(),
                    c.tolerance.to_string(),
                ])?;
            }
            String::from_utf8(w.into_inner().map_err(|e| RunError::Failed(e.to_string()))?).expect("csv is utf-8")
        }
        OutputFormat::Text => {
            let mut s = String::new();
            for c in &checks {
                let computed = Complex64::new(c.computed[0], c.computed[1]);
                let published = Complex64::new(c.published[0], c.published[1]);
                s.push_str(&format!(
                    "{:<22} {:<24} {:>42}  published {:>38}  |Δ| {:<10} {}\n",
                    c.group,
                    c.cell,
                    complex_text(computed),
                    complex_text(published),
                    format!("{:.2e}", c.difference),
                    if c.passed() { "pass" } else { "FAIL" }
                ));
            }
            s
        }
    };
    emit(common, &text)?;
    let failing: Vec<String> = checks.iter().filter(|c| !c.passed()).map(|c| format!("{} {}", c.group, c.cell)).collect();
    if failing.is_empty() {
        Ok(())
    } else {
        Err(RunError::Failed(format!("{} cell(s) out of tolerance: {}", failing.len(), failing.join(", "))))
    }
}

// ==========================================================================
// quantum
// ==========================================================================

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct QuantumRow {
    p: i64,
    q: i64,
    j: usize,
    re: f64,
    im: f64,
}

/// 𝔲_j(Rx) − |2x+1|·Σ_k Ψ_R(j,k)𝔲_k(x), alongside the value predicted by the
/// obstruction, |2x+1|·Σ_k Ψ_R(j,k)𝒰_{k,−1/2}(x).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TransformRow {
    p: i64,
    q: i64,
    j: usize,
    re: f64,
    im: f64,
    obstruction_re: f64,
    obstruction_im: f64,
}

/// Path of the companion transformation file: `<stem>_transform.<ext>`.
fn transform_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "quantum".into());
    let ext = out.extension().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}_transform.{ext}"))
}

fn cmd_quantum(family: Family, denominator_max: i64, tol: &Tolerance, common: &Common) -> Result<(), RunError> {
    if !(2..=MAX_DENOMINATOR).contains(&denominator_max) {
        return Err(RunError::Usage(format!("--denominator-max must lie in 2..={MAX_DENOMINATOR}")));
    }
    let out = common.out_path.clone().ok_or_else(|| RunError::Usage("quantum writes files; pass --out PATH".into()))?;
    let fmt = format_of(common, OutputFormat::Csv, &[OutputFormat::Csv, OutputFormat::Json])?;
    let points = suites::farey_cusps(denominator_max);
    let values = points
        .par_iter()
        .map(|&(p, q)| Ok(period::quantum_vector(family, &modular::cusp_matrix(Rational64::new(p, q))?, tol)?.values))
        .collect::<Result<Vec<[Complex64; 4]>, Error>>()?;
    let rows: Vec<QuantumRow> = points
        .iter()
        .zip(&values)
        .flat_map(|(&(p, q), v)| (0..4).map(move |j| QuantumRow { p, q, j, re: v[j].re, im: v[j].im }))
        .collect();

    let psi_r = modular::multiplier(family, &Gamma02Element::R)?;
    let rho = modular::cusp_matrix(Rational64::new(-1, 2))?;
    let transform = points
        .par_iter()
        .zip(values.par_iter())
        .filter(|((p, q), _)| (*p, *q) != (-1, 2))
        .map(|(&(p, q), v)| {
            let x = Rational64::new(p, q);
            let rx = Rational64::new(p, 2 * p + q);
            let image = period::quantum_vector(family, &modular::cusp_matrix(rx)?, tol)?.values;
            let obs = period::obstruction_vector(family, &rho, &Point::new(x, Complex64::new(0.0, 0.0)), period::OBSTRUCTION_SPLIT, tol)?
                .values;
            let scale = ((2 * p + q) as f64 / q as f64).abs();
            let pv = psi_r.apply(v);
            let po = psi_r.apply(&obs);
            Ok((0..4)
                .map(|j| {
                    let d = image[j] - pv[j] * scale;
                    let o = po[j] * scale;
                    TransformRow { p, q, j, re: d.re, im: d.im, obstruction_re: o.re, obstruction_im: o.im }
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>, Error>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();

    write_rows(&out, fmt, &rows)?;
    write_rows(&transform_path(&out), fmt, &transform)?;
    Ok(())
}

fn write_rows<T: Serialize>(path: &Path, fmt: OutputFormat, rows: &[T]) -> Result<(), RunError> {
    match fmt {
        OutputFormat::Json => fs::write(path, serde_json::to_string_pretty(rows)? + "\n")?,
        _ => {
            let mut w = csv::Writer::from_path(path)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

// ==========================================================================
// verify
// ==========================================================================

fn cmd_verify(suite: Suite, tol: &Tolerance, common: &Common) -> Result<(), RunError> {
    let records = suites::run(suite, tol)?;
    let text = match format_of(common, OutputFormat::Json, &[OutputFormat::Json, OutputFormat::Text])? {
        OutputFormat::Text => records
            .iter()
            .map(|r| format!("[{}] {} — max residual {:.3e} (tol {:.0e}, {} samples)\n", r.status, r.check, r.max_residual, r.tolerance, r.samples))
            .collect(),
        _ => serde_json::to_string_pretty(&records)? + "\n",
    };
    emit(common, &text)?;
    let failing: Vec<&str> = records.iter().filter(|r| r.status == suites::Status::Fail).map(|r| r.check.as_str()).collect();
    if failing.is_empty() {
        Ok(())
    } else {
        Err(RunError::Failed(format!("failed checks: {}", failing.join("; "))))
    }
}

// ==========================================================================
// eval
// ==========================================================================

#[derive(Debug, Serialize, Deserialize)]
struct EvalRecord {
    family: String,
    j: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x: Option<String>,
    value: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    route: Option<String>,
    error_estimate: f64,
}

/// Parses a decimal string into an exact rational plus nothing else, so
/// real parts such as 0.25 stay on the vertical line above a cusp.
fn decimal_point(re: &str, im: &str) -> Result<Point, RunError> {
    let bad = |s: &str| RunError::Usage(format!("not a decimal number: {s:?}"));
    let y: f64 = im.trim().parse().map_err(|_| bad(im))?;
    let re = re.trim();
    let (neg, digits) = match re.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, re.strip_prefix('+').unwrap_or(re)),
    };
    let exact = match digits.split_once('.') {
        None => digits.parse::<i64>().ok().map(Rational64::from),
        Some((a, b)) if b.len() <= 15 && !b.is_empty() && b.chars().all(|c| c.is_ascii_digit()) => {
            let whole = if a.is_empty() { Some(0) } else { a.parse::<i64>().ok() };
            let scale = 10i64.pow(b.len() as u32);
            match (whole, b.parse::<i64>()) {
                (Some(w), Ok(f)) => w.checked_mul(scale).and_then(|v| v.checked_add(f)).map(|n| Rational64::new(n, scale)),
                _ => None,
            }
        }
        _ => None,
    };
    match exact {
        Some(r) => Ok(Point::new(if neg { -r } else { r }, Complex64::new(0.0, y))),
        None => {
            let x: f64 = re.parse().map_err(|_| bad(re))?;
            Ok(Point::from(Complex64::new(x, y)))
        }
    }
}

fn cmd_eval(
    family: Family,
    j: Option<usize>,
    tau: Option<Vec<String>>,
    x: Option<String>,
    tol: &Tolerance,
    common: &Common,
) -> Result<(), RunError> {
    if let Some(j) = j {
        if j > 3 {
            return Err(RunError::Usage(format!("--j must be in 0..=3, got {j}")));
        }
    }
    let components: Vec<usize> = j.map(|j| vec![j]).unwrap_or_else(|| (0..4).collect());
    let records: Vec<EvalRecord> = match (tau, x) {
        (Some(t), None) => {
            let point = decimal_point(&t[0], &t[1])?;
            let v = period::u_vector(family, &point, None, tol)?;
            components
                .iter()
                .map(|&j| EvalRecord {
                    family: family.to_string(),
                    j,
                    tau: Some(pair(point.value())),
                    x: None,
                    value: pair(v.values[j]),
                    gamma: None,
                    route: Some(v.route.to_string()),
                    error_estimate: v.error_estimate,
                })
                .collect()
        }
        (None, Some(s)) => {
            let cusp = modular::parse_cusp(&s)?;
            let q = period::quantum_vector(family, &cusp, tol)?;
            components
                .iter()
                .map(|&j| EvalRecord {
                    family: family.to_string(),
                    j,
                    tau: None,
                    x: Some(cusp.x.to_string()),
                    value: pair(q.values[j]),
                    gamma: Some(pair(q.gammas[j])),
                    route: None,
                    error_estimate: q.error_estimate,
                })
                .collect()
        }
        _ => return Err(RunError::Usage("eval needs exactly one of --tau RE IM or --x P/Q".into())),
    };
    let text = match format_of(common, OutputFormat::Text, &[OutputFormat::Json, OutputFormat::Text])? {
        OutputFormat::Json => serde_json::to_string_pretty(&records)? + "\n",
        _ => records
            .iter()
            .map(|r| {
                let v = complex_text(Complex64::new(r.value[0], r.value[1]));
                match &r.gamma {
                    Some(g) => format!("{}{} x={}: {v}  γ = {}\n", r.family, r.j, r.x.as_deref().unwrap_or(""), complex_text(Complex64::new(g[0], g[1]))),
                    None => format!("{}{}: {v}  (error ≈ {})\n", r.family, r.j, sig12(r.error_estimate)),
                }
            })
            .collect(),
    };
    emit(common, &text)
}
