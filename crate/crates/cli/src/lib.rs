//! Command-line front end for `popspace`.
//!
//! [`dispatch`] parses the arguments, runs one subcommand and returns the
//! process exit code: 0 ok, 1 usage or input error, 2 violation,
//! 3 inconclusive findings only. Reports go to `--out` through a temporary
//! file that is renamed into place, or to standard output without `--out`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use popspace::colspace::{
    col_matrix_norm, counterexample_report, ColumnMatrix, CounterexampleOptions, ProjectionOptions,
    SubspaceEmbedding,
};
use popspace::factnorm::{factnorm1, factnorm1_lower, factnorm2_upper, FactnormOptions};
use popspace::io::{format_g17, matrix_from_json, to_json_string};
use popspace::isometry::{is_lp_isometry, is_polar_decomposable, polar_decompose, DEFAULT_TOL};
use popspace::pnorms::{entrywise_norm, opnorm_estimate, Witness};
use popspace::verify::{extension_gap, run_campaign, Budgets, Campaign, ExtensionOptions, ExtensionProblem, GapLabel, Suite};
use popspace::{Error, Exponent, Matrix, Result};

/// Default seed for every stochastic routine.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(name = "popspace", version, about = "Matrix p-norms, factorization norms and l_p polar decompositions")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Seed for all randomized searches.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Tolerance override.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output file (a directory for `verify`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certified bounds on the p→p operator norm.
    Opnorm {
        #[arg(long, value_parser = parse_exponent)]
        p: Exponent,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 8, value_parser = positive)]
        restarts: usize,
    },
    /// Entrywise q-norm; q may be 1 or inf.
    Entrywise {
        #[arg(long, value_parser = parse_q)]
        p: f64,
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Decides whether the matrix is an isometry of l_p (exit 0 yes, 1 no).
    IsometryCheck {
        #[arg(long, value_parser = parse_exponent)]
        p: Exponent,
        #[arg(long)]
        matrix: PathBuf,
    },
    /// l_p-polar decomposition beta = tau * beta0.
    Polar {
        #[arg(long, value_parser = parse_exponent)]
        p: Exponent,
        #[arg(long)]
        matrix: PathBuf,
    },
    /// Factorization norm sandwich (which = 1) or restricted norm (which = 2).
    Factnorm {
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        which: u8,
        #[arg(long, value_parser = parse_exponent)]
        p: Exponent,
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, value_parser = positive)]
        rmax: Option<usize>,
        #[arg(long, default_value_t = 4, value_parser = positive)]
        restarts: usize,
        #[arg(long, default_value_t = 200, value_parser = positive)]
        iterations: usize,
    },
    /// Norm of an element of M_n(E^c) given by its stacked (n*m) x n matrix.
    Colnorm {
        #[arg(long, value_parser = parse_exponent)]
        p: Exponent,
        #[arg(long)]
        matrix: PathBuf,
        /// Basis of E as columns; entries are checked for membership.
        #[arg(long)]
        subspace: Option<PathBuf>,
        /// Ambient dimension m (taken from the subspace when given).
        #[arg(long, value_parser = positive)]
        m: Option<usize>,
        #[arg(long, default_value_t = 8, value_parser = positive)]
        restarts: usize,
    },
    /// Phi/psi contraction checks and projection search for E = range(basis).
    Counterexample {
        #[arg(long, value_parser = parse_exponent)]
        p: Exponent,
        #[arg(long)]
        subspace: PathBuf,
        #[arg(long, default_value_t = 3, value_parser = positive)]
        nmax: usize,
        #[arg(long, default_value_t = 20, value_parser = positive)]
        trials: usize,
        #[arg(long, default_value_t = 32, value_parser = positive)]
        restarts: usize,
        #[arg(long, default_value_t = 200, value_parser = positive)]
        iterations: usize,
    },
    /// Seeded verification campaign; writes <suite>.json and <suite>.csv.
    Verify {
        #[arg(long)]
        suite: Suite,
        /// Comma-separated exponents, e.g. 1.5,3/2,4.
        #[arg(long, value_parser = parse_exponent, value_delimiter = ',', required = true)]
        p: Vec<Exponent>,
        #[arg(long, default_value_t = 3, value_parser = positive)]
        nmax: usize,
        #[arg(long, default_value_t = 100, value_parser = positive)]
        trials: usize,
        #[arg(long, default_value_t = 2, value_parser = positive)]
        restarts: usize,
        #[arg(long, default_value_t = 60, value_parser = positive)]
        iterations: usize,
        #[arg(long, default_value_t = 20, value_parser = positive)]
        samples: usize,
    },
    /// Lower bound on a map on V and upper bound over its extensions to M_k.
    ExtensionGap {
        #[arg(long, value_parser = parse_exponent)]
        p: Exponent,
        /// JSON array of k x k matrices spanning V.
        #[arg(long)]
        vbasis: PathBuf,
        /// JSON array of the images of the basis, s x s each.
        #[arg(long)]
        images: PathBuf,
        #[arg(long, default_value_t = 2, value_parser = positive)]
        level: usize,
        #[arg(long, default_value_t = 24, value_parser = positive)]
        samples: usize,
        #[arg(long, default_value_t = 60, value_parser = positive)]
        iterations: usize,
        #[arg(long, default_value_t = 4, value_parser = positive)]
        restarts: usize,
    },
}

fn parse_exponent(s: &str) -> std::result::Result<Exponent, String> {
    Exponent::parse(s).map_err(|e| e.to_string())
}

fn parse_q(s: &str) -> std::result::Result<f64, String> {
    let q = match s.trim() {
        "inf" | "infinity" => f64::INFINITY,
        t => match t.split_once('/') {
            Some((a, b)) => {
                let a: f64 = a.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
                let b: f64 = b.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
                a / b
            }
            None => t.parse().map_err(|_| format!("not a number: {s:?}"))?,
        },
    };
    if q >= 1.0 {
        Ok(q)
    } else {
        Err(format!("q must be at least 1, got {s}"))
    }
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be positive".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return 0;
            }
            let text = e.render().to_string();
            let head: Vec<&str> = text.lines().take_while(|l| !l.trim().is_empty()).map(str::trim).collect();
            eprintln!("{}", head.join(" "));
            return 1;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn read_text(path: &Path, field: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::input(field, format!("{}: {e}", path.display())))
}

fn load_matrix(path: &Path, field: &str) -> Result<Matrix> {
    let text = read_text(path, field)?;
    matrix_from_json(&text).map_err(|e| Error::input(field, format!("{}: {}", path.display(), strip_field(&e))))
}

fn load_matrix_list(path: &Path, field: &str) -> Result<Vec<Matrix>> {
    let text = read_text(path, field)?;
    let list: Vec<Matrix> =
        serde_json::from_str(&text).map_err(|e| Error::input(field, format!("{}: {e}", path.display())))?;
    Ok(list)
}

fn strip_field(e: &Error) -> String {
    match e {
        Error::Input { field, reason } => format!("{field}: {reason}"),
        other => other.to_string(),
    }
}

/// Writes `bytes` to `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// One CSV header and row from the scalar top-level fields of a report.
fn scalar_csv(value: &Value) -> Result<String> {
    let Value::Object(map) = value else {
        return Err(Error::Internal("report is not an object".into()));
    };
    let mut head = Vec::new();
    let mut row = Vec::new();
    for (k, v) in map {
        let cell = match v {
            Value::Number(n) => n.as_f64().map(format_g17).unwrap_or_else(|| n.to_string()),
            Value::String(s) => s.clone(),
            Value::Bool(b) => b.to_string(),
            Value::Null => String::new(),
            _ => continue,
        };
        head.push(k.clone());
        row.push(cell);
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&head).and_then(|_| w.write_record(&row)).map_err(|e| Error::Internal(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("UTF-8 fields"))
}

fn emit<T: Serialize>(g: &Global, report: &T) -> Result<()> {
    let text = match g.format {
        Format::Json => to_json_string(report)?,
        Format::Csv => scalar_csv(&serde_json::to_value(report)?)?,
    };
    match &g.out {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct OpnormReport {
    p: Exponent,
    rows: usize,
    cols: usize,
    lower: f64,
    upper: f64,
    gap: f64,
    witness: Witness,
    seed: u64,
}

#[derive(Serialize)]
struct EntrywiseReport {
    q: f64,
    rows: usize,
    cols: usize,
    norm: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct FactnormReport {
    which: u8,
    p: Exponent,
    n: usize,
    lower: f64,
    upper: f64,
    gap: f64,
    best_r: usize,
    factorization: Value,
    witness: Value,
    seed: u64,
}

#[derive(Serialize)]
struct PolarReport {
    p: Exponent,
    tau: Matrix,
    beta0: Matrix,
    lambda: Vec<f64>,
    /// Rows of `β` carried by each column of `τ`.
    groups: Vec<Vec<usize>>,
    pivots: Vec<Option<usize>>,
    reconstruction_error: f64,
}

#[derive(Serialize)]
struct ColnormReport {
    p: Exponent,
    n: usize,
    m: usize,
    lower: f64,
    upper: f64,
    gap: f64,
    seed: u64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CounterexampleOut {
    p: Exponent,
    phi_psi: Value,
    projection: ProjectionOut,
    flags: Value,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ProjectionOut {
    best_value: f64,
    best_projection_lower: f64,
    #[serde(rename = "P")]
    p: Matrix,
    idempotency_error: f64,
    range_error: f64,
}

fn run(cli: Cli) -> Result<i32> {
    let g = &cli.global;
    if let Some(t) = g.tol {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::input("tol", format!("must be a positive finite number, got {t}")));
        }
    }
    match &cli.command {
        Command::Opnorm { p, matrix, restarts } => {
            let a = load_matrix(matrix, "matrix")?;
            let est = opnorm_estimate(&a, p, *restarts, g.tol.unwrap_or(1e-12), g.seed)?;
            let upper = est.upper.expect("estimate carries an upper bound");
            emit(
                g,
                &OpnormReport {
                    p: *p,
                    rows: a.rows(),
                    cols: a.cols(),
                    lower: est.lower,
                    upper,
                    gap: upper - est.lower,
                    witness: est.witness,
                    seed: g.seed,
                },
            )?;
            Ok(0)
        }
        Command::Entrywise { p, matrix } => {
            let a = load_matrix(matrix, "matrix")?;
            let norm = entrywise_norm(&a, *p)?;
            emit(g, &EntrywiseReport { q: *p, rows: a.rows(), cols: a.cols(), norm })?;
            Ok(0)
        }
        Command::IsometryCheck { p, matrix } => {
            let tau = load_matrix(matrix, "matrix")?;
            let cert = is_lp_isometry(&tau, p, g.tol.unwrap_or(DEFAULT_TOL))?;
            emit(g, &cert)?;
            Ok(if cert.is_isometry { 0 } else { 1 })
        }
        Command::Polar { p, matrix } => {
            let beta = load_matrix(matrix, "matrix")?;
            let tol = g.tol.unwrap_or(DEFAULT_TOL);
            let pd = match polar_decompose(&beta, p, tol) {
                Ok(pd) => pd,
                Err(Error::NotDecomposable(_)) | Err(Error::NoIsometryPossible { .. }) => {
                    let diag = is_polar_decomposable(&beta, p, tol);
                    let reason = diag.reason.unwrap_or_else(|| "not decomposable".into());
                    return Err(Error::input("matrix", reason));
                }
                Err(e) => return Err(e),
            };
            let report = PolarReport {
                p: *p,
                reconstruction_error: pd.reconstruction_error(&beta),
                groups: pd.columns.iter().map(|c| c.rows.clone()).collect(),
                pivots: pd.columns.iter().map(|c| c.pivot).collect(),
                tau: pd.tau,
                beta0: pd.beta0,
                lambda: pd.lambda,
            };
            emit(g, &report)?;
            Ok(0)
        }
        Command::Factnorm { which, p, matrix, rmax, restarts, iterations } => {
            let v = load_matrix(matrix, "matrix")?;
            if !v.is_square() {
                return Err(Error::input("matrix", format!("expected a square matrix, got {}x{}", v.rows(), v.cols())));
            }
            let opts = FactnormOptions { r_max: *rmax, restarts: *restarts, iterations: *iterations, seed: g.seed };
            let report = if *which == 1 {
                let s = factnorm1(&v, p, &opts)?;
                let upper = s.estimate.upper.expect("sandwich upper");
                FactnormReport {
                    which: 1,
                    p: *p,
                    n: v.rows(),
                    lower: s.estimate.lower,
                    upper,
                    gap: upper - s.estimate.lower,
                    best_r: s.factorization.r,
                    factorization: serde_json::to_value(&s.factorization)?,
                    witness: serde_json::to_value(&s.witness)?,
                    seed: g.seed,
                }
            } else {
                let (est, sq) = factnorm2_upper(&v, p, &opts)?;
                let lo = factnorm1_lower(&v, p, &opts)?;
                let upper = est.upper.expect("search upper");
                let lower = lo.witness.bound().min(upper);
                FactnormReport {
                    which: 2,
                    p: *p,
                    n: v.rows(),
                    lower,
                    upper,
                    gap: upper - lower,
                    best_r: v.rows(),
                    factorization: serde_json::to_value(&sq)?,
                    witness: serde_json::to_value(&lo.witness)?,
                    seed: g.seed,
                }
            };
            emit(g, &report)?;
            Ok(0)
        }
        Command::Colnorm { p, matrix, subspace, m, restarts } => {
            let stacked = load_matrix(matrix, "matrix")?;
            let space = match subspace {
                Some(path) => Some(SubspaceEmbedding::new(load_matrix(path, "subspace")?, *p)?),
                None => None,
            };
            let m = match (m, &space) {
                (_, Some(s)) => s.ambient_dim,
                (Some(m), None) => *m,
                (None, None) => return Err(Error::input("m", "give --m or --subspace")),
            };
            let n = stacked.cols();
            if stacked.rows() != n * m {
                return Err(Error::input(
                    "matrix",
                    format!("expected {} rows for n = {n}, m = {m}, got {}", n * m, stacked.rows()),
                ));
            }
            let mut entries = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    entries.push((0..m).map(|a| stacked[(i * m + a, j)]).collect());
                }
            }
            let x = ColumnMatrix::new(n, m, entries)?;
            if let Some(s) = &space {
                x.validate(s)?;
            }
            let est = col_matrix_norm(&x, p, *restarts, g.seed)?;
            let upper = est.upper.expect("column norm upper");
            emit(g, &ColnormReport { p: *p, n, m, lower: est.lower, upper, gap: upper - est.lower, seed: g.seed })?;
            Ok(0)
        }
        Command::Counterexample { p, subspace, nmax, trials, restarts, iterations } => {
            let space = SubspaceEmbedding::new(load_matrix(subspace, "subspace")?, *p)?;
            let opts = CounterexampleOptions {
                n_max: *nmax,
                trials: *trials,
                tol: g.tol.unwrap_or(1e-6),
                projection: ProjectionOptions { restarts: *restarts, iterations: *iterations, seed: g.seed },
            };
            let rep = counterexample_report(&space, &opts)?;
            let code = if rep.phi_psi.passed() { 0 } else { 2 };
            let out = CounterexampleOut {
                p: *p,
                phi_psi: serde_json::to_value(&rep.phi_psi)?,
                projection: ProjectionOut {
                    best_value: rep.projection.best_value,
                    best_projection_lower: rep.projection.best_projection_lower,
                    p: rep.projection.projection,
                    idempotency_error: rep.projection.idempotency_error,
                    range_error: rep.projection.range_error,
                },
                flags: serde_json::to_value(&rep.flags)?,
            };
            emit(g, &out)?;
            Ok(code)
        }
        Command::Verify { suite, p, nmax, trials, restarts, iterations, samples } => {
            let campaign = Campaign {
                suite: *suite,
                p_list: p.clone(),
                n_max: *nmax,
                trials: *trials,
                seed: g.seed,
                budgets: Budgets { restarts: *restarts, iterations: *iterations, samples: *samples },
                tol: g.tol.unwrap_or(1e-9),
            };
            let started = Instant::now();
            let report = run_campaign(&campaign)?;
            let json = report.to_json()?;
            let csv = report.summary_csv()?;
            match &g.out {
                Some(dir) => {
                    fs::create_dir_all(dir).map_err(|e| Error::input("out", format!("{}: {e}", dir.display())))?;
                    write_atomic(&dir.join(format!("{suite}.json")), json.as_bytes())?;
                    write_atomic(&dir.join(format!("{suite}.csv")), csv.as_bytes())?;
                }
                None => match g.format {
                    Format::Json => print!("{json}"),
                    Format::Csv => print!("{csv}"),
                },
            }
            let s = &report.summary;
            eprintln!(
                "{suite}: {} cases in {} cells, {} violations, {} findings ({} inconclusive), {:.2?}",
                s.cases,
                s.cells,
                s.violations,
                s.findings,
                s.inconclusive_findings,
                started.elapsed()
            );
            Ok(report.exit_code())
        }
        Command::ExtensionGap { p, vbasis, images, level, samples, iterations, restarts } => {
            let basis = load_matrix_list(vbasis, "vbasis")?;
            let imgs = load_matrix_list(images, "images")?;
            let problem = ExtensionProblem::new(basis, imgs)?;
            let opts = ExtensionOptions { samples: *samples, iterations: *iterations, restarts: *restarts, seed: g.seed };
            let rep = extension_gap(&problem, p, *level, &opts)?;
            emit(g, &rep)?;
            Ok(if !rep.consistent {
                2
            } else if rep.label == GapLabel::Closed {
                0
            } else {
                3
            })
        }
    }
}
