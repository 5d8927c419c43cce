//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails. CLI invocations are recorded and replayed for the
//! determinism criterion.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::Value;

use popspace::colspace::{projection_constant, ProjectionOptions, SubspaceEmbedding};
use popspace::factnorm::{direct_sum_combine, factnorm1, Factorization, FactnormOptions};
use popspace::isometry::{is_lp_isometry, is_polar_decomposable, polar_decompose, random_lp_isometry, DEFAULT_TOL};
use popspace::pnorms::{opnorm_lower, opnorm_oracle_small};
use popspace::random::{derive_seed, gaussian_matrix, gaussian_vector, real_gaussian_matrix, rng};
use popspace::{Exponent, Matrix, C64};

const BIN: &str = env!("CARGO_BIN_EXE_popspace");
const SEED: u64 = 42;

fn ex(p: f64) -> Exponent {
    Exponent::new(p).unwrap()
}

/// `(Σ|x_i|^q)^{1/q}` written out directly.
fn lp_oracle(x: &[C64], q: f64) -> f64 {
    x.iter().map(|z| z.norm().powf(q)).sum::<f64>().powf(1.0 / q)
}

fn singular_values_oracle(a: &Matrix) -> Vec<f64> {
    let m = DMatrix::from_row_slice(a.rows(), a.cols(), a.data());
    let m: DMatrix<Complex64> = m.map(|z| Complex64::new(z.re, z.im));
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

fn write_matrix(dir: &Path, name: &str, m: &Matrix) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string(m).unwrap()).unwrap();
    path
}

/// One CLI call: arguments and where its report lands.
struct Invocation {
    args: Vec<String>,
    /// Output file names written under `--out` (a directory for `verify`).
    outputs: Vec<String>,
    dir_out: bool,
}

struct Cli {
    work: tempfile::TempDir,
    log: Vec<Invocation>,
    runs: usize,
}

impl Cli {
    fn new() -> Self {
        Cli { work: tempfile::tempdir().unwrap(), log: Vec::new(), runs: 0 }
    }

    fn path(&self) -> &Path {
        self.work.path()
    }

    fn exec(&mut self, inv: &Invocation) -> (i32, Vec<Vec<u8>>) {
        self.runs += 1;
        let out = self.path().join(format!("run{}", self.runs));
        if inv.dir_out {
            fs::create_dir_all(&out).unwrap();
        }
        let target = if inv.dir_out { out.clone() } else { out.join(&inv.outputs[0]) };
        if !inv.dir_out {
            fs::create_dir_all(&out).unwrap();
        }
        let status = Command::new(BIN)
            .args(&inv.args)
            .arg("--out")
            .arg(&target)
            .output()
            .expect("run popspace");
        let code = status.status.code().unwrap_or(-1);
        let files = inv.outputs.iter().map(|f| fs::read(out.join(f)).unwrap_or_default()).collect();
        (code, files)
    }

    /// Runs and records a call writing a single report file.
    fn report(&mut self, args: &[&str]) -> (i32, Value) {
        let inv = Invocation {
            args: args.iter().map(|s| s.to_string()).collect(),
            outputs: vec!["report.json".into()],
            dir_out: false,
        };
        let (code, files) = self.exec(&inv);
        self.log.push(inv);
        let v = serde_json::from_slice(&files[0]).unwrap_or(Value::Null);
        (code, v)
    }

    /// Runs and records a `verify` campaign.
    fn verify(&mut self, suite: &str, rest: &[&str]) -> (i32, Value) {
        let mut args = vec!["verify".to_string(), "--suite".into(), suite.into()];
        args.extend(rest.iter().map(|s| s.to_string()));
        let inv = Invocation { args, outputs: vec![format!("{suite}.json"), format!("{suite}.csv")], dir_out: true };
        let (code, files) = self.exec(&inv);
        self.log.push(inv);
        let v = serde_json::from_slice(&files[0]).unwrap_or(Value::Null);
        (code, v)
    }
}

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn violations(report: &Value) -> u64 {
    report["summary"]["violations"].as_u64().unwrap_or(u64::MAX)
}

fn cases(report: &Value) -> u64 {
    report["summary"]["cases"].as_u64().unwrap_or(0)
}

fn criterion_1(cli: &mut Cli) -> Outcome {
    let ps = "1.2,1.5,2,3,4";
    let seed = SEED.to_string();
    let runs = [
        ("p-comparison", vec!["--p", ps, "--nmax", "8", "--trials", "10000", "--seed", &seed]),
        ("opnorm-bounds", vec!["--p", ps, "--nmax", "4", "--trials", "1000", "--seed", &seed]),
        (
            "norm1-axioms",
            vec!["--p", ps, "--nmax", "4", "--trials", "250", "--seed", &seed, "--restarts", "1", "--iterations", "40"],
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (suite, args) in runs {
        let (code, rep) = cli.verify(suite, &args);
        let v = violations(&rep);
        ok &= code == 0 && v == 0;
        parts.push(format!("{suite}: {} cases, {v} violations", cases(&rep)));
    }
    outcome(ok, parts.join("; "))
}

fn criterion_2(cli: &mut Cli) -> Outcome {
    let e = ex(2.0);
    let mut r = rng(derive_seed(SEED, 2));
    let opts = FactnormOptions::default();
    let mut worst_trace = 0.0f64;
    let mut bracket = true;
    for t in 0..100 {
        let n = 3 + t % 2;
        let v = gaussian_matrix(&mut r, n, n);
        let trace: f64 = singular_values_oracle(&v).iter().sum();
        let s = factnorm1(&v, &e, &FactnormOptions { seed: derive_seed(SEED, t as u64), ..opts.clone() }).unwrap();
        let (lo, up) = (s.estimate.lower, s.estimate.upper.unwrap());
        bracket &= lo <= trace * (1.0 + 1e-9) && up >= trace * (1.0 - 1e-9);
        worst_trace = worst_trace.max((up - trace) / trace).max((trace - lo) / trace);
    }
    let mut worst_sigma = 0.0f64;
    for t in 0..100 {
        let (rows, cols) = (1 + t % 8, 1 + (t / 8) % 8);
        let a = gaussian_matrix(&mut r, rows, cols);
        let smax = singular_values_oracle(&a)[0];
        let lo = opnorm_lower(&a, &e, 4, 1e-14, derive_seed(SEED, 1000 + t as u64)).unwrap().lower;
        worst_sigma = worst_sigma.max((lo - smax).abs() / smax);
    }
    let id = write_matrix(cli.path(), "c2.json", &gaussian_matrix(&mut r, 3, 3));
    let (code, rep) = cli.report(&["opnorm", "--p", "2", "--matrix", id.to_str().unwrap()]);
    let cli_ok = code == 0 && rep["lower"].as_f64().is_some();
    outcome(
        bracket && worst_trace <= 0.02 && worst_sigma <= 1e-8 && cli_ok,
        format!("trace-norm rel. error {worst_trace:.2e}, sigma_max rel. error {worst_sigma:.2e}"),
    )
}

fn criterion_3(cli: &mut Cli) -> Outcome {
    let mut r = rng(derive_seed(SEED, 3));
    let mut ok = true;
    let mut worst = 0.0f64;
    let opts = FactnormOptions::default();
    for p in [1.5, 3.0, 4.0] {
        let e = ex(p);
        for n in 1..=4 {
            let s = factnorm1(&Matrix::identity(n), &e, &opts).unwrap();
            let (lo, up) = (s.estimate.lower, s.estimate.upper.unwrap());
            let exact = n as f64;
            let err = (up - lo).max((up - exact).abs()).max((lo - exact).abs()) / exact;
            worst = worst.max(err);
            ok &= up - lo <= 1e-4 * exact && lo <= exact * (1.0 + 1e-12) && up >= exact * (1.0 - 1e-12);

            let x = gaussian_vector(&mut r, n);
            let y = gaussian_vector(&mut r, n);
            let v = Matrix::outer(&x, &y);
            let exact = lp_oracle(&x, e.conj()) * lp_oracle(&y, p);
            let s = factnorm1(&v, &e, &opts).unwrap();
            let (lo, up) = (s.estimate.lower, s.estimate.upper.unwrap());
            let err = (up - lo).max((up - exact).abs()).max((lo - exact).abs()) / exact;
            worst = worst.max(err);
            ok &= up - lo <= 1e-4 * exact && lo <= exact * (1.0 + 1e-9) && up >= exact * (1.0 - 1e-9);
        }
    }
    let id = write_matrix(cli.path(), "id3.json", &Matrix::identity(3));
    let (code, rep) = cli.report(&["factnorm", "--which", "1", "--p", "3", "--matrix", id.to_str().unwrap()]);
    let gap = rep["gap"].as_f64().unwrap_or(f64::INFINITY);
    ok &= code == 0 && gap <= 3e-4;
    outcome(ok, format!("worst relative deviation {worst:.2e}; CLI gap on I_3 {gap:.2e}"))
}

fn criterion_4(cli: &mut Cli) -> Outcome {
    let mut r = rng(derive_seed(SEED, 4));
    let mut worst_rec = 0.0f64;
    let mut worst_norm = 0.0f64;
    let mut iso_ok = true;
    let mut count = 0;
    for t in 0..1000 {
        let p = [1.5, 3.0, 4.0][t % 3];
        let e = ex(p);
        let n = 1 + t % 4;
        let rows = n + (t / 4) % (9 - n);
        let tau = random_lp_isometry(&mut r, rows, n, p, 0.2);
        let beta0 = real_gaussian_matrix(&mut r, n, n);
        let beta = tau.matmul(&beta0);
        let pd = polar_decompose(&beta, &e, DEFAULT_TOL).unwrap();
        let rec = pd.tau.matmul(&pd.beta0);
        worst_rec = worst_rec.max(rec.sub(&beta).max_abs() / beta.max_abs());
        let (a, b) = (lp_oracle(beta.data(), p), lp_oracle(rec.data(), p));
        worst_norm = worst_norm.max((a - b).abs() / a);
        iso_ok &= is_lp_isometry(&pd.tau, &e, DEFAULT_TOL).unwrap().is_isometry;
        count += 1;
    }
    let mut rejected = 0;
    let trials = 1000;
    for t in 0..trials {
        let n = 2 + t % 3;
        let rows = n + 1 + t % (8 - n);
        let beta = gaussian_matrix(&mut r, rows, n);
        if !is_polar_decomposable(&beta, &ex(3.0), DEFAULT_TOL).decomposable {
            rejected += 1;
        }
    }
    let beta = write_matrix(cli.path(), "beta.json", &Matrix::from_real_rows(&[[1.0, 0.0], [2.0, 0.0], [0.0, 3.0]]));
    let (code, rep) = cli.report(&["polar", "--p", "3", "--matrix", beta.to_str().unwrap()]);
    let cli_ok = code == 0 && rep["reconstruction_error"].as_f64().is_some_and(|x| x <= 1e-10);
    let (code, rep) = cli.verify("polar-roundtrip", &["--p", "1.5,3,4", "--nmax", "4", "--trials", "100"]);
    let suite_ok = code == 0 && violations(&rep) == 0;
    outcome(
        worst_rec <= 1e-10 && worst_norm <= 1e-10 && iso_ok && rejected == trials && cli_ok && suite_ok,
        format!(
            "{count} round trips, reconstruction {worst_rec:.1e}, norm {worst_norm:.1e}; {rejected}/{trials} generic matrices rejected"
        ),
    )
}

fn criterion_5(cli: &mut Cli) -> Outcome {
    let mut r = rng(derive_seed(SEED, 5));
    let mut worst_op = 0.0f64;
    let mut worst_x = 0.0f64;
    let mut passing = 0;
    for t in 0..60 {
        let p = [1.5, 3.0, 4.0][t % 3];
        let e = ex(p);
        let n = 1 + t % 3;
        let rows = n + (t / 3) % 4;
        // Isometries plus a few random matrices that must not slip through.
        let tau = if t % 10 == 9 { gaussian_matrix(&mut r, rows, n) } else { random_lp_isometry(&mut r, rows, n, p, 0.25) };
        if !is_lp_isometry(&tau, &e, DEFAULT_TOL).unwrap().is_isometry {
            continue;
        }
        passing += 1;
        worst_op = worst_op.max((opnorm_oracle_small(&tau, &e, 24).unwrap() - 1.0).abs());
        for _ in 0..1000 {
            let x = gaussian_vector(&mut r, n);
            let (a, b) = (lp_oracle(&tau.matvec(&x), p), lp_oracle(&x, p));
            worst_x = worst_x.max((a - b).abs() / b);
        }
    }
    let tau = write_matrix(cli.path(), "tau.json", &random_lp_isometry(&mut r, 5, 3, 3.0, 0.2));
    let (code, rep) = cli.report(&["isometry-check", "--p", "3", "--matrix", tau.to_str().unwrap()]);
    let cli_ok = code == 0 && rep["is_isometry"] == Value::Bool(true);
    outcome(
        passing > 0 && worst_op <= 1e-4 && worst_x <= 1e-10 && cli_ok,
        format!("{passing} isometries, |oracle - 1| {worst_op:.1e}, norm deviation {worst_x:.1e}"),
    )
}

fn criterion_6(cli: &mut Cli) -> Outcome {
    let (code, rep) = cli.verify("phi-psi", &["--p", "1.5,3", "--nmax", "3", "--trials", "20", "--samples", "20"]);
    let mut ok = code == 0 && violations(&rep) == 0;
    let mut parts = vec![format!("phi-psi: {} cases, {} violations", cases(&rep), violations(&rep))];

    let opts = ProjectionOptions::default();
    let mut worst_unit = 0.0f64;
    let coordinate = Matrix::from_real_rows(&[[1.0, 0.0], [0.0, 0.0], [0.0, 1.0], [0.0, 0.0]]);
    for p in [1.5, 3.0, 4.0] {
        let sp = SubspaceEmbedding::new(coordinate.clone(), ex(p)).unwrap();
        worst_unit = worst_unit.max((projection_constant(&sp, &opts).unwrap().best_value - 1.0).abs());
    }
    let mut r = rng(derive_seed(SEED, 6));
    let q = real_gaussian_matrix(&mut r, 4, 2).svd().u;
    let sp = SubspaceEmbedding::new(q, ex(2.0)).unwrap();
    worst_unit = worst_unit.max((projection_constant(&sp, &opts).unwrap().best_value - 1.0).abs());
    ok &= worst_unit <= 1e-6;
    parts.push(format!("unit projections within {worst_unit:.1e}"));

    let basis = Matrix::from_real_rows(&[[1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, -1.0]]);
    let sub = write_matrix(cli.path(), "sub.json", &basis);
    let mut values = Vec::new();
    for seed in [11u64, 12, 13] {
        let (code, rep) = cli.report(&[
            "counterexample",
            "--p",
            "4",
            "--subspace",
            sub.to_str().unwrap(),
            "--nmax",
            "2",
            "--trials",
            "5",
            "--seed",
            &seed.to_string(),
        ]);
        ok &= code == 0;
        values.push(rep["projection"]["bestValue"].as_f64().unwrap_or(f64::NAN));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ok &= lo >= 1.0 && hi <= lo * 1.01;
    parts.push(format!("p = 4 projection norm {lo:.6}..{hi:.6} over 3 seeds"));
    outcome(ok, parts.join("; "))
}

fn criterion_7(cli: &mut Cli) -> Outcome {
    let (code, rep) = cli.verify(
        "norm1-vs-norm2",
        &["--p", "1.5,3,4", "--nmax", "3", "--trials", "20", "--restarts", "1", "--iterations", "40"],
    );
    let mut ok = (code == 0 || code == 3) && violations(&rep) == 0;
    let sampled = cases(&rep);
    let mut r = rng(derive_seed(SEED, 7));
    let mut worst = f64::NEG_INFINITY;
    for t in 0..1000 {
        let e = ex([1.5, 3.0, 4.0][t % 3]);
        let mut factor = |n: usize| {
            let rr = 1 + t % 4;
            Factorization::new(
                gaussian_matrix(&mut r, n, rr),
                gaussian_matrix(&mut r, rr, rr),
                gaussian_matrix(&mut r, rr, n),
                &e,
            )
            .unwrap()
        };
        let (f1, f2) = (factor(1 + t % 3), factor(1 + (t / 3) % 3));
        let ds = direct_sum_combine(&f1, &f2, &e).unwrap();
        worst = worst.max(ds.value - (f1.value + f2.value));
    }
    ok &= worst <= 1e-9;
    outcome(ok, format!("norm1-vs-norm2: {sampled} cases, {} violations; direct sum excess {worst:.1e}", violations(&rep)))
}

fn criterion_8(cli: &mut Cli) -> Outcome {
    let log = std::mem::take(&mut cli.log);
    let mut mismatched = Vec::new();
    let mut first = Vec::new();
    for inv in &log {
        first.push(cli.exec(inv));
    }
    for (inv, a) in log.iter().zip(first) {
        let b = cli.exec(inv);
        if a != b || a.1.iter().any(|f| f.is_empty()) {
            mismatched.push(inv.args[0].clone());
        }
    }
    outcome(mismatched.is_empty(), format!("{} invocations replayed, mismatches: {mismatched:?}", log.len()))
}

fn main() {
    let mut cli = Cli::new();
    let criteria: [(&str, fn(&mut Cli) -> Outcome); 8] = [
        ("1 inequality sweeps", criterion_1),
        ("2 p = 2 calibration", criterion_2),
        ("3 closed-form closure", criterion_3),
        ("4 polar round trip", criterion_4),
        ("5 isometry cross-check", criterion_5),
        ("6 column-space harness", criterion_6),
        ("7 ordering and subadditivity", criterion_7),
        ("8 determinism", criterion_8),
    ];
    let mut failed = Vec::new();
    for (name, f) in criteria {
        let start = Instant::now();
        let o = f(&mut cli);
        let tag = if o.ok { "PASS" } else { "FAIL" };
        println!("{tag} criterion {name}: {} ({:.1?})", o.detail, start.elapsed());
        if !o.ok {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
