//! Seeded verification campaigns.
//!
//! A [`Campaign`] sweeps one suite over a grid of exponents and sizes. Each
//! grid cell draws its inputs from a seed derived from the campaign seed,
//! the exponent and the size, so cells can run in parallel and the report
//! is a pure function of the campaign. Asserted checks always compare a
//! certified lower bound against a certified upper bound. Exploratory
//! suites additionally record findings, which never count as violations.

pub mod extension;

use std::collections::BTreeMap;
use std::fmt;
use std::hash::Hasher;
use std::str::FromStr;

use fnv::FnvHasher;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::colspace::{check_phi_psi_at, SubspaceEmbedding};
use crate::error::{Error, Result};
use crate::factnorm::{
    direct_sum_combine, factnorm1, factnorm1_upper, factnorm2_upper, sum_combine, FactnormOptions, RECONSTRUCTION_TOL,
};
use crate::io::format_g17;
use crate::isometry::{is_lp_isometry, is_polar_decomposable, polar_decompose, random_lp_isometry};
use crate::matrix::Matrix;
use crate::pnorms::{check_opnorm_bounds, lp, opnorm_lower, opnorm_upper, Exponent};
use crate::random::{self, derive_seed, Ensemble, SeededRng};

pub use extension::{extension_gap, ExtensionGapReport, ExtensionOptions, ExtensionProblem, GapLabel};

/// Relative tolerance for reconstruction and norm preservation in the
/// polar round-trip suite.
pub const POLAR_TOL: f64 = 1e-10;

/// Ambient dimension and subspace dimension used by the `phi-psi` suite.
pub const PHI_PSI_SHAPE: (usize, usize) = (4, 2);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    PComparison,
    OpnormBounds,
    Norm1Axioms,
    Norm1VsNorm2,
    Norm2TriangleSearch,
    PolarRoundtrip,
    PhiPsi,
    ExtensionGap,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::PComparison,
        Suite::OpnormBounds,
        Suite::Norm1Axioms,
        Suite::Norm1VsNorm2,
        Suite::Norm2TriangleSearch,
        Suite::PolarRoundtrip,
        Suite::PhiPsi,
        Suite::ExtensionGap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::PComparison => "p-comparison",
            Suite::OpnormBounds => "opnorm-bounds",
            Suite::Norm1Axioms => "norm1-axioms",
            Suite::Norm1VsNorm2 => "norm1-vs-norm2",
            Suite::Norm2TriangleSearch => "norm2-triangle-search",
            Suite::PolarRoundtrip => "polar-roundtrip",
            Suite::PhiPsi => "phi-psi",
            Suite::ExtensionGap => "extension-gap",
        }
    }

    /// Suites that search open questions; their findings are not failures.
    pub fn is_exploratory(self) -> bool {
        matches!(self, Suite::Norm1VsNorm2 | Suite::Norm2TriangleSearch | Suite::ExtensionGap)
    }

    fn stream(self) -> u64 {
        Suite::ALL.iter().position(|&s| s == self).expect("listed") as u64
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| {
            let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
            Error::input("suite", format!("unknown suite {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// Restart and iteration limits handed to the estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub restarts: usize,
    pub iterations: usize,
    /// Inner samples per case (`phi-psi`, `extension-gap`).
    pub samples: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets { restarts: 2, iterations: 60, samples: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Campaign {
    pub suite: Suite,
    pub p_list: Vec<Exponent>,
    /// Largest size; for `extension-gap` the largest level.
    pub n_max: usize,
    /// Cases per grid cell.
    pub trials: usize,
    pub seed: u64,
    pub budgets: Budgets,
    /// Relative slack allowed before `lower > upper` counts as a violation.
    pub tol: f64,
}

impl Campaign {
    /// Defaults: `p ∈ {1.5, 3}`, sizes up to 3, 100 trials, seed 42.
    pub fn new(suite: Suite) -> Self {
        Campaign {
            suite,
            p_list: vec![Exponent::new(1.5).expect("valid"), Exponent::new(3.0).expect("valid")],
            n_max: 3,
            trials: 100,
            seed: 42,
            budgets: Budgets::default(),
            tol: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p_list.is_empty() {
            return Err(Error::input("p", "empty exponent list"));
        }
        if self.n_max == 0 {
            return Err(Error::input("nmax", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::input("trials", "must be at least 1"));
        }
        let b = &self.budgets;
        if b.restarts == 0 || b.iterations == 0 || b.samples == 0 {
            return Err(Error::input("budgets", "restarts, iterations and samples must be positive"));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::input("tol", "must be a finite non-negative number"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NamedInput {
    pub name: String,
    pub value: Matrix,
}

fn named(name: &str, value: &Matrix) -> NamedInput {
    NamedInput { name: name.into(), value: value.clone() }
}

/// A certified lower bound above a certified upper bound, with everything
/// needed to replay the case.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Violation {
    pub check: String,
    pub p: Exponent,
    pub n: usize,
    pub trial: usize,
    /// Seed of the case generator: `derive_seed(cell_seed, trial)`.
    pub trial_seed: u64,
    pub lower: f64,
    pub upper: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    pub inputs: Vec<NamedInput>,
}

/// A recorded observation of an exploratory suite.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Finding {
    pub kind: String,
    pub p: Exponent,
    pub n: usize,
    pub trial: usize,
    pub trial_seed: u64,
    /// Estimator slack cannot be excluded.
    pub inconclusive: bool,
    pub values: BTreeMap<String, f64>,
    pub inputs: Vec<NamedInput>,
}

/// Aggregate over the cases of one `(p, n)` cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellRecord {
    pub p: Exponent,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// FNV-1a digest of every sampled input, in hex.
    pub inputs_hash: String,
    /// Largest `lower / upper` over asserted checks; `None` if the suite
    /// asserts nothing.
    pub worst_ratio: Option<f64>,
    pub values: BTreeMap<String, f64>,
    pub violations: usize,
    pub findings: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub cells: usize,
    pub cases: usize,
    pub violations: usize,
    pub findings: usize,
    pub inconclusive_findings: usize,
    pub worst_ratio: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CampaignReport {
    pub suite: Suite,
    pub exploratory: bool,
    pub campaign: Campaign,
    pub cells: Vec<CellRecord>,
    pub violations: Vec<Violation>,
    pub findings: Vec<Finding>,
    pub summary: Summary,
}

impl CampaignReport {
    /// 0 clean, 2 violations, 3 inconclusive findings only.
    pub fn exit_code(&self) -> i32 {
        if !self.violations.is_empty() {
            2
        } else if self.summary.inconclusive_findings > 0 {
            3
        } else {
            0
        }
    }

    pub fn to_json(&self) -> Result<String> {
        crate::io::to_json_string(self)
    }

    /// One CSV row per cell; value columns are the union of cell keys.
    pub fn summary_csv(&self) -> Result<String> {
        let keys: Vec<String> = {
            let mut k: Vec<String> = self.cells.iter().flat_map(|c| c.values.keys().cloned()).collect();
            k.sort();
            k.dedup();
            k
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["suite", "p", "n", "trials", "seed", "inputs_hash", "worst_ratio", "violations", "findings"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<_>>();
        header.extend(keys.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for c in &self.cells {
            let mut row = vec![
                self.suite.name().to_string(),
                format_g17(c.p.p()),
                c.n.to_string(),
                c.trials.to_string(),
                c.seed.to_string(),
                c.inputs_hash.clone(),
                c.worst_ratio.map(format_g17).unwrap_or_default(),
                c.violations.to_string(),
                c.findings.to_string(),
            ];
            row.extend(keys.iter().map(|k| c.values.get(k).map(|&x| format_g17(x)).unwrap_or_default()));
            w.write_record(&row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields"))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Internal(format!("csv: {e}"))
}

/// Per-cell accumulator.
struct Cell {
    p: Exponent,
    n: usize,
    seed: u64,
    tol: f64,
    hash: FnvHasher,
    worst_ratio: Option<f64>,
    values: BTreeMap<String, f64>,
    violations: Vec<Violation>,
    findings: Vec<Finding>,
    trial: usize,
    trial_seed: u64,
}

impl Cell {
    fn new(p: Exponent, n: usize, seed: u64, tol: f64) -> Self {
        Cell {
            p,
            n,
            seed,
            tol,
            hash: FnvHasher::default(),
            worst_ratio: None,
            values: BTreeMap::new(),
            violations: Vec::new(),
            findings: Vec::new(),
            trial: 0,
            trial_seed: 0,
        }
    }

    /// Starts case `t` and returns its generator.
    fn case(&mut self, t: usize) -> SeededRng {
        self.trial = t;
        self.trial_seed = derive_seed(self.seed, t as u64);
        random::rng(self.trial_seed)
    }

    fn absorb(&mut self, m: &Matrix) {
        self.hash.write_usize(m.rows());
        self.hash.write_usize(m.cols());
        for z in m.data() {
            self.hash.write_u64(z.re.to_bits());
            self.hash.write_u64(z.im.to_bits());
        }
    }

    fn max(&mut self, key: &str, x: f64) {
        let e = self.values.entry(key.to_string()).or_insert(f64::NEG_INFINITY);
        *e = e.max(x);
    }

    fn min(&mut self, key: &str, x: f64) {
        let e = self.values.entry(key.to_string()).or_insert(f64::INFINITY);
        *e = e.min(x);
    }

    fn add(&mut self, key: &str, x: f64) {
        *self.values.entry(key.to_string()).or_insert(0.0) += x;
    }

    /// Asserts `lower ≤ upper·(1 + tol)`.
    fn check(&mut self, name: &str, lower: f64, upper: f64, inputs: impl FnOnce() -> Vec<NamedInput>) {
        let ratio = if upper > 0.0 {
            lower / upper
        } else if lower > 0.0 || lower.is_nan() {
            f64::INFINITY
        } else {
            0.0
        };
        let r = ratio.min(f64::MAX);
        self.worst_ratio = Some(self.worst_ratio.map_or(r, |w| w.max(r)));
        if !(lower <= upper * (1.0 + self.tol)) {
            self.fail(name, lower, upper, inputs());
        }
    }

    fn fail(&mut self, name: &str, lower: f64, upper: f64, inputs: Vec<NamedInput>) {
        self.violations.push(Violation {
            check: name.into(),
            p: self.p,
            n: self.n,
            trial: self.trial,
            trial_seed: self.trial_seed,
            lower,
            upper,
            detail: None,
            inputs,
        });
    }

    fn find(&mut self, kind: &str, inconclusive: bool, values: &[(&str, f64)], inputs: Vec<NamedInput>) {
        self.findings.push(Finding {
            kind: kind.into(),
            p: self.p,
            n: self.n,
            trial: self.trial,
            trial_seed: self.trial_seed,
            inconclusive,
            values: values.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            inputs,
        });
    }

    fn finish(self, trials: usize) -> (CellRecord, Vec<Violation>, Vec<Finding>) {
        let values = self.values.into_iter().filter(|(_, v)| v.is_finite()).collect();
        let record = CellRecord {
            p: self.p,
            n: self.n,
            trials,
            seed: self.seed,
            inputs_hash: format!("{:016x}", self.hash.finish()),
            worst_ratio: self.worst_ratio,
            values,
            violations: self.violations.len(),
            findings: self.findings.len(),
        };
        (record, self.violations, self.findings)
    }
}

fn cell_seed(c: &Campaign, p: &Exponent, n: usize) -> u64 {
    derive_seed(derive_seed(derive_seed(c.seed, c.suite.stream()), p.p().to_bits()), n as u64)
}

/// Seed that depends on the exponent and trial but not on the size, so
/// the same instances are examined at every size.
fn instance_seed(c: &Campaign, p: &Exponent, t: usize) -> u64 {
    derive_seed(derive_seed(derive_seed(c.seed, 100 + c.suite.stream()), p.p().to_bits()), t as u64)
}

fn factnorm_opts(c: &Campaign, seed: u64) -> FactnormOptions {
    FactnormOptions { r_max: None, restarts: c.budgets.restarts, iterations: c.budgets.iterations, seed }
}

/// Runs every case of the campaign. Cells run in parallel and are reduced
/// in grid order, so the report does not depend on scheduling.
pub fn run_campaign(c: &Campaign) -> Result<CampaignReport> {
    c.validate()?;
    let grid: Vec<(Exponent, usize)> =
        c.p_list.iter().flat_map(|p| (1..=c.n_max).map(move |n| (*p, n))).collect();
    let outcomes = grid
        .par_iter()
        .map(|(p, n)| run_cell(c, p, *n))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::with_capacity(outcomes.len());
    let mut violations = Vec::new();
    let mut findings = Vec::new();
    for (rec, v, f) in outcomes {
        cells.push(rec);
        violations.extend(v);
        findings.extend(f);
    }
    let worst_ratio = cells.iter().filter_map(|c| c.worst_ratio).reduce(f64::max);
    let summary = Summary {
        cells: cells.len(),
        cases: cells.iter().map(|c| c.trials).sum(),
        violations: violations.len(),
        findings: findings.len(),
        inconclusive_findings: findings.iter().filter(|f| f.inconclusive).count(),
        worst_ratio,
        passed: violations.is_empty(),
    };
    Ok(CampaignReport {
        suite: c.suite,
        exploratory: c.suite.is_exploratory(),
        campaign: c.clone(),
        cells,
        violations,
        findings,
        summary,
    })
}

fn run_cell(c: &Campaign, p: &Exponent, n: usize) -> Result<(CellRecord, Vec<Violation>, Vec<Finding>)> {
    let mut cell = Cell::new(*p, n, cell_seed(c, p, n), c.tol);
    for t in 0..c.trials {
        match c.suite {
            Suite::PComparison => p_comparison_case(&mut cell, t),
            Suite::OpnormBounds => opnorm_bounds_case(&mut cell, c, t)?,
            Suite::Norm1Axioms => norm1_axioms_case(&mut cell, c, t)?,
            Suite::Norm1VsNorm2 => norm1_vs_norm2_case(&mut cell, c, t)?,
            Suite::Norm2TriangleSearch => norm2_triangle_case(&mut cell, c, t)?,
            Suite::PolarRoundtrip => polar_case(&mut cell, c, t)?,
            Suite::PhiPsi => phi_psi_case(&mut cell, c, t)?,
            Suite::ExtensionGap => extension_case(&mut cell, c, t)?,
        }
    }
    Ok(cell.finish(c.trials))
}

fn p_comparison_case(cell: &mut Cell, t: usize) {
    let (e, n) = (cell.p, cell.n);
    let mut rng = cell.case(t);
    let lambda = Ensemble::cycle(t).vector(&mut rng, n);
    let m = Matrix::column(&lambda);
    cell.absorb(&m);
    let lhs = lp(&lambda, e.p());
    let rhs = (n as f64).powf(e.delta()) * lp(&lambda, e.conj());
    cell.max("max_ratio", lhs / rhs);
    cell.check("p-comparison", lhs, rhs, || vec![named("lambda", &m)]);
}

fn opnorm_bounds_case(cell: &mut Cell, c: &Campaign, t: usize) -> Result<()> {
    let (e, n) = (cell.p, cell.n);
    let mut rng = cell.case(t);
    let r = 1 + t % c.n_max;
    let alpha = Ensemble::cycle(t).matrix(&mut rng, n, r);
    cell.absorb(&alpha);
    let rep = check_opnorm_bounds(&alpha, &e, c.budgets.restarts, rng.random())?;
    let inputs = || vec![named("alpha", &alpha)];
    cell.check("alpha-bound", rep.alpha_lower, rep.alpha_bound, inputs);
    cell.check("beta-bound", rep.beta_lower, rep.beta_bound, inputs);
    cell.check("estimator-sandwich", rep.alpha_lower, opnorm_upper(&alpha, &e), inputs);
    cell.max("max_ratio", rep.worst_ratio());
    Ok(())
}

fn norm1_axioms_case(cell: &mut Cell, c: &Campaign, t: usize) -> Result<()> {
    let (e, n) = (cell.p, cell.n);
    let mut rng = cell.case(t);
    let v1 = Ensemble::cycle(t).matrix(&mut rng, n, n);
    let v2 = Ensemble::cycle(t + 1).matrix(&mut rng, n, n);
    cell.absorb(&v1);
    cell.absorb(&v2);
    let inputs = || vec![named("v1", &v1), named("v2", &v2)];
    let f1 = factnorm1_upper(&v1, &e, &factnorm_opts(c, rng.random()))?.factorization;
    let f2 = factnorm1_upper(&v2, &e, &factnorm_opts(c, rng.random()))?.factorization;

    // ‖v‖ ≤ n^{2δ}·‖v‖₁,ₙ
    let lhs = opnorm_lower(&v1, &e, c.budgets.restarts, 1e-12, rng.random())?.lower;
    let factor = (n as f64).powf(2.0 * e.delta());
    cell.check("norm-bound", lhs, factor * f1.value, inputs);
    cell.max("max_norm_ratio", lhs / (factor * f1.value));

    let z = random::complex_normal(&mut rng);
    let scaled = f1.scaled(z, &e)?;
    cell.check("homogeneity", scaled.value, z.norm() * f1.value, inputs);
    cell.check("scaled-reconstruction", scaled.reconstruction_error(&v1.scale(z)), RECONSTRUCTION_TOL, inputs);

    let sum = sum_combine(&f1, &f2, &e)?;
    cell.check("triangle", sum.value, f1.value + f2.value, inputs);
    cell.check("triangle-reconstruction", sum.reconstruction_error(&v1.add(&v2)), RECONSTRUCTION_TOL, inputs);

    let ds = direct_sum_combine(&f1, &f2, &e)?;
    cell.check("direct-sum", ds.value, f1.value + f2.value, inputs);
    let want = Matrix::direct_sum(&v1, &v2);
    cell.check("direct-sum-reconstruction", ds.reconstruction_error(&want), RECONSTRUCTION_TOL, inputs);
    cell.max("max_triangle_ratio", sum.value / (f1.value + f2.value));
    Ok(())
}

fn norm1_vs_norm2_case(cell: &mut Cell, c: &Campaign, t: usize) -> Result<()> {
    let (e, n) = (cell.p, cell.n);
    let mut rng = cell.case(t);
    let v = Ensemble::cycle(t).matrix(&mut rng, n, n);
    cell.absorb(&v);
    let opts = factnorm_opts(c, rng.random());
    let s1 = factnorm1(&v, &e, &opts)?;
    let (est2, _) = factnorm2_upper(&v, &e, &opts)?;
    let (lo1, up1) = (s1.estimate.lower, s1.estimate.upper.expect("sandwich has an upper bound"));
    let up2 = est2.upper.expect("factorization search has an upper bound");
    let inputs = || vec![named("v", &v)];
    cell.check("norm1-sandwich", lo1, up1, inputs);
    cell.check("norm1-below-norm2", lo1, up2, inputs);
    cell.max("max_norm2_over_norm1", up2 / lo1);
    let vals = [("norm1_lower", lo1), ("norm1_upper", up1), ("norm2_upper", up2)];
    if up2 <= lo1 * (1.0 + extension::CLOSED_TOL) {
        cell.add("equal_certified", 1.0);
        cell.find("equality-certified", false, &vals, inputs());
    } else if up2 > up1 * (1.0 + 1e-3) {
        cell.add("gap_candidates", 1.0);
        cell.find("gap-candidate", true, &vals, inputs());
    }
    Ok(())
}

fn norm2_triangle_case(cell: &mut Cell, c: &Campaign, t: usize) -> Result<()> {
    let (e, n) = (cell.p, cell.n);
    let mut rng = cell.case(t);
    let v1 = Ensemble::cycle(t).matrix(&mut rng, n, n);
    let v2 = Ensemble::cycle(t + 2).matrix(&mut rng, n, n);
    cell.absorb(&v1);
    cell.absorb(&v2);
    let opts = factnorm_opts(c, rng.random());
    let up = |v: &Matrix| -> Result<f64> { Ok(factnorm2_upper(v, &e, &opts)?.0.upper.expect("upper bound")) };
    let (u1, u2, u12) = (up(&v1)?, up(&v2)?, up(&v1.add(&v2))?);
    let ratio = u12 / (u1 + u2);
    cell.max("max_ratio", ratio);
    if ratio > 1.0 + 1e-6 {
        cell.find(
            "triangle-candidate",
            true,
            &[("norm2_upper_v1", u1), ("norm2_upper_v2", u2), ("norm2_upper_sum", u12), ("ratio", ratio)],
            vec![named("v1", &v1), named("v2", &v2)],
        );
    }
    Ok(())
}

fn polar_case(cell: &mut Cell, c: &Campaign, t: usize) -> Result<()> {
    let (e, n) = (cell.p, cell.n);
    let mut rng = cell.case(t);
    let r_top = (2 * c.n_max).max(n);
    let r = n + t % (r_top - n + 1);
    let tau = random_lp_isometry(&mut rng, r, n, e.p(), 0.25);
    let beta0 = random::gaussian_matrix(&mut rng, n, n);
    let beta = tau.matmul(&beta0);
    cell.absorb(&beta);
    let inputs = || vec![named("tau", &tau), named("beta0", &beta0), named("beta", &beta)];
    match polar_decompose(&beta, &e, 1e-9) {
        Ok(pd) => {
            let rec = pd.tau.matmul(&pd.beta0).rel_diff(&beta);
            cell.check("reconstruction", rec, POLAR_TOL, inputs);
            let nb = lp(beta.data(), e.p());
            let drift = (lp(pd.beta0.data(), e.p()) - nb).abs() / nb;
            cell.check("norm-preservation", drift, POLAR_TOL, inputs);
            cell.max("max_reconstruction", rec);
            cell.max("max_norm_drift", drift);
            if !is_lp_isometry(&pd.tau, &e, 1e-9)?.is_isometry {
                cell.fail("tau-isometry", 1.0, 0.0, inputs());
            }
        }
        Err(err) => {
            cell.fail("decompose", 1.0, 0.0, inputs());
            if let Some(v) = cell.violations.last_mut() {
                v.detail = Some(err.to_string());
            }
        }
    }
    // With one column every row is a multiple of any other.
    if r > n && n >= 2 {
        let g = random::gaussian_matrix(&mut rng, r, n);
        cell.absorb(&g);
        if is_polar_decomposable(&g, &e, 1e-9).decomposable {
            cell.fail("generic-not-decomposable", 1.0, 0.0, vec![named("generic", &g)]);
        }
        cell.add("generic_rejected", 1.0);
    }
    Ok(())
}

fn random_subspace(rng: &mut SeededRng, e: Exponent) -> SubspaceEmbedding {
    let (m, k) = PHI_PSI_SHAPE;
    loop {
        if let Ok(s) = SubspaceEmbedding::new(random::gaussian_matrix(rng, m, k), e) {
            return s;
        }
    }
}

fn phi_psi_case(cell: &mut Cell, c: &Campaign, t: usize) -> Result<()> {
    let (e, n) = (cell.p, cell.n);
    let mut rng = random::rng(instance_seed(c, &e, t));
    let space = random_subspace(&mut rng, e);
    let mut case_rng = cell.case(t);
    cell.absorb(&space.basis);
    let rep = check_phi_psi_at(&space, n, c.budgets.samples, c.tol, case_rng.random())?;
    cell.max("max_phi_ratio", rep.max_phi_ratio);
    cell.max("max_psi_ratio", rep.max_psi_ratio);
    cell.max("roundtrip_max_deviation", rep.roundtrip_max_deviation);
    cell.add("psi_warnings", rep.warnings.len() as f64);
    let inputs = || vec![named("basis", &space.basis)];
    for v in &rep.violations {
        let name = format!("{}-contraction (sample {})", v.map, v.trial);
        cell.check(&name, v.lower, v.upper, inputs);
    }
    cell.worst_ratio = Some(cell.worst_ratio.unwrap_or(0.0).max(rep.max_phi_ratio).max(rep.max_psi_ratio));
    if rep.roundtrip_max_deviation != 0.0 {
        cell.fail("psi-phi-identity", rep.roundtrip_max_deviation, 0.0, inputs());
    }
    Ok(())
}

fn extension_case(cell: &mut Cell, c: &Campaign, t: usize) -> Result<()> {
    let (e, level) = (cell.p, cell.n);
    let mut rng = random::rng(instance_seed(c, &e, t));
    let d = 1 + t % 3;
    let pr = ExtensionProblem::random(&mut rng, 2, 2, d);
    let mut case_rng = cell.case(t);
    for (b, y) in pr.basis.iter().zip(&pr.images) {
        cell.absorb(b);
        cell.absorb(y);
    }
    let opts = ExtensionOptions {
        samples: c.budgets.samples,
        iterations: c.budgets.iterations,
        restarts: c.budgets.restarts,
        seed: case_rng.random(),
    };
    let rep = extension_gap(&pr, &e, level, &opts)?;
    let inputs = || {
        let mut v: Vec<NamedInput> = pr.basis.iter().enumerate().map(|(i, b)| named(&format!("basis{i}"), b)).collect();
        v.extend(pr.images.iter().enumerate().map(|(i, y)| named(&format!("image{i}"), y)));
        v
    };
    cell.check("origin-below-extension", rep.origin_lower, rep.best_extension_upper, inputs);
    let rel = rep.gap / rep.best_extension_upper.max(f64::MIN_POSITIVE);
    cell.max("max_relative_gap", rel);
    cell.min("min_relative_gap", rel);
    if rep.label != GapLabel::Closed {
        cell.find(
            "extension-gap",
            true,
            &[
                ("origin_lower", rep.origin_lower),
                ("best_extension_upper", rep.best_extension_upper),
                ("gap", rep.gap),
                ("relative_gap", rel),
            ],
            inputs(),
        );
    }
    Ok(())
}
