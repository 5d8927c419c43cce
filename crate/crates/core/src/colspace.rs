//! Column `p`-operator space structure on subspaces `E ⊆ ℓ_p^m`.
//!
//! An element `[ξ_ij] ∈ 𝕄_n(E^c)` has norm
//! `sup { (Σ_i ‖Σ_j λ_j ξ_ij‖_p^p)^{1/p} : ‖λ‖_p ≤ 1 }`, which is the
//! `ℓ_p^n → ℓ_p^{nm}` operator norm of the stacked matrix
//! `M[(i,a), j] = ξ_ij[a]`.
//!
//! The maps `φ: E^c → 𝓑(Ẽ)` and `ψ: 𝓑(Ẽ) → E^c` act on `Ẽ = ℂ ⊕_p E`,
//! represented inside `ℂ ⊕_p ℓ_p^m` with coordinate 0 the scalar:
//! `φ(ξ)(λ ⊕ e) = 0 ⊕ λξ` and `ψ(T) = π T(1 ⊕ 0)`. Both are complete
//! contractions and `ψ∘φ = id`. A completely contractive projection onto
//! `E^c` would make `E` 1-complemented; [`projection_constant`] measures how
//! far the best projection found is from norm one.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, C64};
use crate::pnorms::{holder_dual, lp, opnorm_lower, opnorm_upper, Exponent, Method, NormEstimate, Witness};
use crate::random::{self, derive_seed};

/// Relative residual allowed for vectors declared to lie in `E`.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

/// Power-method tolerance used by the estimators in this module.
const POWER_TOL: f64 = 1e-12;

/// `E = range(B) ⊆ ℓ_p^m` with `B` of full column rank `k`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubspaceEmbedding {
    pub ambient_dim: usize,
    pub dim: usize,
    pub basis: Matrix,
    pub exponent: Exponent,
}

impl SubspaceEmbedding {
    pub fn new(basis: Matrix, exponent: Exponent) -> Result<Self> {
        let (m, k) = basis.shape();
        if k > m {
            return Err(Error::input("basis", format!("{k} columns exceed ambient dimension {m}")));
        }
        let s = basis.singular_values();
        if !(s[k - 1] > 1e-10 * s[0]) {
            return Err(Error::input("basis", "columns are linearly dependent"));
        }
        Ok(SubspaceEmbedding { ambient_dim: m, dim: k, basis, exponent })
    }

    /// `‖x − BB⁺x‖₂ / ‖x‖₂` (zero for `x = 0`).
    pub fn residual(&self, x: &[C64]) -> f64 {
        let nx = lp(x, 2.0);
        if nx == 0.0 {
            return 0.0;
        }
        let c = self.coefficients(x);
        let proj = self.basis.matvec(&c);
        let d: Vec<C64> = x.iter().zip(&proj).map(|(a, b)| a - b).collect();
        lp(&d, 2.0) / nx
    }

    pub fn contains(&self, x: &[C64]) -> bool {
        self.residual(x) <= MEMBERSHIP_TOL
    }

    /// Least-squares coefficients `c` with `Bc ≈ x`.
    pub fn coefficients(&self, x: &[C64]) -> Vec<C64> {
        self.basis.pinv(1e-12).matvec(x)
    }

    /// `‖x‖_E`, the ambient `ℓ_p^m` norm.
    pub fn norm(&self, x: &[C64]) -> f64 {
        lp(x, self.exponent.p())
    }

    /// Random element `Bc` of `E` with Gaussian coefficients.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<C64> {
        self.basis.matvec(&random::gaussian_vector(rng, self.dim))
    }

    /// `B̃ = 1 ⊕ B`, the basis of `Ẽ` inside `ℂ ⊕ ℓ_p^m`.
    pub fn tilde_basis(&self) -> Matrix {
        Matrix::direct_sum(&Matrix::identity(1), &self.basis)
    }
}

/// `[ξ_ij] ∈ 𝕄_n(E^c)`, entries stored row-major as ambient vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnMatrix {
    pub n: usize,
    pub m: usize,
    pub entries: Vec<Vec<C64>>,
}

impl ColumnMatrix {
    pub fn new(n: usize, m: usize, entries: Vec<Vec<C64>>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::input("entries", format!("expected {} entries for n = {n}", n * n)));
        }
        if let Some(bad) = entries.iter().position(|x| x.len() != m) {
            return Err(Error::input("entries", format!("entry {bad} has length {}, expected {m}", entries[bad].len())));
        }
        Ok(ColumnMatrix { n, m, entries })
    }

    /// Checks that every entry lies in `E`.
    pub fn validate(&self, space: &SubspaceEmbedding) -> Result<()> {
        if self.m != space.ambient_dim {
            return Err(Error::input("entries", "ambient dimension does not match the subspace"));
        }
        for (idx, x) in self.entries.iter().enumerate() {
            let r = space.residual(x);
            if r > MEMBERSHIP_TOL {
                return Err(Error::input(
                    "entries",
                    format!("entry ({}, {}) is not in E (residual {r:e})", idx / self.n, idx % self.n),
                ));
            }
        }
        Ok(())
    }

    pub fn entry(&self, i: usize, j: usize) -> &[C64] {
        &self.entries[i * self.n + j]
    }

    /// Random sample with entries in `E`.
    pub fn sample<R: Rng>(space: &SubspaceEmbedding, n: usize, rng: &mut R) -> Self {
        let entries = (0..n * n).map(|_| space.sample(rng)).collect();
        ColumnMatrix { n, m: space.ambient_dim, entries }
    }

    /// `diag(ξ_1, …, ξ_n)`.
    pub fn diagonal(xs: &[Vec<C64>]) -> Result<Self> {
        let n = xs.len();
        let m = xs.first().map_or(0, |x| x.len());
        let mut entries = vec![vec![C64::new(0.0, 0.0); m]; n * n];
        for (i, x) in xs.iter().enumerate() {
            entries[i * n + i] = x.clone();
        }
        ColumnMatrix::new(n, m, entries)
    }

    /// `M[(i,a), j] = ξ_ij[a]`, of shape `(n·m) × n`.
    pub fn stacked(&self) -> Matrix {
        let (n, m) = (self.n, self.m);
        let mut out = Matrix::zeros(n * m, n);
        for i in 0..n {
            for j in 0..n {
                for (a, &z) in self.entry(i, j).iter().enumerate() {
                    out[(i * m + a, j)] = z;
                }
            }
        }
        out
    }

    /// `x ⊕ y` (block diagonal).
    pub fn direct_sum(x: &ColumnMatrix, y: &ColumnMatrix) -> Result<Self> {
        if x.m != y.m {
            return Err(Error::input("entries", "ambient dimensions differ"));
        }
        let n = x.n + y.n;
        let zero = vec![C64::new(0.0, 0.0); x.m];
        let mut entries = vec![zero; n * n];
        for i in 0..x.n {
            for j in 0..x.n {
                entries[i * n + j] = x.entry(i, j).to_vec();
            }
        }
        for i in 0..y.n {
            for j in 0..y.n {
                entries[(x.n + i) * n + x.n + j] = y.entry(i, j).to_vec();
            }
        }
        ColumnMatrix::new(n, x.m, entries)
    }

    /// `α·x·β` for scalar matrices `α`, `β`.
    pub fn compress(&self, alpha: &Matrix, beta: &Matrix) -> Result<Self> {
        let n = self.n;
        if alpha.cols() != n || beta.rows() != n || alpha.rows() != beta.cols() {
            return Err(Error::input("alpha", "shapes do not compose"));
        }
        let q = alpha.rows();
        let mut entries = Vec::with_capacity(q * q);
        for i in 0..q {
            for j in 0..q {
                let mut acc = vec![C64::new(0.0, 0.0); self.m];
                for k in 0..n {
                    for l in 0..n {
                        let c = alpha[(i, k)] * beta[(l, j)];
                        if c == C64::new(0.0, 0.0) {
                            continue;
                        }
                        for (t, z) in acc.iter_mut().zip(self.entry(k, l)) {
                            *t += c * z;
                        }
                    }
                }
                entries.push(acc);
            }
        }
        ColumnMatrix::new(q, self.m, entries)
    }
}

/// Two-sided estimate of `‖X‖_{𝕄_n(E^c)}`; the witness is the maximizing `λ`.
pub fn col_matrix_norm(x: &ColumnMatrix, e: &Exponent, restarts: usize, seed: u64) -> Result<NormEstimate> {
    let m = x.stacked();
    let mut est = opnorm_lower(&m, e, restarts, POWER_TOL, seed)?;
    est.upper = Some(opnorm_upper(&m, e).max(est.lower));
    Ok(est)
}

/// `Σ_i ‖Σ_j λ_j ξ_ij‖_p^p` from the ambient entries.
fn ambient_objective(x: &ColumnMatrix, lambda: &[C64], p: f64) -> f64 {
    lp(&x.stacked().matvec(lambda), p).powf(p)
}

/// The same objective through coefficients in `E`: `ξ_ij = B c_ij`.
fn intrinsic_objective(coeffs: &[Vec<C64>], n: usize, space: &SubspaceEmbedding, lambda: &[C64]) -> f64 {
    let p = space.exponent.p();
    (0..n)
        .map(|i| {
            let mut c = vec![C64::new(0.0, 0.0); space.dim];
            for (j, l) in lambda.iter().enumerate() {
                for (t, z) in c.iter_mut().zip(&coeffs[i * n + j]) {
                    *t += l * z;
                }
            }
            space.norm(&space.basis.matvec(&c)).powf(p)
        })
        .sum()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmbeddingIsometryReport {
    pub n: usize,
    pub trials: usize,
    /// Largest relative difference between the two evaluations.
    pub max_deviation: f64,
    pub passed: bool,
}

/// Compares the `𝕄_n(E^c)` objective built from `E`-coordinates with the
/// objective of the embedded matrix over `ℓ_p^m`, on the same `λ` set
/// (canonical basis, the power-method witness, random unit vectors).
pub fn check_column_embedding_isometry(
    space: &SubspaceEmbedding,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<EmbeddingIsometryReport> {
    let e = space.exponent;
    let p = e.p();
    let mut rng = random::rng(seed);
    let mut worst = 0.0f64;
    for t in 0..trials {
        let coeffs: Vec<Vec<C64>> = (0..n * n).map(|_| random::gaussian_vector(&mut rng, space.dim)).collect();
        let entries = coeffs.iter().map(|c| space.basis.matvec(c)).collect();
        let x = ColumnMatrix::new(n, space.ambient_dim, entries)?;
        let mut lambdas: Vec<Vec<C64>> = (0..n)
            .map(|j| {
                let mut l = vec![C64::new(0.0, 0.0); n];
                l[j] = C64::new(1.0, 0.0);
                l
            })
            .collect();
        let est = col_matrix_norm(&x, &e, 1, derive_seed(seed, t as u64))?;
        if let Witness::Vector { x: l } = est.witness {
            lambdas.push(l);
        }
        for _ in 0..4 {
            let mut l = random::gaussian_vector(&mut rng, n);
            let nl = lp(&l, p);
            l.iter_mut().for_each(|z| *z /= nl);
            lambdas.push(l);
        }
        for l in &lambdas {
            let a = ambient_objective(&x, l, p);
            let b = intrinsic_objective(&coeffs, n, space, l);
            let scale = a.abs().max(b.abs());
            if scale > 0.0 {
                worst = worst.max((a - b).abs() / scale);
            }
        }
    }
    if worst > 1e-9 {
        return Err(Error::Internal(format!("column norm evaluators disagree by {worst:e}")));
    }
    Ok(EmbeddingIsometryReport { n, trials, max_deviation: worst, passed: true })
}

/// `φ(ξ)` applied to `λ ⊕ e`: returns `(0, λξ)`.
pub fn phi_apply(xi: &[C64], lambda: C64, _e_vec: &[C64]) -> (C64, Vec<C64>) {
    (C64::new(0.0, 0.0), xi.iter().map(|z| lambda * z).collect())
}

/// `φ(ξ)` as an `(m+1)×(m+1)` matrix on `ℂ ⊕ ℓ_p^m`: column 0 is `(0, ξ)`.
pub fn phi_matrix(xi: &[C64]) -> Matrix {
    let m = xi.len();
    let mut t = Matrix::zeros(m + 1, m + 1);
    for (a, &z) in xi.iter().enumerate() {
        t[(a + 1, 0)] = z;
    }
    t
}

/// Result of [`psi_apply`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsiResult {
    #[serde(with = "crate::io::complex_vec")]
    pub vector: Vec<C64>,
    pub residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// `ψ(T) = π T(1 ⊕ 0)`. If the result leaves `E`, it is returned as-is
/// with a warning.
pub fn psi_apply(t: &Matrix, space: &SubspaceEmbedding) -> Result<PsiResult> {
    let m = space.ambient_dim;
    if t.shape() != (m + 1, m + 1) {
        return Err(Error::input("T", format!("expected a {}x{} operator, got {:?}", m + 1, m + 1, t.shape())));
    }
    let mut unit = vec![C64::new(0.0, 0.0); m + 1];
    unit[0] = C64::new(1.0, 0.0);
    let image = t.matvec(&unit);
    let vector = image[1..].to_vec();
    let residual = space.residual(&vector);
    let warning = (residual > MEMBERSHIP_TOL)
        .then(|| format!("T does not map 1 ⊕ 0 into C ⊕ E (residual {residual:e}); component returned as-is"));
    Ok(PsiResult { vector, residual, warning })
}

/// `φ_n(x)` as an `n(m+1)`-square matrix on `ℓ_p^n(ℂ ⊕ ℓ_p^m)`.
pub fn phi_n(x: &ColumnMatrix) -> Matrix {
    let (n, m) = (x.n, x.m);
    let mut out = Matrix::zeros(n * (m + 1), n * (m + 1));
    for i in 0..n {
        for j in 0..n {
            out.set_block(i * (m + 1), j * (m + 1), &phi_matrix(x.entry(i, j)));
        }
    }
    out
}

/// `ψ_n(T)` for `T` an `n(m+1)`-square block matrix.
pub fn psi_n(t: &Matrix, n: usize, space: &SubspaceEmbedding) -> Result<(ColumnMatrix, Vec<String>)> {
    let m = space.ambient_dim;
    if t.shape() != (n * (m + 1), n * (m + 1)) {
        return Err(Error::input("T", "block size does not match n and the subspace"));
    }
    let mut entries = Vec::with_capacity(n * n);
    let mut warnings = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let r = psi_apply(&t.block(i * (m + 1), j * (m + 1), m + 1, m + 1), space)?;
            if let Some(w) = r.warning {
                warnings.push(format!("block ({i}, {j}): {w}"));
            }
            entries.push(r.vector);
        }
    }
    Ok((ColumnMatrix::new(n, m, entries)?, warnings))
}

/// Random block-compatible `T ∈ 𝕄_n(𝓑(Ẽ))`: every block is `B̃SB̃⁺`.
pub fn sample_tilde_operator<R: Rng>(space: &SubspaceEmbedding, n: usize, rng: &mut R) -> Matrix {
    let bt = space.tilde_basis();
    let bp = bt.pinv(1e-12);
    let m1 = space.ambient_dim + 1;
    let mut t = Matrix::zeros(n * m1, n * m1);
    for i in 0..n {
        for j in 0..n {
            let s = random::gaussian_matrix(rng, space.dim + 1, space.dim + 1);
            t.set_block(i * m1, j * m1, &bt.matmul(&s).matmul(&bp));
        }
    }
    t
}

/// A certified lower bound exceeding a certified upper bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContractionViolation {
    pub map: String,
    pub n: usize,
    pub trial: usize,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PhiPsiReport {
    pub n_max: usize,
    pub trials: usize,
    /// Largest `lower(‖φ_n(x)‖) / upper(‖x‖)` seen.
    pub max_phi_ratio: f64,
    /// Largest `lower(‖ψ_n(T)‖) / upper(‖T‖)` seen.
    pub max_psi_ratio: f64,
    /// Largest entry of `|ψ(φ(ξ)) − ξ|`; zero means bit-exact.
    pub roundtrip_max_deviation: f64,
    pub violations: Vec<ContractionViolation>,
    pub warnings: Vec<String>,
}

impl PhiPsiReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.roundtrip_max_deviation == 0.0
    }
}

/// Sampled check that `φ_n`, `ψ_n` are contractions and `ψ∘φ = id`.
pub fn check_phi_psi_contractive(
    space: &SubspaceEmbedding,
    n_max: usize,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Result<PhiPsiReport> {
    if n_max == 0 {
        return Err(Error::Parameter("nmax must be at least 1".into()));
    }
    let mut report = PhiPsiReport {
        n_max,
        trials,
        max_phi_ratio: 0.0,
        max_psi_ratio: 0.0,
        roundtrip_max_deviation: 0.0,
        violations: Vec::new(),
        warnings: Vec::new(),
    };
    for n in 1..=n_max {
        let level = check_phi_psi_at(space, n, trials, tol, derive_seed(seed, n as u64))?;
        report.max_phi_ratio = report.max_phi_ratio.max(level.max_phi_ratio);
        report.max_psi_ratio = report.max_psi_ratio.max(level.max_psi_ratio);
        report.roundtrip_max_deviation = report.roundtrip_max_deviation.max(level.roundtrip_max_deviation);
        report.violations.extend(level.violations);
        report.warnings.extend(level.warnings);
    }
    Ok(report)
}

/// The checks of [`check_phi_psi_contractive`] at the single level `n`.
pub fn check_phi_psi_at(space: &SubspaceEmbedding, n: usize, trials: usize, tol: f64, seed: u64) -> Result<PhiPsiReport> {
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    let e = space.exponent;
    let mut report = PhiPsiReport {
        n_max: n,
        trials,
        max_phi_ratio: 0.0,
        max_psi_ratio: 0.0,
        roundtrip_max_deviation: 0.0,
        violations: Vec::new(),
        warnings: Vec::new(),
    };
    let mut rng = random::rng(seed);
    for trial in 0..trials {
        let x = ColumnMatrix::sample(space, n, &mut rng);
        let x_upper = opnorm_upper(&x.stacked(), &e);
        let phi_lower = opnorm_lower(&phi_n(&x), &e, 2, POWER_TOL, rng.random())?.lower;
        report.max_phi_ratio = report.max_phi_ratio.max(phi_lower / x_upper);
        if phi_lower > x_upper * (1.0 + tol) {
            report.violations.push(ContractionViolation { map: "phi".into(), n, trial, lower: phi_lower, upper: x_upper });
        }

        let (back, _) = psi_n(&phi_n(&x), n, space)?;
        for (a, b) in back.entries.iter().zip(&x.entries) {
            for (u, v) in a.iter().zip(b) {
                report.roundtrip_max_deviation = report.roundtrip_max_deviation.max((u - v).norm());
            }
        }

        let t = sample_tilde_operator(space, n, &mut rng);
        let t_upper = opnorm_upper(&t, &e);
        let (psi_t, warnings) = psi_n(&t, n, space)?;
        report.warnings.extend(warnings.into_iter().map(|w| format!("n={n} trial={trial}: {w}")));
        let psi_lower = col_matrix_norm(&psi_t, &e, 2, rng.random())?.lower;
        report.max_psi_ratio = report.max_psi_ratio.max(psi_lower / t_upper);
        if psi_lower > t_upper * (1.0 + tol) {
            report.violations.push(ContractionViolation { map: "psi".into(), n, trial, lower: psi_lower, upper: t_upper });
        }
    }
    Ok(report)
}

/// Best projection found onto `E`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub estimate: NormEstimate,
    /// Certified upper bound on `‖P‖_{p→p}` for the returned `P`.
    pub best_value: f64,
    /// Power-method lower bound on `‖P‖_{p→p}` for the returned `P`.
    pub best_projection_lower: f64,
    pub projection: Matrix,
    /// `max |P² − P|` and `max |PB − B|` (relative to `max |B|`).
    pub idempotency_error: f64,
    pub range_error: f64,
}

/// Search budgets for [`projection_constant`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionOptions {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions { restarts: 32, iterations: 200, seed: 42 }
    }
}

/// Rows span the left null space of `B`: `N B = 0`, `N` of shape `(m−k)×m`.
fn left_null_space(b: &Matrix) -> Matrix {
    let m = b.rows();
    let k = b.cols();
    let q = Matrix::identity(m).sub(&b.matmul(&b.pinv(1e-12)));
    let svd = q.svd();
    svd.u.block(0, 0, m, m - k).adjoint()
}

fn projection_value(b: &Matrix, g0: &Matrix, nul: &Matrix, z: &Matrix, e: &Exponent) -> (f64, Matrix) {
    let p = b.matmul(&g0.add(&z.matmul(nul)));
    (opnorm_upper(&p, e), p)
}

fn finish_projection(space: &SubspaceEmbedding, p: Matrix, value: f64, method: Method) -> Result<ProjectionResult> {
    let b = &space.basis;
    let idem = p.matmul(&p).sub(&p).max_abs();
    let range = p.matmul(b).sub(b).max_abs() / b.max_abs();
    let best_projection_lower = opnorm_lower(&p, &space.exponent, 4, POWER_TOL, 0)?.lower;
    if idem > 1e-10 || range > 1e-10 {
        return Err(Error::Internal(format!("projection check failed: |P²−P| = {idem:e}, |PB−B| = {range:e}")));
    }
    Ok(ProjectionResult {
        estimate: NormEstimate {
            lower: 1.0,
            upper: Some(value),
            witness: Witness::Matrix { m: p.clone() },
            method,
            restarts: 0,
            tolerance: 1e-10,
        },
        best_value: value,
        best_projection_lower,
        projection: p,
        idempotency_error: idem,
        range_error: range,
    })
}

/// Smallest certified `‖P‖_{p→p}` over projections `P = BG` onto `E`,
/// with `G = B⁺ + Z·N` and `N` spanning the left null space of `B`.
///
/// `k = m` gives the identity; `k = 1` uses the norm-one projection
/// `x·aᵀ` with `a` the Hölder dual of the basis vector `x`.
pub fn projection_constant(space: &SubspaceEmbedding, opts: &ProjectionOptions) -> Result<ProjectionResult> {
    if opts.restarts == 0 {
        return Err(Error::Parameter("restarts must be at least 1".into()));
    }
    let e = space.exponent;
    let (m, k) = (space.ambient_dim, space.dim);
    if k == m {
        return finish_projection(space, Matrix::identity(m), 1.0, Method::ClosedForm);
    }
    if k == 1 {
        let x = space.basis.col(0);
        let nx = lp(&x, e.p());
        let a: Vec<C64> = holder_dual(&x, e.conj()).into_iter().map(|z| z / nx).collect();
        let value = nx * lp(&a, e.conj());
        return finish_projection(space, Matrix::outer(&x, &a), value, Method::ClosedForm);
    }
    let b = &space.basis;
    let g0 = b.pinv(1e-12);
    let nul = left_null_space(b);
    let scale = g0.max_abs();
    let runs: Vec<(f64, Matrix)> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = random::rng(derive_seed(opts.seed, r as u64));
            let mut z = if r == 0 {
                Matrix::zeros(k, m - k)
            } else {
                random::gaussian_matrix(&mut rng, k, m - k).scale_real(scale * 0.5)
            };
            let (mut best, mut p) = projection_value(b, &g0, &nul, &z, &e);
            let mut step = 0.2;
            for _ in 0..opts.iterations {
                let dz = if rng.random::<bool>() {
                    random::gaussian_matrix(&mut rng, k, m - k)
                } else {
                    let mut d = Matrix::zeros(k, m - k);
                    d[(rng.random_range(0..k), rng.random_range(0..m - k))] = random::complex_normal(&mut rng);
                    d
                };
                let cand = z.add(&dz.scale_real(step * scale));
                let (val, pc) = projection_value(b, &g0, &nul, &cand, &e);
                if val < best {
                    best = val;
                    p = pc;
                    z = cand;
                    step = (step * 1.5).min(1.0);
                } else {
                    step *= 0.7;
                    if step < 1e-6 {
                        step = 0.2;
                    }
                }
            }
            (best, p)
        })
        .collect();
    let mut best = runs[0].clone();
    for run in runs.into_iter().skip(1) {
        if run.0 < best.0 {
            best = run;
        }
    }
    let mut out = finish_projection(space, best.1, best.0, Method::Interpolation)?;
    out.estimate.restarts = opts.restarts;
    Ok(out)
}

/// Options for [`counterexample_report`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleOptions {
    pub n_max: usize,
    pub trials: usize,
    pub tol: f64,
    pub projection: ProjectionOptions,
}

impl Default for CounterexampleOptions {
    fn default() -> Self {
        CounterexampleOptions { n_max: 3, trials: 20, tol: 1e-6, projection: ProjectionOptions::default() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CounterexampleFlags {
    /// A projection of certified norm `≤ 1 + tol` was found.
    pub one_complemented: bool,
    /// `best_value − 1`, as observed.
    pub margin: f64,
    pub summary: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub phi_psi: PhiPsiReport,
    pub projection: ProjectionResult,
    pub flags: CounterexampleFlags,
}

/// Runs the `φ/ψ` contraction checks and the projection search on `E`.
pub fn counterexample_report(space: &SubspaceEmbedding, opts: &CounterexampleOptions) -> Result<CounterexampleReport> {
    let phi_psi = check_phi_psi_contractive(space, opts.n_max, opts.trials, opts.tol, opts.projection.seed)?;
    let projection = projection_constant(space, &opts.projection)?;
    let margin = projection.best_value - 1.0;
    let one_complemented = margin <= opts.tol;
    let summary = if one_complemented {
        "1-complemented, no obstruction".to_string()
    } else {
        format!("best projection found has norm {} > 1 (observed, not proved minimal)", projection.best_value)
    };
    Ok(CounterexampleReport { phi_psi, projection, flags: CounterexampleFlags { one_complemented, margin, summary } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::re;
    use crate::pnorms::opnorm_oracle_small;
    use proptest::prelude::*;

    fn ex(p: f64) -> Exponent {
        Exponent::new(p).unwrap()
    }

    fn space(rows: &[[f64; 2]], p: f64) -> SubspaceEmbedding {
        SubspaceEmbedding::new(Matrix::from_real_rows(rows), ex(p)).unwrap()
    }

    #[test]
    fn embedding_validation() {
        let dep = Matrix::from_real_rows(&[[1.0, 2.0], [1.0, 2.0], [0.0, 0.0]]);
        assert!(SubspaceEmbedding::new(dep, ex(3.0)).is_err());
        let s = space(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]], 3.0);
        assert!(s.contains(&[re(1.0), re(2.0), re(0.0)]));
        assert!(!s.contains(&[re(0.0), re(0.0), re(1.0)]));
        let bad = ColumnMatrix::new(1, 3, vec![vec![re(0.0), re(0.0), re(1.0)]]).unwrap();
        assert!(bad.validate(&s).is_err());
    }

    #[test]
    fn col_norm_examples() {
        let e = ex(3.0);
        let xi = vec![re(1.0), re(-2.0), re(0.5)];
        let x = ColumnMatrix::new(1, 3, vec![xi.clone()]).unwrap();
        let est = col_matrix_norm(&x, &e, 2, 1).unwrap();
        assert!((est.lower - lp(&xi, 3.0)).abs() < 1e-12);
        let d = ColumnMatrix::diagonal(&[xi.clone(), xi.clone()]).unwrap();
        let est = col_matrix_norm(&d, &e, 2, 1).unwrap();
        assert!((est.lower - lp(&xi, 3.0)).abs() < 1e-12);
        assert!((est.upper.unwrap() - lp(&xi, 3.0)).abs() < 1e-12);
    }

    #[test]
    fn single_row_matches_sphere_oracle() {
        let e = ex(3.0);
        let x1 = vec![re(1.0), re(0.5), re(0.0)];
        let x2 = vec![re(-0.3), re(1.0), re(2.0)];
        let zero = vec![re(0.0); 3];
        let x = ColumnMatrix::new(2, 3, vec![x1.clone(), x2.clone(), zero.clone(), zero]).unwrap();
        let est = col_matrix_norm(&x, &e, 4, 1).unwrap();
        // sup over the unit sphere of ‖λ₁ξ₁ + λ₂ξ₂‖ is the norm of [ξ₁ ξ₂]
        let cols = Matrix::hstack(&Matrix::column(&x1), &Matrix::column(&x2));
        let oracle = opnorm_oracle_small(&cols, &e, 64).unwrap();
        assert!((est.lower - oracle).abs() < 1e-4 * oracle, "{} vs {oracle}", est.lower);
    }

    #[test]
    fn embedding_isometry_smoke() {
        let s = space(&[[1.0, 0.0], [1.0, 1.0], [0.0, -1.0], [2.0, 1.0]], 3.0);
        let r = check_column_embedding_isometry(&s, 3, 100, 7).unwrap();
        assert!(r.max_deviation < 1e-9);
        let r = check_column_embedding_isometry(&s, 1, 10, 7).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn phi_and_psi_examples() {
        let s = space(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], 3.0);
        let xi = vec![re(1.0), re(2.0), re(3.0)];
        assert_eq!(phi_apply(&xi, re(1.0), &xi).1, xi);
        assert_eq!(phi_apply(&xi, re(0.0), &xi).1, vec![re(0.0); 3]);
        let r = psi_apply(&phi_matrix(&xi), &s).unwrap();
        assert_eq!(r.vector, xi);
        assert!(r.warning.is_none());
        assert_eq!(psi_apply(&Matrix::zeros(4, 4), &s).unwrap().vector, vec![re(0.0); 3]);
        assert_eq!(psi_apply(&Matrix::identity(4), &s).unwrap().vector, vec![re(0.0); 3]);
        let mut t = Matrix::zeros(4, 4);
        t[(3, 0)] = re(1.0);
        assert!(psi_apply(&t, &s).unwrap().warning.is_some());
        // ‖φ(ξ)‖ = ‖ξ‖
        let e = ex(3.0);
        let est = opnorm_lower(&phi_matrix(&xi), &e, 2, 1e-12, 0).unwrap();
        assert!((est.lower - lp(&xi, 3.0)).abs() < 1e-12);
    }

    #[test]
    fn psi_phi_roundtrip_is_exact() {
        let s = space(&[[1.0, 0.0], [0.3, 1.0], [0.0, -1.0], [2.0, 1.0]], 1.5);
        let mut rng = random::rng(3);
        for _ in 0..100 {
            let xi = s.sample(&mut rng);
            assert_eq!(psi_apply(&phi_matrix(&xi), &s).unwrap().vector, xi);
        }
    }

    #[test]
    fn contraction_sweep() {
        let mut rng = random::rng(19);
        let b = random::gaussian_matrix(&mut rng, 4, 2);
        let s = SubspaceEmbedding::new(b, ex(3.0)).unwrap();
        let r = check_phi_psi_contractive(&s, 3, 10, 1e-6, 1).unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn projection_closed_forms() {
        let o = ProjectionOptions { restarts: 4, iterations: 50, seed: 1 };
        for p in [1.5, 2.0, 4.0] {
            let full = SubspaceEmbedding::new(Matrix::identity(3), ex(p)).unwrap();
            assert_eq!(projection_constant(&full, &o).unwrap().best_value, 1.0);
            let line = SubspaceEmbedding::new(Matrix::column(&[re(1.0), re(-2.0), re(0.5)]), ex(p)).unwrap();
            assert!((projection_constant(&line, &o).unwrap().best_value - 1.0).abs() < 1e-12);
            let coord = space(&[[0.0, 0.0], [2.0, 1.0], [0.0, 0.0], [0.0, 3.0]], p);
            assert!((projection_constant(&coord, &o).unwrap().best_value - 1.0).abs() < 1e-6);
        }
        let h = 0.5f64.sqrt();
        let orth = space(&[[h, 0.0], [h, 0.0], [0.0, 1.0], [0.0, 0.0]], 2.0);
        let mut rng = random::rng(2);
        let q = random::gaussian_matrix(&mut rng, 4, 2).svd().u;
        let gen = SubspaceEmbedding::new(q, ex(2.0)).unwrap();
        for s in [orth, gen] {
            let r = projection_constant(&s, &o).unwrap();
            assert!((r.best_value - 1.0).abs() < 1e-6, "{}", r.best_value);
        }
    }

    #[test]
    fn projection_against_grid_oracle() {
        let s = SubspaceEmbedding::new(
            Matrix::from_real_rows(&[[1.0, 1.0], [1.0, -1.0], [1.0, 0.0]]),
            ex(4.0),
        )
        .unwrap();
        let r = projection_constant(&s, &ProjectionOptions { restarts: 8, iterations: 200, seed: 5 }).unwrap();
        assert!(r.best_value >= 1.0 - 1e-9);
        assert!(r.idempotency_error <= 1e-10 && r.range_error <= 1e-10);

        // Coarse grid over real Z (2×1) on the search objective, then local
        // refinement.
        let e = ex(4.0);
        let b = &s.basis;
        let g0 = b.pinv(1e-12);
        let nul = left_null_space(b);
        let proj = |z0: f64, z1: f64| {
            let z = Matrix::from_real_rows(&[[z0], [z1]]);
            b.matmul(&g0.add(&z.matmul(&nul)))
        };
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in -40..=40 {
            for j in -40..=40 {
                let (a, c) = (i as f64 * 0.05, j as f64 * 0.05);
                let v = opnorm_upper(&proj(a, c), &e);
                if v < best.0 {
                    best = (v, a, c);
                }
            }
        }
        let mut h = 0.025;
        for _ in 0..30 {
            for (da, dc) in [(h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)] {
                let v = opnorm_upper(&proj(best.1 + da, best.2 + dc), &e);
                if v < best.0 {
                    best = (v, best.1 + da, best.2 + dc);
                }
            }
            h *= 0.7;
        }
        assert!(r.best_value <= best.0 * (1.0 + 1e-3), "{} vs {}", r.best_value, best.0);
        // soundness: the certified value dominates the norm of the returned P
        let exact = opnorm_oracle_small(&r.projection, &e, 64).unwrap();
        assert!(exact <= r.best_value * (1.0 + 1e-9) && exact >= 1.0 - 1e-4);
        assert!(r.best_projection_lower <= exact * (1.0 + 1e-6));
    }

    #[test]
    fn counterexample_flags() {
        let o = CounterexampleOptions {
            n_max: 2,
            trials: 3,
            tol: 1e-6,
            projection: ProjectionOptions { restarts: 4, iterations: 50, seed: 1 },
        };
        let coord = space(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]], 3.0);
        let r = counterexample_report(&coord, &o).unwrap();
        assert!(r.flags.one_complemented);
        assert_eq!(r.flags.summary, "1-complemented, no obstruction");
        let line = SubspaceEmbedding::new(Matrix::column(&[re(1.0), re(1.0), re(1.0)]), ex(4.0)).unwrap();
        assert!(counterexample_report(&line, &o).unwrap().flags.one_complemented);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn ruan_axioms(seed in any::<u64>(), n in 1usize..3, p in prop::sample::select(vec![1.5, 3.0])) {
            let e = ex(p);
            let mut rng = random::rng(seed);
            let s = SubspaceEmbedding::new(random::gaussian_matrix(&mut rng, 3, 2), e).unwrap();
            let x = ColumnMatrix::sample(&s, n, &mut rng);
            let y = ColumnMatrix::sample(&s, n, &mut rng);
            let nx = col_matrix_norm(&x, &e, 4, 1).unwrap();
            let ny = col_matrix_norm(&y, &e, 4, 1).unwrap();
            let sum = col_matrix_norm(&ColumnMatrix::direct_sum(&x, &y).unwrap(), &e, 4, 1).unwrap();
            let want = nx.lower.max(ny.lower);
            prop_assert!((sum.lower - want).abs() <= 1e-6 * want, "{} vs {}", sum.lower, want);

            let alpha = random::gaussian_matrix(&mut rng, n, n);
            let beta = random::gaussian_matrix(&mut rng, n, n);
            let c = col_matrix_norm(&x.compress(&alpha, &beta).unwrap(), &e, 4, 1).unwrap();
            let bound = opnorm_upper(&alpha, &e) * nx.upper.unwrap() * opnorm_upper(&beta, &e);
            prop_assert!(c.lower <= bound * (1.0 + 1e-12));
        }

        #[test]
        fn projections_are_projections(seed in any::<u64>(), p in prop::sample::select(vec![1.5, 3.0, 4.0])) {
            let mut rng = random::rng(seed);
            let s = SubspaceEmbedding::new(random::gaussian_matrix(&mut rng, 4, 2), ex(p)).unwrap();
            let r = projection_constant(&s, &ProjectionOptions { restarts: 2, iterations: 30, seed }).unwrap();
            prop_assert!(r.best_value >= 1.0 - 1e-9);
            prop_assert!(r.idempotency_error <= 1e-10 && r.range_error <= 1e-10);
        }
    }
}
