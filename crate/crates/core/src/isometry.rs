//! `ℓ_p`-isometries and `ℓ_p`-polar decompositions.
//!
//! For `p ≠ 2` a matrix `τ: ℓ_p^n → ℓ_p^r` is an isometry exactly when its
//! columns have pairwise disjoint supports and unit `p`-norm. A matrix
//! `β ∈ 𝕄_{r,n}` factors as `β = τβ₀` with such a `τ` and square `β₀`
//! exactly when its rows fall into at most `n` projective classes (rows
//! that are scalar multiples of one another). [`polar_decompose`] builds
//! the factors from that row grouping.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, C64};
use crate::pnorms::{lp, Exponent};
use crate::random;

/// Default relative tolerance for grouping and isometry checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Tolerance used when verifying a freshly built decomposition.
const VERIFY_TOL: f64 = 1e-10;

/// Indices `i` (0-based) with `|x_i| > tol·max_j |x_j|`. Empty for `x = 0`.
pub fn support(x: &[C64], tol: f64) -> Vec<usize> {
    let m = x.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if m == 0.0 {
        return Vec::new();
    }
    x.iter()
        .enumerate()
        .filter(|(_, z)| z.norm() > tol * m)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IsometryCriterion {
    /// Disjoint column supports with unit `p`-norms (`p ≠ 2`).
    DisjointSupport,
    /// `τ^H τ = I` (`p = 2`).
    Gram,
}

/// Evidence behind an isometry verdict.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsometryCertificate {
    pub is_isometry: bool,
    pub criterion: IsometryCriterion,
    /// Column supports, 0-based.
    pub supports: Vec<Vec<usize>>,
    pub column_norms: Vec<f64>,
    /// Pairs of columns whose supports intersect.
    pub overlaps: Vec<(usize, usize)>,
    /// `max |τ^H τ − I|`, only for the Gram criterion.
    pub gram_deviation: Option<f64>,
}

/// Decides whether `tau` (`r×n`) is an isometry `ℓ_p^n → ℓ_p^r`.
pub fn is_lp_isometry(tau: &Matrix, e: &Exponent, tol: f64) -> Result<IsometryCertificate> {
    let (r, n) = tau.shape();
    if r < n {
        return Err(Error::NoIsometryPossible { rows: r, cols: n });
    }
    let columns: Vec<Vec<C64>> = (0..n).map(|j| tau.col(j)).collect();
    let supports: Vec<Vec<usize>> = columns.iter().map(|c| support(c, tol)).collect();
    let column_norms: Vec<f64> = columns.iter().map(|c| lp(c, e.p())).collect();
    let mut owner = vec![usize::MAX; r];
    let mut overlaps = Vec::new();
    for (j, s) in supports.iter().enumerate() {
        for &i in s {
            if owner[i] != usize::MAX {
                let pair = (owner[i], j);
                if !overlaps.contains(&pair) {
                    overlaps.push(pair);
                }
            } else {
                owner[i] = j;
            }
        }
    }
    if e.is_euclidean() {
        let gram = tau.adjoint().matmul(tau);
        let dev = gram.sub(&Matrix::identity(n)).max_abs();
        return Ok(IsometryCertificate {
            is_isometry: dev <= tol,
            criterion: IsometryCriterion::Gram,
            supports,
            column_norms,
            overlaps,
            gram_deviation: Some(dev),
        });
    }
    let unit = column_norms.iter().all(|&x| (x - 1.0).abs() <= tol);
    Ok(IsometryCertificate {
        is_isometry: unit && overlaps.is_empty(),
        criterion: IsometryCriterion::DisjointSupport,
        supports,
        column_norms,
        overlaps,
        gram_deviation: None,
    })
}

/// Position of a nonzero row inside its projective class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowClass {
    /// Index into [`RowGrouping::pivots`].
    pub class: usize,
    /// `c_i` with `u_i = c_i·u_pivot`.
    #[serde(with = "crate::io::complex_scalar")]
    pub scalar: C64,
}

/// Projective classes of the rows of a matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowGrouping {
    /// Pivot row indices (0-based, increasing).
    pub pivots: Vec<usize>,
    /// One entry per row; `None` for zero rows.
    pub assignment: Vec<Option<RowClass>>,
    pub zero_rows: Vec<usize>,
}

impl RowGrouping {
    pub fn class_count(&self) -> usize {
        self.pivots.len()
    }

    /// Row indices of each class, in pivot order.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.pivots.len()];
        for (i, a) in self.assignment.iter().enumerate() {
            if let Some(a) = a {
                out[a.class].push(i);
            }
        }
        out
    }
}

fn dot_h(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[C64]) -> f64 {
    lp(a, 2.0)
}

/// Greedy left-to-right grouping of rows by projective distance
/// `min_c ‖u_i − c·u_pivot‖₂ / ‖u_i‖₂`.
pub fn group_rows(beta: &Matrix, tol: f64) -> RowGrouping {
    let r = beta.rows();
    let norms: Vec<f64> = (0..r).map(|i| norm2(beta.row(i))).collect();
    let top = norms.iter().copied().fold(0.0, f64::max);
    let mut pivots: Vec<usize> = Vec::new();
    let mut assignment = vec![None; r];
    let mut zero_rows = Vec::new();
    for i in 0..r {
        if top == 0.0 || norms[i] <= tol * top {
            zero_rows.push(i);
            continue;
        }
        let u = beta.row(i);
        let mut found = None;
        for (k, &j) in pivots.iter().enumerate() {
            let piv = beta.row(j);
            let c = dot_h(piv, u) / (norms[j] * norms[j]);
            let resid: Vec<C64> = u.iter().zip(piv).map(|(a, b)| a - c * b).collect();
            if norm2(&resid) <= tol * norms[i] {
                found = Some(RowClass { class: k, scalar: c });
                break;
            }
        }
        assignment[i] = Some(found.unwrap_or_else(|| {
            pivots.push(i);
            RowClass { class: pivots.len() - 1, scalar: C64::new(1.0, 0.0) }
        }));
    }
    RowGrouping { pivots, assignment, zero_rows }
}

/// Outcome of [`is_polar_decomposable`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolarDiagnostics {
    pub decomposable: bool,
    pub rows: usize,
    pub cols: usize,
    pub class_count: usize,
    pub pivots: Vec<usize>,
    pub zero_rows: Vec<usize>,
    pub rank: usize,
    /// Whether `β` lies in the full-rank decomposable class (`rank = n`).
    pub full_rank: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Decides `ℓ_p`-polar decomposability by counting projective row classes.
///
/// At `p = 2` this recognizes decompositions whose isometry has disjoint
/// supports; the classical singular-value polar decomposition is not used.
pub fn is_polar_decomposable(beta: &Matrix, _e: &Exponent, tol: f64) -> PolarDiagnostics {
    let (r, n) = beta.shape();
    let g = group_rows(beta, tol);
    let rank = beta.rank(tol);
    let mut d = PolarDiagnostics {
        decomposable: false,
        rows: r,
        cols: n,
        class_count: g.class_count(),
        pivots: g.pivots.clone(),
        zero_rows: g.zero_rows.clone(),
        rank,
        full_rank: false,
        reason: None,
    };
    if r < n {
        d.reason = Some(format!("{r} rows < {n} columns: no isometry exists"));
        return d;
    }
    if g.class_count() > n {
        d.reason = Some(format!("{} projective row classes exceed {n} columns", g.class_count()));
        return d;
    }
    d.decomposable = true;
    d.full_rank = rank == n;
    d
}

/// One column of `τ` and the matching row of `β₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarColumn {
    /// Row of `β` whose multiple forms this row of `β₀`; `None` for a
    /// padding column carried by a zero row.
    pub pivot: Option<usize>,
    /// Rows in the support of this column of `τ`.
    pub rows: Vec<usize>,
}

/// `β = τ·β₀` with `τ` an `ℓ_p`-isometry.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolarDecomposition {
    pub tau: Matrix,
    pub beta0: Matrix,
    pub grouping: RowGrouping,
    pub columns: Vec<PolarColumn>,
    /// `λ_k = (Σ_{i ∈ class k} |c_i|^p)^{−1/p}`.
    pub lambda: Vec<f64>,
}

/// Constructs an `ℓ_p`-polar decomposition of `beta` (`r×n`, `r ≥ n`).
///
/// When fewer than `n` classes exist, the missing columns are taken from
/// unused zero rows first, then by splitting the largest class (pivots are
/// allowed to repeat). All invariants are checked before returning.
pub fn polar_decompose(beta: &Matrix, e: &Exponent, tol: f64) -> Result<PolarDecomposition> {
    let diag = is_polar_decomposable(beta, e, tol);
    if !diag.decomposable {
        return Err(Error::NotDecomposable(format!(
            "{} (classes {}, pivots {:?})",
            diag.reason.clone().unwrap_or_default(),
            diag.class_count,
            diag.pivots
        )));
    }
    let (r, n) = beta.shape();
    let p = e.p();
    let grouping = group_rows(beta, tol);

    struct Slot {
        pivot: Option<usize>,
        members: Vec<(usize, C64)>,
    }
    let mut slots: Vec<Slot> = grouping
        .pivots
        .iter()
        .map(|&j| Slot { pivot: Some(j), members: Vec::new() })
        .collect();
    for (i, a) in grouping.assignment.iter().enumerate() {
        if let Some(a) = a {
            slots[a.class].members.push((i, a.scalar));
        }
    }
    let mut free_zero: VecDeque<usize> = grouping.zero_rows.iter().copied().collect();
    while slots.len() < n {
        if let Some(z) = free_zero.pop_front() {
            slots.push(Slot { pivot: None, members: vec![(z, C64::new(1.0, 0.0))] });
            continue;
        }
        let (k, _) = slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.pivot.is_some())
            .max_by(|a, b| a.1.members.len().cmp(&b.1.members.len()).then(b.0.cmp(&a.0)))
            .expect("at least one class");
        if slots[k].members.len() < 2 {
            return Err(Error::Internal("no class left to split while padding".into()));
        }
        let moved = slots[k].members.pop().expect("nonempty class");
        let pivot = slots[k].pivot;
        slots.push(Slot { pivot, members: vec![moved] });
    }

    let mut tau = Matrix::zeros(r, n);
    let mut beta0 = Matrix::zeros(n, n);
    let mut lambda = Vec::with_capacity(n);
    let mut columns = Vec::with_capacity(n);
    for (k, slot) in slots.iter().enumerate() {
        match slot.pivot {
            Some(j) => {
                let mass: Vec<C64> = slot.members.iter().map(|m| m.1).collect();
                let lam = 1.0 / lp(&mass, p);
                for &(i, c) in &slot.members {
                    tau[(i, k)] = c * lam;
                }
                for (col, &u) in beta.row(j).iter().enumerate() {
                    beta0[(k, col)] = u / lam;
                }
                lambda.push(lam);
            }
            None => {
                tau[(slot.members[0].0, k)] = C64::new(1.0, 0.0);
                lambda.push(1.0);
            }
        }
        columns.push(PolarColumn { pivot: slot.pivot, rows: slot.members.iter().map(|m| m.0).collect() });
    }

    let out = PolarDecomposition { tau, beta0, grouping, columns, lambda };
    out.verify(beta, e, tol.max(VERIFY_TOL) * 10.0)?;
    Ok(out)
}

impl PolarDecomposition {
    /// Largest entrywise deviation of `τβ₀` from `beta`, relative to `max|β|`.
    pub fn reconstruction_error(&self, beta: &Matrix) -> f64 {
        let diff = self.tau.matmul(&self.beta0).sub(beta).max_abs();
        let scale = beta.max_abs();
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }

    /// Checks the isometry, reconstruction and norm-preservation invariants.
    pub fn verify(&self, beta: &Matrix, e: &Exponent, tol: f64) -> Result<()> {
        let cert = is_lp_isometry(&self.tau, e, tol)?;
        if !cert.is_isometry {
            return Err(Error::Internal(format!("tau is not an isometry: {cert:?}")));
        }
        let err = self.reconstruction_error(beta);
        if err > tol {
            return Err(Error::Internal(format!("tau*beta0 differs from beta by {err:e}")));
        }
        let (a, b) = (lp(beta.data(), e.p()), lp(self.beta0.data(), e.p()));
        if (a - b).abs() > tol * a.max(f64::MIN_POSITIVE) {
            return Err(Error::Internal(format!("entrywise norms differ: {a} vs {b}")));
        }
        Ok(())
    }
}

/// Random `r×n` isometry of `ℓ_p^n` with disjoint column supports.
///
/// Every column gets at least one row; each remaining row joins a random
/// column or, with probability `zero_fraction`, stays zero.
pub fn random_lp_isometry<R: Rng>(rng: &mut R, r: usize, n: usize, p: f64, zero_fraction: f64) -> Matrix {
    assert!(r >= n && n >= 1);
    let mut rows: Vec<usize> = (0..r).collect();
    // Fisher-Yates with the seeded stream.
    for i in (1..r).rev() {
        let j = rng.random_range(0..=i);
        rows.swap(i, j);
    }
    let mut owner = vec![None; r];
    for (k, &i) in rows.iter().take(n).enumerate() {
        owner[i] = Some(k);
    }
    for &i in rows.iter().skip(n) {
        if rng.random::<f64>() >= zero_fraction {
            owner[i] = Some(rng.random_range(0..n));
        }
    }
    let mut tau = Matrix::zeros(r, n);
    for (i, o) in owner.iter().enumerate() {
        if let Some(k) = o {
            let mut z = random::complex_normal(rng);
            if z.norm() < 1e-3 {
                z = C64::new(1.0, 0.0);
            }
            tau[(i, *k)] = z;
        }
    }
    for k in 0..n {
        let nk = lp(&tau.col(k), p);
        for i in 0..r {
            tau[(i, k)] /= nk;
        }
    }
    tau
}
