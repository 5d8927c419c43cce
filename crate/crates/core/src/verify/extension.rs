//! Extension gaps for maps defined on a subspace `V ⊆ W = M_k`.
//!
//! A map `φ: V → M_s` is given by the images `Y_t` of a basis `V_t`. Its
//! level-`L` norm is `sup ‖[φ(x_ij)]‖` over `x ∈ M_L(V)` with `‖x‖ ≤ 1`,
//! both norms taken on `ℓ_p` of the appropriate size. Sampling gives a
//! certified lower bound. An extension `φ̃: M_k → M_s` is fixed by its values
//! `Z_u` on a complement of `V`; writing `φ̃(x) = Σ_q A_q x B_q` gives
//! `‖φ̃_L‖ ≤ ‖[A_1 … A_Q]‖·‖[B_1; …; B_Q]‖` at every level, and the search
//! minimizes that product over the `Z_u`. A second family writes
//! `φ̃ = Σ_t f_t(·)·Y_t` with functionals `f_t` extending the coordinate
//! functionals of `V`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factnorm::{factnorm1_upper, FactnormOptions};
use crate::matrix::{Matrix, C64};
use crate::pnorms::{opnorm_lower, opnorm_upper, Exponent};
use crate::random::{self, derive_seed, SeededRng};

/// Relative gap at or below which the sandwich counts as closed.
pub const CLOSED_TOL: f64 = 1e-6;

const RANK_TOL: f64 = 1e-10;
const POWER_TOL: f64 = 1e-12;

/// `φ: V → M_s` on `V = span{V_t} ⊆ M_k`, given by `φ(V_t) = Y_t`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtensionProblem {
    pub k: usize,
    pub s: usize,
    pub basis: Vec<Matrix>,
    pub images: Vec<Matrix>,
}

impl ExtensionProblem {
    pub fn new(basis: Vec<Matrix>, images: Vec<Matrix>) -> Result<Self> {
        let first = basis.first().ok_or_else(|| Error::input("vbasis", "empty basis"))?;
        let k = first.rows();
        if k == 0 || basis.iter().any(|b| b.shape() != (k, k)) {
            return Err(Error::input("vbasis", "basis elements must be square matrices of one size"));
        }
        if images.len() != basis.len() {
            return Err(Error::input(
                "images",
                format!("{} images for {} basis elements", images.len(), basis.len()),
            ));
        }
        let s = images[0].rows();
        if s == 0 || images.iter().any(|y| y.shape() != (s, s)) {
            return Err(Error::input("images", "images must be square matrices of one size"));
        }
        if basis.iter().chain(&images).any(|m| !m.is_finite()) {
            return Err(Error::input("vbasis", "non-finite entry"));
        }
        if vec_columns(&basis).rank(RANK_TOL) < basis.len() {
            return Err(Error::input("vbasis", "basis elements are linearly dependent"));
        }
        Ok(ExtensionProblem { k, s, basis, images })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// `φ` on all of `M_k` is the only extension.
    pub fn is_full(&self) -> bool {
        self.dim() == self.k * self.k
    }

    /// Identity map on `M_k`, written in the elementary basis.
    pub fn identity(k: usize) -> Self {
        let basis: Vec<Matrix> = (0..k * k).map(|t| elementary(k, t / k, t % k)).collect();
        ExtensionProblem { k, s: k, images: basis.clone(), basis }
    }

    /// Random `d`-dimensional `V ⊆ M_k` with random images in `M_s`.
    pub fn random<R: Rng>(rng: &mut R, k: usize, s: usize, d: usize) -> Self {
        assert!(d >= 1 && d <= k * k);
        loop {
            let basis: Vec<Matrix> = (0..d).map(|_| random::gaussian_matrix(rng, k, k)).collect();
            let images: Vec<Matrix> = (0..d).map(|_| random::gaussian_matrix(rng, s, s)).collect();
            if let Ok(pr) = ExtensionProblem::new(basis, images) {
                return pr;
            }
        }
    }
}

fn elementary(k: usize, i: usize, j: usize) -> Matrix {
    let mut m = Matrix::zeros(k, k);
    m[(i, j)] = C64::new(1.0, 0.0);
    m
}

/// `k² × d` matrix whose columns are the row-major vectorizations.
fn vec_columns(ms: &[Matrix]) -> Matrix {
    let len = ms[0].data().len();
    let mut out = Matrix::zeros(len, ms.len());
    for (t, m) in ms.iter().enumerate() {
        for (i, z) in m.data().iter().enumerate() {
            out[(i, t)] = *z;
        }
    }
    out
}

/// Search budgets for [`extension_gap`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionOptions {
    /// Random starting points per level for the lower search.
    pub samples: usize,
    /// Local steps per lower start and per upper restart.
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ExtensionOptions {
    fn default() -> Self {
        ExtensionOptions { samples: 24, iterations: 60, restarts: 4, seed: 42 }
    }
}

/// Form of the upper bound attained by the reported extension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtensionMethod {
    /// `‖[A_1 … A_Q]‖·‖[B_1; …; B_Q]‖` for `φ̃(x) = Σ_q A_q x B_q`.
    Kraus,
    /// `Σ_t ‖f_t‖·‖Y_t‖` for `φ̃ = Σ_t f_t(·)·Y_t`.
    Functionals,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapLabel {
    /// Upper and lower agree within [`CLOSED_TOL`].
    Closed,
    /// `V = W`: the true gap is zero, the reported one is estimator slack.
    EstimatorSlack,
    /// Slack and a genuine obstruction cannot be told apart.
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExtensionGapReport {
    pub p: Exponent,
    pub level: usize,
    pub k: usize,
    pub s: usize,
    pub dim: usize,
    /// Certified lower bound on `‖φ_L‖`.
    pub origin_lower: f64,
    /// Best lower bound found at each level `1..=L`, carried upward.
    pub level_lowers: Vec<f64>,
    /// Element of `M_L(V)` attaining `origin_lower`.
    pub origin_witness: Matrix,
    /// Certified upper bound on `‖φ̃_L‖` for the best extension found.
    pub best_extension_upper: f64,
    /// Complement of `V` in `M_k` used to parametrize extensions.
    pub complement: Vec<Matrix>,
    /// Values of the best extension on `complement`.
    pub extension_values: Vec<Matrix>,
    /// Number of terms `Q` in `φ̃(x) = Σ_q A_q x B_q`; zero for the
    /// functional form.
    pub kraus_terms: usize,
    pub method: ExtensionMethod,
    pub gap: f64,
    pub label: GapLabel,
    /// `origin_lower ≤ best_extension_upper` within `1e−9` relative.
    pub consistent: bool,
}

/// Certified lower bound on `‖φ_L‖` from the block coefficients `c`
/// (`L²·d` entries, block-major), with the element of `M_L(V)` used.
fn level_ratio(pr: &ExtensionProblem, e: &Exponent, level: usize, c: &[C64], seed: u64) -> Result<(f64, Matrix)> {
    let (k, s, d) = (pr.k, pr.s, pr.dim());
    let mut x = Matrix::zeros(level * k, level * k);
    let mut y = Matrix::zeros(level * s, level * s);
    for i in 0..level {
        for j in 0..level {
            let coef = &c[(i * level + j) * d..(i * level + j + 1) * d];
            let mut xb = Matrix::zeros(k, k);
            let mut yb = Matrix::zeros(s, s);
            for t in 0..d {
                xb = xb.add(&pr.basis[t].scale(coef[t]));
                yb = yb.add(&pr.images[t].scale(coef[t]));
            }
            x.set_block(i * k, j * k, &xb);
            y.set_block(i * s, j * s, &yb);
        }
    }
    let denom = opnorm_upper(&x, e);
    if denom == 0.0 || !denom.is_finite() {
        return Ok((0.0, x));
    }
    let num = opnorm_lower(&y, e, 2, POWER_TOL, seed)?.lower;
    Ok((num / denom, x))
}

fn step_vec(rng: &mut SeededRng, c: &[C64], step: f64) -> Vec<C64> {
    let scale = c.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-12) * step;
    let mut out = c.to_vec();
    if rng.random::<bool>() {
        for z in out.iter_mut() {
            *z += random::complex_normal(rng) * scale;
        }
    } else {
        let i = rng.random_range(0..out.len());
        out[i] += random::complex_normal(rng) * scale;
    }
    out
}

struct LevelBest {
    ratio: f64,
    coef: Vec<C64>,
    witness: Matrix,
}

fn search_level(
    pr: &ExtensionProblem,
    e: &Exponent,
    level: usize,
    carried: Option<&LevelBest>,
    opts: &ExtensionOptions,
) -> Result<LevelBest> {
    let d = pr.dim();
    let len = level * level * d;
    let mut rng = random::rng(derive_seed(opts.seed, level as u64));
    let mut starts: Vec<Vec<C64>> = Vec::new();
    for t in 0..d {
        // I_L ⊗ V_t
        let mut c = vec![C64::new(0.0, 0.0); len];
        for i in 0..level {
            c[(i * level + i) * d + t] = C64::new(1.0, 0.0);
        }
        starts.push(c);
    }
    if let Some(prev) = carried {
        let pl = level - 1;
        let mut c = vec![C64::new(0.0, 0.0); len];
        for i in 0..pl {
            for j in 0..pl {
                for t in 0..d {
                    c[(i * level + j) * d + t] = prev.coef[(i * pl + j) * d + t];
                }
            }
        }
        starts.push(c);
    }
    for _ in 0..opts.samples {
        starts.push(random::gaussian_vector(&mut rng, len));
    }
    let mut best: Option<LevelBest> = None;
    let mut scored = Vec::with_capacity(starts.len());
    for c in starts {
        let (ratio, x) = level_ratio(pr, e, level, &c, rng.random())?;
        scored.push((ratio, c, x));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    // Local refinement of the few most promising starts.
    for (ratio, coef, witness) in scored.into_iter().take(3) {
        let mut cur = LevelBest { ratio, coef, witness };
        let mut step = 0.3;
        for _ in 0..opts.iterations {
            let cand = step_vec(&mut rng, &cur.coef, step);
            let (r, x) = level_ratio(pr, e, level, &cand, rng.random())?;
            if r > cur.ratio {
                cur = LevelBest { ratio: r, coef: cand, witness: x };
                step = (step * 1.3).min(1.0);
            } else {
                step = (step * 0.8).max(1e-4);
            }
        }
        if best.as_ref().is_none_or(|b| cur.ratio > b.ratio) {
            best = Some(cur);
        }
    }
    Ok(best.expect("at least one start"))
}

/// Linear-algebra data shared by all extensions of one problem.
struct Parametrization {
    complement: Vec<Matrix>,
    /// Column `i·k + j` holds the coordinates of `E_ij` in `[V | complement]`.
    coords: Matrix,
}

fn parametrize(pr: &ExtensionProblem) -> Result<Parametrization> {
    let k = pr.k;
    let mut chosen = pr.basis.clone();
    let mut complement = Vec::new();
    for idx in 0..k * k {
        if chosen.len() == k * k {
            break;
        }
        let cand = elementary(k, idx / k, idx % k);
        let mut trial = chosen.clone();
        trial.push(cand.clone());
        if vec_columns(&trial).rank(RANK_TOL) == trial.len() {
            chosen = trial;
            complement.push(cand);
        }
    }
    let full = vec_columns(&chosen);
    let coords = full
        .inverse(1e-13)
        .ok_or_else(|| Error::Internal("basis of M_k is numerically singular".into()))?;
    Ok(Parametrization { complement, coords })
}

/// The Kraus-type pair `(R, C)` of the extension with complement values `z`.
fn kraus_pair(pr: &ExtensionProblem, par: &Parametrization, z: &[Matrix]) -> (Matrix, Matrix) {
    let (k, s, d) = (pr.k, pr.s, pr.dim());
    // K[(a,i),(j,b)] = φ̃(E_ij)[a,b]
    let mut kmat = Matrix::zeros(s * k, k * s);
    for i in 0..k {
        for j in 0..k {
            let col = i * k + j;
            let mut img = Matrix::zeros(s, s);
            for t in 0..d {
                img = img.add(&pr.images[t].scale(par.coords[(t, col)]));
            }
            for (u, zu) in z.iter().enumerate() {
                img = img.add(&zu.scale(par.coords[(d + u, col)]));
            }
            for a in 0..s {
                for b in 0..s {
                    kmat[(a * k + i, j * s + b)] = img[(a, b)];
                }
            }
        }
    }
    let svd = kmat.svd();
    let top = svd.s.first().copied().unwrap_or(0.0);
    let q = svd.s.iter().filter(|&&x| x > 1e-14 * top && x > 0.0).count();
    let mut r = Matrix::zeros(s, q * k);
    let mut c = Matrix::zeros(q * k, s);
    for t in 0..q {
        let w = svd.s[t].sqrt();
        for a in 0..s {
            for i in 0..k {
                r[(a, t * k + i)] = svd.u[(a * k + i, t)] * w;
            }
        }
        for j in 0..k {
            for b in 0..s {
                c[(t * k + j, b)] = svd.vh[(t, j * s + b)] * w;
            }
        }
    }
    (r, c)
}

struct UpperCandidate {
    value: f64,
    /// Values of the extension on the complement.
    z: Vec<Matrix>,
    kraus_terms: usize,
    method: ExtensionMethod,
}

fn kraus_value(r: &Matrix, c: &Matrix, e: &Exponent) -> f64 {
    if r.cols() == 0 {
        return 0.0;
    }
    let v = opnorm_upper(r, e) * opnorm_upper(c, e);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// Hill climb over the complement values, scoring the Kraus bound.
fn climb_kraus(
    pr: &ExtensionProblem,
    par: &Parametrization,
    e: &Exponent,
    start: Vec<Matrix>,
    iterations: usize,
    seed: u64,
) -> UpperCandidate {
    let mut rng = random::rng(seed);
    let eval = |z: &[Matrix]| {
        let (r, c) = kraus_pair(pr, par, z);
        (kraus_value(&r, &c, e), r.cols() / pr.k)
    };
    let scale = pr.images.iter().map(Matrix::max_abs).fold(0.0, f64::max).max(1e-12);
    let (mut value, mut terms) = eval(&start);
    let mut z = start;
    let mut step = 0.3;
    if !z.is_empty() {
        for _ in 0..iterations {
            let u = rng.random_range(0..z.len());
            let mut cand = z.clone();
            let size = cand[u].max_abs().max(scale) * step;
            cand[u] = cand[u].add(&random::gaussian_matrix(&mut rng, pr.s, pr.s).scale_real(size));
            let (v, q) = eval(&cand);
            if v < value {
                (value, terms, z) = (v, q, cand);
                step = (step * 1.3).min(1.0);
            } else {
                step = (step * 0.8).max(1e-5);
            }
        }
    }
    UpperCandidate { value, z, kraus_terms: terms, method: ExtensionMethod::Kraus }
}

/// `φ̃ = Σ_t f_t(·)·Y_t` with `f_t` extending the coordinate functionals of
/// `V`. Functionals are automatically completely bounded with the same
/// norm, so `‖φ̃_L‖ ≤ Σ_t ‖f_t‖·‖Y_t‖`; each `‖f_t‖` is the factorization
/// norm of its matrix `F_t` (`f_t(x) = Σ F_ij x_ij`), bounded from above.
fn functional_candidate(
    pr: &ExtensionProblem,
    par: &Parametrization,
    e: &Exponent,
    iterations: usize,
    seed: u64,
) -> Result<UpperCandidate> {
    let (k, d) = (pr.k, pr.dim());
    let bt = vec_columns(&pr.basis).transpose();
    let bt_pinv = bt.pinv(1e-12);
    // Projector onto {vec F : Σ F_ij (V_t)_ij = 0 for all t}.
    let proj = Matrix::identity(k * k).sub(&bt_pinv.matmul(&bt));
    let fopts = FactnormOptions { r_max: None, restarts: 1, iterations: 40, seed };
    let norm1 = |f: &Matrix| -> Result<f64> {
        Ok(if f.is_zero() { 0.0 } else { factnorm1_upper(f, e, &fopts)?.factorization.value })
    };
    let mut rng = random::rng(seed);
    let mut total = 0.0;
    let mut functionals = Vec::with_capacity(d);
    for t in 0..d {
        let mut unit = vec![C64::new(0.0, 0.0); d];
        unit[t] = C64::new(1.0, 0.0);
        let mut f = Matrix::from_vec(k, k, bt_pinv.matvec(&unit));
        let mut best = norm1(&f)?;
        let mut step = 0.3;
        if d < k * k {
            for _ in 0..iterations {
                let dir = proj.matvec(&random::gaussian_vector(&mut rng, k * k));
                let cand = f.add(&Matrix::from_vec(k, k, dir).scale_real(f.max_abs() * step));
                let v = norm1(&cand)?;
                if v < best {
                    (best, f) = (v, cand);
                    step = (step * 1.3).min(1.0);
                } else {
                    step = (step * 0.8).max(1e-5);
                }
            }
        }
        total += best * opnorm_upper(&pr.images[t], e);
        functionals.push(f);
    }
    let z = par
        .complement
        .iter()
        .map(|cu| {
            functionals.iter().zip(&pr.images).fold(Matrix::zeros(pr.s, pr.s), |acc, (f, y)| {
                acc.add(&y.scale(f.pairing(cu)))
            })
        })
        .collect();
    Ok(UpperCandidate { value: total, z, kraus_terms: 0, method: ExtensionMethod::Functionals })
}

/// Estimates `‖φ_L‖` from below and the smallest `‖φ̃_L‖` over extensions
/// `φ̃` from above.
pub fn extension_gap(pr: &ExtensionProblem, e: &Exponent, level: usize, opts: &ExtensionOptions) -> Result<ExtensionGapReport> {
    if level == 0 {
        return Err(Error::input("level", "level must be at least 1"));
    }
    if opts.samples == 0 || opts.restarts == 0 {
        return Err(Error::Parameter("samples and restarts must be positive".into()));
    }
    let mut level_lowers = Vec::with_capacity(level);
    let mut carried: Option<LevelBest> = None;
    let mut best_witness: Option<Matrix> = None;
    for l in 1..=level {
        let found = search_level(pr, e, l, carried.as_ref(), opts)?;
        let prev = level_lowers.last().copied().unwrap_or(0.0);
        if found.ratio > prev || best_witness.is_none() {
            best_witness = Some(found.witness.clone());
        }
        level_lowers.push(found.ratio.max(prev));
        if carried.as_ref().is_none_or(|c| found.ratio >= c.ratio) {
            carried = Some(found);
        } else if let Some(c) = carried.as_mut() {
            // Keep the better witness, padded one level up.
            let pl = l - 1;
            let d = pr.dim();
            let mut coef = vec![C64::new(0.0, 0.0); l * l * d];
            for i in 0..pl {
                for j in 0..pl {
                    for t in 0..d {
                        coef[(i * l + j) * d + t] = c.coef[(i * pl + j) * d + t];
                    }
                }
            }
            c.coef = coef;
        }
    }
    let origin_lower = *level_lowers.last().expect("level >= 1");
    // Pad the witness to level L.
    let mut origin_witness = Matrix::zeros(level * pr.k, level * pr.k);
    origin_witness.set_block(0, 0, &best_witness.expect("level >= 1"));

    let par = parametrize(pr)?;
    let nz = par.complement.len();
    let upper = (0..opts.restarts)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(opts.seed, 1000 + t as u64);
            let start: Vec<Matrix> = if t == 0 {
                vec![Matrix::zeros(pr.s, pr.s); nz]
            } else {
                let mut rng = random::rng(seed);
                let scale = pr.images.iter().map(Matrix::frobenius).fold(0.0, f64::max) / pr.s as f64;
                (0..nz).map(|_| random::gaussian_matrix(&mut rng, pr.s, pr.s).scale_real(scale)).collect()
            };
            climb_kraus(pr, &par, e, start, opts.iterations, seed)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .chain(std::iter::once(functional_candidate(pr, &par, e, opts.iterations, derive_seed(opts.seed, 999))?))
        .reduce(|a, b| if b.value < a.value { b } else { a })
        .expect("restarts >= 1");

    let gap = upper.value - origin_lower;
    let label = if gap.abs() <= CLOSED_TOL * upper.value.max(1.0) {
        GapLabel::Closed
    } else if pr.is_full() {
        GapLabel::EstimatorSlack
    } else {
        GapLabel::Inconclusive
    };
    Ok(ExtensionGapReport {
        p: *e,
        level,
        k: pr.k,
        s: pr.s,
        dim: pr.dim(),
        origin_lower,
        level_lowers,
        origin_witness,
        best_extension_upper: upper.value,
        complement: par.complement.clone(),
        extension_values: upper.z,
        kraus_terms: upper.kraus_terms,
        method: upper.method,
        gap,
        label,
        consistent: origin_lower <= upper.value * (1.0 + 1e-9),
    })
}
