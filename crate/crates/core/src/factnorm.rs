//! Factorization norms on scalar matrices.
//!
//! `‖v‖₁,ₙ = inf ‖α‖_{p′}·‖w‖_{p→p}·‖β‖_p` over all factorizations
//! `v = αwβ` with `α ∈ 𝕄_{n,r}`, `w ∈ 𝕄_r`, `β ∈ 𝕄_{r,n}`. Its dual norm,
//! under the bilinear pairing `⟨f, v⟩ = Σ f_ij v_ij`, is the operator norm
//! `‖f‖_{p→p}`. Upper bounds come from explicit factorizations, lower
//! bounds from dual witnesses `f`. Every reported operator norm is a
//! certified upper bound, so both sides are sound.
//!
//! `‖·‖₂,ₙ` restricts the factors to `ℓ_p`-polar decomposable ones; the
//! search here uses invertible square factors, which lose no generality.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, C64};
use crate::pnorms::{duality_map, holder_dual, lp, opnorm_lower, opnorm_upper, Exponent, Method, NormEstimate, Witness};
use crate::random::{self, derive_seed, SeededRng};

/// Relative reconstruction tolerance for accepted factorizations.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

/// Search budgets shared by the estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactnormOptions {
    /// Largest inner dimension searched; `None` means `n²`.
    pub r_max: Option<usize>,
    pub restarts: usize,
    /// Local-search steps per restart.
    pub iterations: usize,
    pub seed: u64,
}

impl Default for FactnormOptions {
    fn default() -> Self {
        FactnormOptions { r_max: None, restarts: 4, iterations: 200, seed: 42 }
    }
}

impl FactnormOptions {
    fn check(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Parameter("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// `v = α·w·β` together with its certified value.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Factorization {
    pub r: usize,
    pub alpha: Matrix,
    pub w: Matrix,
    pub beta: Matrix,
    /// `‖α‖_{p′} · opnorm_upper(w) · ‖β‖_p`.
    pub value: f64,
}

impl Factorization {
    /// Builds a factorization and evaluates its value.
    pub fn new(alpha: Matrix, w: Matrix, beta: Matrix, e: &Exponent) -> Result<Self> {
        let r = w.rows();
        if !w.is_square() || alpha.cols() != r || beta.rows() != r || alpha.rows() != beta.cols() {
            return Err(Error::input(
                "factorization",
                format!(
                    "shapes {:?} * {:?} * {:?} do not compose to a square matrix",
                    alpha.shape(),
                    w.shape(),
                    beta.shape()
                ),
            ));
        }
        let value = lp(alpha.data(), e.conj()) * opnorm_upper(&w, e) * lp(beta.data(), e.p());
        Ok(Factorization { r, alpha, w, beta, value })
    }

    /// `v = Iₙ·v·Iₙ`.
    pub fn trivial(v: &Matrix, e: &Exponent) -> Result<Self> {
        let n = v.rows();
        Factorization::new(Matrix::identity(n), v.clone(), Matrix::identity(n), e)
    }

    pub fn product(&self) -> Matrix {
        self.alpha.matmul(&self.w).matmul(&self.beta)
    }

    /// Max entrywise deviation from `v`, relative to `max|v|` (absolute
    /// when `v = 0`).
    pub fn reconstruction_error(&self, v: &Matrix) -> f64 {
        let d = self.product().sub(v).max_abs();
        let s = v.max_abs();
        if s > 0.0 {
            d / s
        } else {
            d
        }
    }

    pub fn reproduces(&self, v: &Matrix) -> bool {
        self.reconstruction_error(v) <= RECONSTRUCTION_TOL
    }

    /// The factorization of `c·v` obtained by scaling `w`.
    pub fn scaled(&self, c: C64, e: &Exponent) -> Result<Self> {
        Factorization::new(self.alpha.clone(), self.w.scale(c), self.beta.clone(), e)
    }

    /// Rescales so that `‖w‖ ≤ 1` (certified), `‖α‖_{p′} = value^{1/p′}` and
    /// `‖β‖_p = value^{1/p}`; the product is unchanged.
    pub fn normalized(&self, e: &Exponent) -> Self {
        let (na, nb, nw) = (lp(self.alpha.data(), e.conj()), lp(self.beta.data(), e.p()), opnorm_upper(&self.w, e));
        let v = na * nw * nb;
        if v == 0.0 {
            let n = self.alpha.rows();
            return Factorization {
                r: self.r,
                alpha: Matrix::zeros(n, self.r),
                w: Matrix::zeros(self.r, self.r),
                beta: Matrix::zeros(self.r, n),
                value: 0.0,
            };
        }
        let sa = v.powf(1.0 / e.conj()) / na;
        let sb = v.powf(1.0 / e.p()) / nb;
        Factorization {
            r: self.r,
            alpha: self.alpha.scale_real(sa),
            w: self.w.scale_real(1.0 / nw),
            beta: self.beta.scale_real(sb),
            value: v,
        }
    }
}

/// How the operator-norm bound of a dual witness was certified.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundSource {
    /// [`opnorm_upper`].
    Interpolation,
    /// `‖a·bᵀ‖_{p→p} = ‖a‖_p·‖b‖_{p′}` for a rank-one `f`.
    RankOne,
}

/// A matrix `f` with `|⟨f, v⟩| / f_op_upper ≤ ‖v‖₁,ₙ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualWitness {
    pub f: Matrix,
    pub pairing: f64,
    pub f_op_upper: f64,
    pub bound_source: BoundSource,
}

impl DualWitness {
    fn certified(f: Matrix, v: &Matrix, e: &Exponent) -> Self {
        let pairing = f.pairing(v).norm();
        let f_op_upper = opnorm_upper(&f, e);
        DualWitness { f, pairing, f_op_upper, bound_source: BoundSource::Interpolation }
    }

    pub fn bound(&self) -> f64 {
        if self.f_op_upper > 0.0 {
            self.pairing / self.f_op_upper
        } else {
            0.0
        }
    }
}

/// Upper side of a factorization-norm query.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UpperBound {
    pub estimate: NormEstimate,
    pub factorization: Factorization,
}

/// Lower side of a factorization-norm query.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LowerBound {
    pub estimate: NormEstimate,
    pub witness: DualWitness,
}

/// Both sides of `‖v‖₁,ₙ`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sandwich {
    pub estimate: NormEstimate,
    pub factorization: Factorization,
    pub witness: DualWitness,
}

fn check_square(v: &Matrix) -> Result<()> {
    if !v.is_square() {
        return Err(Error::input("v", format!("expected a square matrix, got {}x{}", v.rows(), v.cols())));
    }
    Ok(())
}

/// Sum of singular values: `‖v‖₁,ₙ` at `p = 2`.
pub fn nuclear_oracle_p2(v: &Matrix) -> f64 {
    v.singular_values().iter().sum()
}

/// `α = U_k Σ_k^{1/2}`, `w = I_k`, `β = Σ_k^{1/2} V_k^H` on the numerical
/// rank `k` of `v`. Exact at `p = 2` and for rank one.
fn svd_factorization(v: &Matrix, e: &Exponent) -> Option<Factorization> {
    let svd = v.svd();
    let top = svd.s.first().copied().unwrap_or(0.0);
    let k = svd.s.iter().filter(|&&s| s > 1e-13 * top).count();
    if k == 0 {
        return None;
    }
    let n = v.rows();
    let mut alpha = Matrix::zeros(n, k);
    let mut beta = Matrix::zeros(k, n);
    for q in 0..k {
        let h = svd.s[q].sqrt();
        for i in 0..n {
            alpha[(i, q)] = svd.u[(i, q)] * h;
            beta[(q, i)] = svd.vh[(q, i)] * h;
        }
    }
    let f = Factorization::new(alpha, Matrix::identity(k), beta, e).ok()?;
    f.reproduces(v).then_some(f)
}

fn matrix_like(m: &Matrix, data: Vec<C64>) -> Matrix {
    Matrix::new(m.rows(), m.cols(), data).expect("same shape")
}

/// `∇‖m‖_q`, a unit vector of `ℓ_{q′}` in the entrywise sense.
fn norm_gradient(m: &Matrix, q: f64) -> Matrix {
    let nm = lp(m.data(), q);
    let g = duality_map(m.data(), q).into_iter().map(|z| z / nm.powf(q - 1.0)).collect();
    matrix_like(m, g)
}

/// Smallest change of `beta` restoring `alpha·beta = v`.
fn retract(v: &Matrix, alpha: &Matrix, beta: &Matrix) -> Matrix {
    let resid = v.sub(&alpha.matmul(beta));
    beta.add(&alpha.pinv(1e-12).matmul(&resid))
}

fn rel_residual(v: &Matrix, alpha: &Matrix, beta: &Matrix) -> f64 {
    let d = alpha.matmul(beta).sub(v).max_abs();
    let s = v.max_abs();
    if s > 0.0 {
        d / s
    } else {
        d
    }
}

/// Projects `(gα, gβ)` onto the tangent space `{(dα, dβ): dα·β + α·dβ = 0}`
/// by solving `(αα^H)Λ + Λ(β^Hβ) = gα·β + α·gβ`.
fn tangent_project(alpha: &Matrix, beta: &Matrix, ga: &Matrix, gb: &Matrix) -> (Matrix, Matrix) {
    let rhs = ga.matmul(beta).add(&alpha.matmul(gb));
    let left = alpha.matmul(&alpha.adjoint()).svd();
    let right = beta.adjoint().matmul(beta).svd();
    let mut core = left.u.adjoint().matmul(&rhs).matmul(&right.u);
    let n = core.rows();
    for i in 0..n {
        for j in 0..n {
            let d = left.s[i] + right.s[j];
            core[(i, j)] = if d > 0.0 { core[(i, j)] / d } else { C64::new(0.0, 0.0) };
        }
    }
    let lambda = left.u.matmul(&core).matmul(&right.u.adjoint());
    (ga.sub(&lambda.matmul(&beta.adjoint())), gb.sub(&alpha.adjoint().matmul(&lambda)))
}

/// Rescales to `‖α‖_{p′} = ‖β‖_p`; `None` if either factor vanishes.
fn balance(alpha: &Matrix, beta: &Matrix, e: &Exponent) -> Option<(Matrix, Matrix, f64)> {
    let (na, nb) = (lp(alpha.data(), e.conj()), lp(beta.data(), e.p()));
    if !(na > 0.0 && nb > 0.0 && na.is_finite() && nb.is_finite()) {
        return None;
    }
    let t = (nb / na).sqrt();
    Some((alpha.scale_real(t), beta.scale_real(1.0 / t), na * nb))
}

/// Gradient descent on `‖α‖_{p′}·‖β‖_p` along `αβ = v` with `w = I`,
/// retracting `β` after every step. The value needs no operator-norm
/// bound, since `‖I‖ = 1`.
fn descend_atoms(v: &Matrix, alpha: &Matrix, beta: &Matrix, e: &Exponent, iterations: usize) -> Option<Factorization> {
    let (p, pc) = (e.p(), e.conj());
    let beta = retract(v, alpha, beta);
    if rel_residual(v, alpha, &beta) > RECONSTRUCTION_TOL {
        return None;
    }
    let (mut a, mut b, mut cur) = balance(alpha, &beta, e)?;
    let mut t = 0.05;
    for _ in 0..iterations {
        let s = cur.sqrt();
        let (ga, gb) = tangent_project(&a, &b, &norm_gradient(&a, pc), &norm_gradient(&b, p));
        let (ga, gb) = (ga.scale_real(s * t), gb.scale_real(s * t));
        let a2 = a.sub(&ga);
        let b2 = retract(v, &a2, &b.sub(&gb));
        let accepted = rel_residual(v, &a2, &b2) <= 0.1 * RECONSTRUCTION_TOL;
        match balance(&a2, &b2, e) {
            Some((a3, b3, val)) if accepted && val < cur => {
                let gain = (cur - val) / cur;
                a = a3;
                b = b3;
                cur = val;
                t = (t * 1.3).min(0.5);
                if gain < 1e-13 {
                    break;
                }
            }
            _ => {
                t *= 0.5;
                if t < 1e-12 {
                    break;
                }
            }
        }
    }
    let r = a.cols();
    let f = Factorization::new(a, Matrix::identity(r), b, e).ok()?;
    (f.value.is_finite() && f.reproduces(v)).then_some(f)
}

fn pad_start(base: &Factorization, r: usize, rng: &mut SeededRng) -> (Matrix, Matrix) {
    let n = base.alpha.rows();
    let extra = r - base.alpha.cols();
    let core_a = base.alpha.matmul(&base.w);
    if extra == 0 {
        return (core_a, base.beta.clone());
    }
    let sa = core_a.max_abs().max(1e-300) * 0.1;
    let sb = base.beta.max_abs().max(1e-300) * 0.1;
    (
        Matrix::hstack(&core_a, &random::gaussian_matrix(rng, n, extra).scale_real(sa)),
        Matrix::vstack(&base.beta, &random::gaussian_matrix(rng, extra, n).scale_real(sb)),
    )
}

fn inner_dims(n: usize, r_max: usize) -> Vec<usize> {
    let mut rs = vec![n, (n + r_max) / 2, r_max];
    rs.dedup();
    rs
}

fn better(a: Factorization, b: Factorization) -> Factorization {
    if b.value < a.value {
        b
    } else {
        a
    }
}

/// Upper bound on `‖v‖₁,ₙ` from the best factorization found.
///
/// Candidates are the trivial factorization, the truncated singular value
/// factorization, any `hints` that reproduce `v`, and seeded descent on
/// `‖α‖_{p′}·‖β‖_p` over exact factorizations `v = αβ` (`w = I`) with inner
/// dimensions `n ≤ r ≤ r_max`. Since `‖αw‖_{p′} ≤ ‖w‖·‖α‖_{p′}`, taking
/// `w = I` loses nothing.
pub fn factnorm1_upper_with_hints(
    v: &Matrix,
    e: &Exponent,
    opts: &FactnormOptions,
    hints: &[Factorization],
) -> Result<UpperBound> {
    check_square(v)?;
    opts.check()?;
    let n = v.rows();
    let r_max = opts.r_max.unwrap_or(n * n);
    if r_max < n {
        return Err(Error::Parameter(format!("rmax = {r_max} is smaller than n = {n}")));
    }
    let mut best = Factorization::trivial(v, e)?;
    let trivial = Factorization::new(Matrix::identity(n), Matrix::identity(n), v.clone(), e)?;
    best = better(best, trivial.clone());
    if let Some(f) = svd_factorization(v, e) {
        best = better(best, f);
    }
    for h in hints {
        if h.alpha.rows() == n && h.reproduces(v) {
            best = better(best, h.clone());
        }
    }
    if !v.is_zero() && opts.iterations > 0 {
        let dims = inner_dims(n, r_max);
        let seeds = best.clone();
        let found: Vec<Option<Factorization>> = (0..opts.restarts)
            .into_par_iter()
            .map(|k| {
                let mut rng = random::rng(derive_seed(opts.seed, k as u64));
                let r = dims[k % dims.len()];
                let (a, b) = match k {
                    0 => pad_start(&seeds, r.max(seeds.r), &mut rng),
                    1 => pad_start(&trivial, r, &mut rng),
                    _ => {
                        let a = random::gaussian_matrix(&mut rng, n, r);
                        let b = a.pinv(1e-12).matmul(v);
                        (a, b)
                    }
                };
                descend_atoms(v, &a, &b, e, opts.iterations)
            })
            .collect();
        for f in found.into_iter().flatten() {
            best = better(best, f);
        }
    }
    Ok(UpperBound {
        estimate: NormEstimate {
            lower: 0.0,
            upper: Some(best.value),
            witness: Witness::None,
            method: Method::FactorizationSearch,
            restarts: opts.restarts,
            tolerance: RECONSTRUCTION_TOL,
        },
        factorization: best,
    })
}

/// [`factnorm1_upper_with_hints`] without hints.
pub fn factnorm1_upper(v: &Matrix, e: &Exponent, opts: &FactnormOptions) -> Result<UpperBound> {
    factnorm1_upper_with_hints(v, e, opts, &[])
}

/// Best rank-one witness `f = a·bᵀ`: `b` maximizes `‖vb‖_{p′}` on the unit
/// sphere of `ℓ_{p′}`, `a` is the Hölder dual of `vb`.
fn rank_one_witness(v: &Matrix, e: &Exponent, restarts: usize, seed: u64) -> Result<DualWitness> {
    let est = opnorm_lower(v, &e.dual(), restarts, 1e-13, seed)?;
    let Witness::Vector { x: b } = est.witness else {
        return Err(Error::Internal("power iteration returned no vector".into()));
    };
    let a = holder_dual(&v.matvec(&b), e.p());
    let f = Matrix::outer(&a, &b);
    let pairing = f.pairing(v).norm();
    let f_op_upper = lp(&a, e.p()) * lp(&b, e.conj());
    Ok(DualWitness { f, pairing, f_op_upper, bound_source: BoundSource::RankOne })
}

/// Dual candidate from the stationarity condition of `min ‖α‖_{p′}‖β‖_p`
/// subject to `αβ = v`: `‖β‖_p·∇‖α‖_{p′} = Λβ^H`, `f = conj(Λ)`.
fn multiplier_witness(v: &Matrix, fact: &Factorization, e: &Exponent) -> Option<DualWitness> {
    let alpha = fact.alpha.matmul(&fact.w);
    let nb = lp(fact.beta.data(), e.p());
    if nb == 0.0 || alpha.is_zero() {
        return None;
    }
    let g = norm_gradient(&alpha, e.conj()).scale_real(nb);
    let lambda = g.matmul(&fact.beta.adjoint().pinv(1e-12));
    lambda.is_finite().then(|| DualWitness::certified(lambda.conj(), v, e))
}

fn ascend_dual(v: &Matrix, start: DualWitness, e: &Exponent, iterations: usize, rng: &mut SeededRng) -> DualWitness {
    let mut cur = start;
    let mut step: f64 = 0.3;
    for _ in 0..iterations {
        let cand = DualWitness::certified(random::perturb(rng, &cur.f, step), v, e);
        if cand.bound() > cur.bound() {
            cur = cand;
            step = (step * 1.5).min(1.0);
        } else {
            step *= 0.7;
            if step < 1e-7 {
                step = 0.3;
            }
        }
    }
    cur
}

fn better_dual(a: DualWitness, b: DualWitness) -> DualWitness {
    if b.bound() > a.bound() {
        b
    } else {
        a
    }
}

/// Lower bound on `‖v‖₁,ₙ` by duality: the largest `|⟨f, v⟩| / ‖f‖` found.
///
/// Candidates are `Iₙ`, diagonal phases, `conj(sign v)`, `conj(UV^H)`,
/// the best rank-one Hölder pair, and seeded random matrices refined by
/// ascent.
pub fn factnorm1_lower(v: &Matrix, e: &Exponent, opts: &FactnormOptions) -> Result<LowerBound> {
    factnorm1_lower_with_hints(v, e, opts, &[])
}

/// [`factnorm1_lower`] with extra candidates derived from factorizations
/// of `v` (their Lagrange multipliers).
pub fn factnorm1_lower_with_hints(
    v: &Matrix,
    e: &Exponent,
    opts: &FactnormOptions,
    hints: &[Factorization],
) -> Result<LowerBound> {
    check_square(v)?;
    opts.check()?;
    let n = v.rows();
    let mut best = DualWitness::certified(Matrix::identity(n), v, e);
    let phases: Vec<C64> = (0..n)
        .map(|i| {
            let s = crate::pnorms::csign(v[(i, i)]).conj();
            if s.norm() == 0.0 {
                C64::new(1.0, 0.0)
            } else {
                s
            }
        })
        .collect();
    best = better_dual(best, DualWitness::certified(Matrix::from_diag(&phases), v, e));
    if !v.is_zero() {
        best = better_dual(best, DualWitness::certified(v.map(|z| crate::pnorms::csign(z).conj()), v, e));
        let svd = v.svd();
        best = better_dual(best, DualWitness::certified(svd.u.matmul(&svd.vh).conj(), v, e));
        best = better_dual(best, rank_one_witness(v, e, opts.restarts, derive_seed(opts.seed, 0x5EED))?);
        for h in hints.iter().filter(|h| h.reproduces(v)) {
            if let Some(w) = multiplier_witness(v, h, e) {
                best = better_dual(best, w);
            }
        }
        if opts.iterations > 0 {
            let seeds = best.clone();
            let found: Vec<DualWitness> = (0..opts.restarts)
                .into_par_iter()
                .map(|k| {
                    let mut rng = random::rng(derive_seed(opts.seed, 0x1000 + k as u64));
                    let start = if k == 0 && seeds.bound_source == BoundSource::Interpolation {
                        seeds.clone()
                    } else {
                        DualWitness::certified(random::gaussian_matrix(&mut rng, n, n), v, e)
                    };
                    ascend_dual(v, start, e, opts.iterations, &mut rng)
                })
                .collect();
            for w in found {
                best = better_dual(best, w);
            }
        }
    }
    Ok(LowerBound {
        estimate: NormEstimate {
            lower: best.bound(),
            upper: None,
            witness: Witness::Matrix { m: best.f.clone() },
            method: Method::DualPairing,
            restarts: opts.restarts,
            tolerance: 0.0,
        },
        witness: best,
    })
}

/// Certified sandwich `lower ≤ ‖v‖₁,ₙ ≤ upper`.
pub fn factnorm1(v: &Matrix, e: &Exponent, opts: &FactnormOptions) -> Result<Sandwich> {
    let up = factnorm1_upper(v, e, opts)?;
    let lo = factnorm1_lower_with_hints(v, e, opts, std::slice::from_ref(&up.factorization))?;
    let upper = up.factorization.value.max(lo.witness.bound());
    Ok(Sandwich {
        estimate: NormEstimate {
            lower: lo.witness.bound(),
            upper: Some(upper),
            witness: lo.estimate.witness,
            method: Method::FactorizationSearch,
            restarts: opts.restarts,
            tolerance: RECONSTRUCTION_TOL,
        },
        factorization: up.factorization,
        witness: lo.witness,
    })
}

/// `(a, b)` candidate for the restricted norm with its value.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SquareFactorization {
    pub a: Matrix,
    pub b: Matrix,
    /// `‖a‖_{p′}·opnorm_upper(a⁻¹vb⁻¹)·‖b‖_p`.
    pub value: f64,
}

impl SquareFactorization {
    pub fn as_factorization(&self, v: &Matrix, e: &Exponent) -> Result<Factorization> {
        let ai = self.a.inverse(1e-12).ok_or_else(|| Error::Internal("singular factor".into()))?;
        let bi = self.b.inverse(1e-12).ok_or_else(|| Error::Internal("singular factor".into()))?;
        Factorization::new(self.a.clone(), ai.matmul(v).matmul(&bi), self.b.clone(), e)
    }
}

const RCOND: f64 = 1e-10;

fn evaluate_square(v: &Matrix, a: &Matrix, b: &Matrix, e: &Exponent) -> Option<SquareFactorization> {
    let ai = a.inverse(RCOND)?;
    let bi = b.inverse(RCOND)?;
    let (na, nb) = (lp(a.data(), e.conj()), lp(b.data(), e.p()));
    let t = (nb / na).sqrt();
    let (a, b) = (a.scale_real(t), b.scale_real(1.0 / t));
    let w = ai.matmul(v).matmul(&bi);
    let value = lp(a.data(), e.conj()) * opnorm_upper(&w, e) * lp(b.data(), e.p());
    value.is_finite().then_some(SquareFactorization { a, b, value })
}

/// Upper bound on `‖v‖₂,ₙ` over invertible square factors `a`, `b`.
///
/// Seeds are `a = b = I`, the regularized singular value pair (also refined
/// by descent on `‖a‖_{p′}‖b‖_p` along `ab = v`) and random matrices;
/// singular candidates are skipped.
pub fn factnorm2_upper(v: &Matrix, e: &Exponent, opts: &FactnormOptions) -> Result<(NormEstimate, SquareFactorization)> {
    check_square(v)?;
    opts.check()?;
    let n = v.rows();
    let id = Matrix::identity(n);
    let mut best = evaluate_square(v, &id, &id, e).expect("identity is invertible");
    let svd = v.svd();
    let top = svd.s[0];
    if top > 0.0 {
        let h: Vec<C64> = svd.s.iter().map(|&s| C64::new(s.max(1e-6 * top).sqrt(), 0.0)).collect();
        let d = Matrix::from_diag(&h);
        let a0 = svd.u.matmul(&d);
        if let Some(c) = evaluate_square(v, &a0, &d.matmul(&svd.vh), e) {
            if c.value < best.value {
                best = c;
            }
        }
        if let Some(f) = descend_atoms(v, &a0, &d.matmul(&svd.vh), e, opts.iterations) {
            if let Some(c) = evaluate_square(v, &f.alpha, &f.beta, e) {
                if c.value < best.value {
                    best = c;
                }
            }
        }
    }
    if !v.is_zero() && opts.iterations > 0 {
        let seeds = best.clone();
        let found: Vec<Option<SquareFactorization>> = (0..opts.restarts)
            .into_par_iter()
            .map(|k| {
                let mut rng = random::rng(derive_seed(opts.seed, 0x2000 + k as u64));
                let mut cur = if k == 0 {
                    seeds.clone()
                } else {
                    let a = random::gaussian_matrix(&mut rng, n, n);
                    let b = random::gaussian_matrix(&mut rng, n, n);
                    evaluate_square(v, &a, &b, e)?
                };
                let mut step: f64 = 0.3;
                for it in 0..opts.iterations {
                    let (a, b) = match it % 3 {
                        0 => (random::perturb(&mut rng, &cur.a, step), cur.b.clone()),
                        1 => (cur.a.clone(), random::perturb(&mut rng, &cur.b, step)),
                        _ => (random::perturb(&mut rng, &cur.a, step), random::perturb(&mut rng, &cur.b, step)),
                    };
                    match evaluate_square(v, &a, &b, e) {
                        Some(c) if c.value < cur.value => {
                            cur = c;
                            step = (step * 1.5).min(1.0);
                        }
                        _ => {
                            step *= 0.7;
                            if step < 1e-7 {
                                step = 0.3;
                            }
                        }
                    }
                }
                Some(cur)
            })
            .collect();
        for c in found.into_iter().flatten() {
            if c.value < best.value {
                best = c;
            }
        }
    }
    Ok((
        NormEstimate {
            lower: 0.0,
            upper: Some(best.value),
            witness: Witness::None,
            method: Method::FactorizationSearch,
            restarts: opts.restarts,
            tolerance: RCOND,
        },
        best,
    ))
}

/// Block-diagonal factorization of `v₁ ⊕ v₂` with value `≤ V₁ + V₂`.
pub fn direct_sum_combine(f1: &Factorization, f2: &Factorization, e: &Exponent) -> Result<Factorization> {
    let (g1, g2) = (f1.normalized(e), f2.normalized(e));
    Factorization::new(
        Matrix::direct_sum(&g1.alpha, &g2.alpha),
        Matrix::direct_sum(&g1.w, &g2.w),
        Matrix::direct_sum(&g1.beta, &g2.beta),
        e,
    )
}

/// Factorization of `v₁ + v₂` as `[α₁ α₂]·(w₁ ⊕ w₂)·[β₁; β₂]`, value `≤ V₁ + V₂`.
pub fn sum_combine(f1: &Factorization, f2: &Factorization, e: &Exponent) -> Result<Factorization> {
    if f1.alpha.rows() != f2.alpha.rows() {
        return Err(Error::input("factorization", "summands have different sizes"));
    }
    let (g1, g2) = (f1.normalized(e), f2.normalized(e));
    Factorization::new(
        Matrix::hstack(&g1.alpha, &g2.alpha),
        Matrix::direct_sum(&g1.w, &g2.w),
        Matrix::vstack(&g1.beta, &g2.beta),
        e,
    )
}

/// `opnorm_lower(v) ≤ n^{2δ}·factnorm1_upper(v)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormInequalityReport {
    pub n: usize,
    pub p: Exponent,
    pub opnorm_lower: f64,
    pub factnorm_upper: f64,
    pub factor: f64,
    pub holds: bool,
}

impl NormInequalityReport {
    /// `lhs / rhs`; at most 1 when the inequality holds.
    pub fn ratio(&self) -> f64 {
        let rhs = self.factor * self.factnorm_upper;
        if rhs > 0.0 {
            self.opnorm_lower / rhs
        } else if self.opnorm_lower > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

pub fn check_norm_lower_inequality(v: &Matrix, e: &Exponent, opts: &FactnormOptions) -> Result<NormInequalityReport> {
    check_square(v)?;
    let n = v.rows();
    let lhs = opnorm_lower(v, e, opts.restarts, 1e-12, opts.seed)?.lower;
    let up = factnorm1_upper(v, e, opts)?.factorization.value;
    let factor = (n as f64).powf(2.0 * e.delta());
    Ok(NormInequalityReport {
        n,
        p: *e,
        opnorm_lower: lhs,
        factnorm_upper: up,
        factor,
        holds: lhs <= factor * up * (1.0 + 1e-12),
    })
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

    fn quick() -> FactnormOptions {
        FactnormOptions { restarts: 2, iterations: 60, ..Default::default() }
    }

    #[test]
    fn nuclear_oracle_examples() {
        assert!((nuclear_oracle_p2(&Matrix::identity(3)) - 3.0).abs() < 1e-12);
        let d = Matrix::from_diag(&[re(1.0), re(2.0), re(3.0)]);
        assert!((nuclear_oracle_p2(&d) - 6.0).abs() < 1e-12);
        let x = [re(1.0), re(2.0)];
        let y = [re(3.0), re(-1.0)];
        let want = lp(&x, 2.0) * lp(&y, 2.0);
        assert!((nuclear_oracle_p2(&Matrix::outer(&x, &y)) - want).abs() < 1e-12);
    }

    #[test]
    fn identity_closes() {
        for p in [1.5, 3.0, 4.0] {
            let e = ex(p);
            for n in 1..=4 {
                let s = factnorm1(&Matrix::identity(n), &e, &quick()).unwrap();
                let (lo, up) = (s.estimate.lower, s.estimate.upper.unwrap());
                assert!((lo - n as f64).abs() < 1e-6 && (up - n as f64).abs() < 1e-6, "{p} {n}: {lo} {up}");
            }
        }
    }

    #[test]
    fn rank_one_closes() {
        let mut rng = random::rng(5);
        for p in [1.5, 3.0, 4.0] {
            let e = ex(p);
            for n in 1..=4 {
                let x = random::gaussian_vector(&mut rng, n);
                let y = random::gaussian_vector(&mut rng, n);
                let want = lp(&x, e.conj()) * lp(&y, p);
                let s = factnorm1(&Matrix::outer(&x, &y), &e, &quick()).unwrap();
                let (lo, up) = (s.estimate.lower, s.estimate.upper.unwrap());
                assert!(lo <= up);
                assert!((up - lo) <= 1e-6 * want && (up - want).abs() <= 1e-6 * want, "{lo} {up} {want}");
            }
        }
    }

    #[test]
    fn rank_one_witness_bound_matches_oracle() {
        let e = ex(3.0);
        let x = [re(1.0), re(-2.0)];
        let y = [re(0.5), re(1.5)];
        let w = rank_one_witness(&Matrix::outer(&x, &y), &e, 2, 1).unwrap();
        let oracle = opnorm_oracle_small(&w.f, &e, 64).unwrap();
        assert!((oracle - w.f_op_upper).abs() < 1e-4, "{oracle} vs {}", w.f_op_upper);
        assert!((w.f_op_upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn p2_brackets_trace_norm() {
        let e = ex(2.0);
        let mut rng = random::rng(8);
        for n in [3, 4] {
            for _ in 0..10 {
                let v = random::gaussian_matrix(&mut rng, n, n);
                let t = nuclear_oracle_p2(&v);
                let s = factnorm1(&v, &e, &quick()).unwrap();
                assert!(s.estimate.lower <= t * (1.0 + 1e-9) && s.estimate.upper.unwrap() >= t * (1.0 - 1e-9));
                assert!(s.estimate.lower >= 0.98 * t && s.estimate.upper.unwrap() <= 1.02 * t);
            }
        }
    }

    #[test]
    fn zero_matrix() {
        let s = factnorm1(&Matrix::zeros(3, 3), &ex(3.0), &quick()).unwrap();
        assert_eq!(s.estimate.lower, 0.0);
        assert_eq!(s.estimate.upper, Some(0.0));
    }

    #[test]
    fn rmax_below_n_is_rejected() {
        let opts = FactnormOptions { r_max: Some(1), ..quick() };
        assert!(matches!(factnorm1_upper(&Matrix::identity(2), &ex(3.0), &opts), Err(Error::Parameter(_))));
    }

    #[test]
    fn factnorm2_examples() {
        let e = ex(3.0);
        let (est, _) = factnorm2_upper(&Matrix::identity(3), &e, &quick()).unwrap();
        assert!(est.upper.unwrap() <= 3.0 + 1e-12);
        let d = Matrix::from_diag(&[re(1.0), re(-4.0), re(2.0)]);
        let (est, best) = factnorm2_upper(&d, &e, &quick()).unwrap();
        assert!(est.upper.unwrap() <= 12.0 + 1e-9);
        assert!(best.as_factorization(&d, &e).unwrap().reproduces(&d));
    }

    #[test]
    fn direct_sum_examples() {
        let e = ex(3.0);
        let one = Factorization::trivial(&Matrix::identity(1), &e).unwrap();
        let c = direct_sum_combine(&one, &one, &e).unwrap();
        assert!(c.value <= 2.0 + 1e-12);
        assert!(c.reproduces(&Matrix::identity(2)));

        let v1 = Matrix::from_real_rows(&[[1.0, 2.0], [0.0, 1.0]]);
        let f1 = factnorm1_upper(&v1, &e, &quick()).unwrap().factorization;
        let f0 = Factorization::trivial(&Matrix::zeros(2, 2), &e).unwrap();
        let c = direct_sum_combine(&f1, &f0, &e).unwrap();
        assert!((c.value - f1.value).abs() <= 1e-12 * f1.value);
        assert!(c.reproduces(&Matrix::direct_sum(&v1, &Matrix::zeros(2, 2))));
    }

    #[test]
    fn norm_lower_inequality_examples() {
        let r = check_norm_lower_inequality(&Matrix::identity(3), &ex(4.0), &quick()).unwrap();
        assert!(r.holds);
        let mut rng = random::rng(2);
        for _ in 0..20 {
            let v = random::gaussian_matrix(&mut rng, 3, 3);
            assert!(check_norm_lower_inequality(&v, &ex(4.0), &quick()).unwrap().holds);
            let r = check_norm_lower_inequality(&v, &ex(2.0), &quick()).unwrap();
            assert_eq!(r.factor, 1.0);
            assert!(r.holds);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn sandwich_and_ordering(seed in any::<u64>(), n in 1usize..4, p in prop::sample::select(vec![1.5, 3.0, 4.0])) {
            let e = ex(p);
            let v = random::gaussian_matrix(&mut random::rng(seed), n, n);
            let opts = FactnormOptions { restarts: 1, iterations: 30, seed, ..Default::default() };
            let s = factnorm1(&v, &e, &opts).unwrap();
            prop_assert!(s.estimate.is_consistent());
            prop_assert!(s.factorization.reproduces(&v));
            let (f2, _) = factnorm2_upper(&v, &e, &opts).unwrap();
            prop_assert!(s.estimate.lower <= f2.upper.unwrap() * (1.0 + 1e-9));
        }

        #[test]
        fn triangle_and_homogeneity(seed in any::<u64>(), n in 1usize..4, p in prop::sample::select(vec![1.5, 3.0])) {
            let e = ex(p);
            let mut rng = random::rng(seed);
            let v1 = random::gaussian_matrix(&mut rng, n, n);
            let v2 = random::gaussian_matrix(&mut rng, n, n);
            let opts = FactnormOptions { restarts: 1, iterations: 30, seed, ..Default::default() };
            let f1 = factnorm1_upper(&v1, &e, &opts).unwrap().factorization;
            let f2 = factnorm1_upper(&v2, &e, &opts).unwrap().factorization;
            let hint = sum_combine(&f1, &f2, &e).unwrap();
            prop_assert!(hint.reproduces(&v1.add(&v2)));
            let up = factnorm1_upper_with_hints(&v1.add(&v2), &e, &opts, &[hint]).unwrap();
            prop_assert!(up.factorization.value <= f1.value + f2.value + 1e-9);

            let ds = direct_sum_combine(&f1, &f2, &e).unwrap();
            prop_assert!(ds.value <= f1.value + f2.value + 1e-9);
            prop_assert!(ds.reproduces(&Matrix::direct_sum(&v1, &v2)));

            let c = C64::new(-1.7, 0.4);
            let sc = f1.scaled(c, &e).unwrap();
            prop_assert!(sc.reproduces(&v1.scale(c)));
            prop_assert!((sc.value - c.norm() * f1.value).abs() <= 1e-12 * sc.value);
        }
    }
}
