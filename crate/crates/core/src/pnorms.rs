//! Vector, entrywise and operator `p`-norms.
//!
//! The operator norm `‖A‖_{p→p}` is NP-hard to compute for general `p`, so
//! it is never reported as a single number. [`opnorm_lower`] returns a
//! certified lower bound together with the unit vector that attains it,
//! and [`opnorm_upper`] returns a provable upper bound obtained from
//! Riesz–Thorin interpolation. The true value always lies in between.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, C64};
use crate::random::{self, Ensemble};

/// Relative inflation applied to numerically computed spectral norms
/// before they are used inside a certified upper bound.
const SPECTRAL_SLACK: f64 = 1e-12;

/// Power steps used to pick the Schur-test weights.
const SCHUR_STEPS: usize = 8;

/// Default iteration cap for the duality-map power method.
pub const POWER_MAX_ITER: usize = 500;

/// A Hölder pair `(p, p′)` with `1 < p < ∞` and `1/p + 1/p′ = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponent {
    p: f64,
    p_conj: f64,
    delta: f64,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if !p.is_finite() || p <= 1.0 {
            return Err(Error::input("p", format!("exponent must lie in (1, inf), got {p}")));
        }
        let inv = 1.0 / p;
        let inv_conj = 1.0 - inv;
        let p_conj = p / (p - 1.0);
        if !p_conj.is_finite() {
            return Err(Error::input("p", format!("exponent {p} is too close to 1")));
        }
        let e = Self { p, p_conj, delta: (inv - inv_conj).abs() };
        debug_assert!((1.0 / e.p + 1.0 / e.p_conj - 1.0).abs() <= 1e-12);
        Ok(e)
    }

    /// Accepts decimals (`"1.5"`) and fractions (`"3/2"`).
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let value = match s.split_once('/') {
            Some((a, b)) => {
                let a: f64 = a.trim().parse().map_err(|_| Error::input("p", format!("bad numerator in {s:?}")))?;
                let b: f64 = b.trim().parse().map_err(|_| Error::input("p", format!("bad denominator in {s:?}")))?;
                if b == 0.0 {
                    return Err(Error::input("p", "zero denominator"));
                }
                a / b
            }
            None => s.parse().map_err(|_| Error::input("p", format!("not a number: {s:?}")))?,
        };
        Self::new(value)
    }

    #[inline]
    pub fn p(&self) -> f64 {
        self.p
    }

    /// The conjugate exponent `p′`.
    #[inline]
    pub fn conj(&self) -> f64 {
        self.p_conj
    }

    /// `|1/p − 1/p′|`.
    #[inline]
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The pair with roles exchanged, `(p′, p)`.
    pub fn dual(&self) -> Exponent {
        Exponent::new(self.p_conj).expect("conjugate of a valid exponent is valid")
    }

    pub fn is_euclidean(&self) -> bool {
        self.p == 2.0
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.p)
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Exponent::parse(s)
    }
}

impl Serialize for Exponent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.p.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let p = f64::deserialize(d)?;
        Exponent::new(p).map_err(serde::de::Error::custom)
    }
}

// ---- vector and entrywise norms ------------------------------------------

/// `(Σ|x_i|^q)^{1/q}` without input validation; `q = ∞` gives the max.
pub fn lp(x: &[C64], q: f64) -> f64 {
    let m = x.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if m == 0.0 || q == f64::INFINITY {
        return m;
    }
    if q == 1.0 {
        return x.iter().map(|z| z.norm()).sum();
    }
    if q == 2.0 {
        return x.iter().map(|z| (z.norm() / m).powi(2)).sum::<f64>().sqrt() * m;
    }
    x.iter().map(|z| (z.norm() / m).powf(q)).sum::<f64>().powf(1.0 / q) * m
}

fn check_q(q: f64) -> Result<()> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::input("q", format!("exponent must lie in [1, inf], got {q}")));
    }
    Ok(())
}

/// Vector `q`-norm for `q ∈ [1, ∞]`.
pub fn vec_p_norm(x: &[C64], q: f64) -> Result<f64> {
    check_q(q)?;
    if x.is_empty() {
        return Err(Error::input("x", "vector must be nonempty"));
    }
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::input("x", "vector has non-finite entries"));
    }
    Ok(lp(x, q))
}

/// The `q`-norm of all entries of `a` taken as one flat vector.
pub fn entrywise_norm(a: &Matrix, q: f64) -> Result<f64> {
    check_q(q)?;
    Ok(lp(a.data(), q))
}

/// Complex sign `z/|z|`, zero at zero.
#[inline]
pub fn csign(z: C64) -> C64 {
    let r = z.norm();
    if r == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        z / r
    }
}

/// Duality map `J_q(x)_i = |x_i|^{q−1}·sign(x_i)`.
pub fn duality_map(x: &[C64], q: f64) -> Vec<C64> {
    x.iter().map(|&z| csign(z) * z.norm().powf(q - 1.0)).collect()
}

/// Unit vector `a` in `ℓ_q` with `Σ a_i x_i = ‖x‖_{q′}` (bilinear pairing).
///
/// For `x = 0` the first canonical vector is returned.
pub fn holder_dual(x: &[C64], q: f64) -> Vec<C64> {
    let qc = q / (q - 1.0);
    let nx = lp(x, qc);
    if nx == 0.0 {
        let mut e = vec![C64::new(0.0, 0.0); x.len()];
        e[0] = C64::new(1.0, 0.0);
        return e;
    }
    // a_i = conj(sign x_i) |x_i|^{q′−1} / ‖x‖_{q′}^{q′−1}
    x.iter()
        .map(|&z| csign(z).conj() * (z.norm() / nx).powf(qc - 1.0))
        .collect()
}

fn normalize(x: &mut [C64], q: f64) -> f64 {
    let n = lp(x, q);
    if n > 0.0 {
        for z in x.iter_mut() {
            *z /= n;
        }
    }
    n
}

// ---- certified estimates ---------------------------------------------------

/// How a bound was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PowerIteration,
    Interpolation,
    ClosedForm,
    FactorizationSearch,
    DualPairing,
}

/// Whatever evaluates to the reported lower bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    None,
    Vector {
        #[serde(with = "crate::io::complex_vec")]
        x: Vec<C64>,
    },
    Matrix {
        m: Matrix,
    },
}

/// Two-sided answer to a norm query. `upper` is `None` when only a lower
/// bound was requested.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub lower: f64,
    pub upper: Option<f64>,
    pub witness: Witness,
    pub method: Method,
    pub restarts: usize,
    pub tolerance: f64,
}

impl NormEstimate {
    /// `upper − lower`, or `None` without an upper bound.
    pub fn gap(&self) -> Option<f64> {
        self.upper.map(|u| u - self.lower)
    }

    /// `lower ≤ upper·(1 + 1e−9)`.
    pub fn is_consistent(&self) -> bool {
        self.upper.is_none_or(|u| self.lower <= u * (1.0 + 1e-9))
    }
}

/// One run of the duality-map power iteration.
#[derive(Clone, Debug)]
pub struct PowerRun {
    /// Best ratio `‖Ax‖_p / ‖x‖_p` reached.
    pub value: f64,
    pub witness: Vec<C64>,
    /// Objective after every computed step, including a final rejected one.
    pub trace: Vec<f64>,
    pub iterations: usize,
}

/// Runs `x ← J_{p′}(A^H J_p(Ax))`, normalized, from `start` until the
/// relative gain drops below `tol` or `max_iter` steps have been taken.
pub fn power_iterate(a: &Matrix, e: &Exponent, start: &[C64], tol: f64, max_iter: usize) -> PowerRun {
    let (p, pc) = (e.p(), e.conj());
    let mut x = start.to_vec();
    normalize(&mut x, p);
    let mut f = lp(&a.matvec(&x), p);
    let mut trace = vec![f];
    let mut iterations = 0;
    while iterations < max_iter && f > 0.0 {
        let y = a.matvec(&x);
        let z = a.adjoint_matvec(&duality_map(&y, p));
        let mut xn = duality_map(&z, pc);
        if normalize(&mut xn, p) == 0.0 {
            break;
        }
        let fnew = lp(&a.matvec(&xn), p);
        iterations += 1;
        trace.push(fnew);
        if !(fnew > f) {
            break;
        }
        let gain = (fnew - f) / fnew;
        x = xn;
        f = fnew;
        if gain < tol {
            break;
        }
    }
    // Certified value: recompute as a ratio at the returned witness.
    let value = ratio(a, &x, p);
    PowerRun { value, witness: x, trace, iterations }
}

/// `‖Ax‖_p / ‖x‖_p` (zero for `x = 0`).
pub fn ratio(a: &Matrix, x: &[C64], p: f64) -> f64 {
    let nx = lp(x, p);
    if nx == 0.0 {
        0.0
    } else {
        lp(&a.matvec(x), p) / nx
    }
}

/// Starting vectors: canonical basis, the constant vector, then `restarts`
/// seeded complex Gaussian vectors.
fn power_starts(cols: usize, p: f64, restarts: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut starts = Vec::with_capacity(cols + 1 + restarts);
    for j in 0..cols {
        let mut e = vec![C64::new(0.0, 0.0); cols];
        e[j] = C64::new(1.0, 0.0);
        starts.push(e);
    }
    starts.push(vec![C64::new((cols as f64).powf(-1.0 / p), 0.0); cols]);
    let mut rng = random::rng(seed);
    for _ in 0..restarts {
        starts.push(random::gaussian_vector(&mut rng, cols));
    }
    starts
}

/// Certified lower bound on `‖A‖_{p→p}` by multi-start power iteration.
///
/// The first start attaining the maximum is kept as witness.
pub fn opnorm_lower(a: &Matrix, e: &Exponent, restarts: usize, tol: f64, seed: u64) -> Result<NormEstimate> {
    opnorm_lower_with(a, e, restarts, tol, seed, POWER_MAX_ITER)
}

/// [`opnorm_lower`] with an explicit iteration cap per start.
pub fn opnorm_lower_with(
    a: &Matrix,
    e: &Exponent,
    restarts: usize,
    tol: f64,
    seed: u64,
    max_iter: usize,
) -> Result<NormEstimate> {
    if restarts == 0 {
        return Err(Error::Parameter("restarts must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    let mut best_value = -1.0;
    let mut best_x = Vec::new();
    for start in power_starts(a.cols(), e.p(), restarts, seed) {
        let run = power_iterate(a, e, &start, tol, max_iter);
        if run.value > best_value {
            best_value = run.value;
            best_x = run.witness;
        }
    }
    Ok(NormEstimate {
        lower: best_value.max(0.0),
        upper: None,
        witness: Witness::Vector { x: best_x },
        method: Method::PowerIteration,
        restarts,
        tolerance: tol,
    })
}

/// Lower and upper bounds together.
pub fn opnorm_estimate(a: &Matrix, e: &Exponent, restarts: usize, tol: f64, seed: u64) -> Result<NormEstimate> {
    let mut est = opnorm_lower(a, e, restarts, tol, seed)?;
    est.upper = Some(opnorm_upper(a, e));
    Ok(est)
}

/// Maximum absolute column sum, `‖A‖_{1→1}`.
pub fn norm_one(a: &Matrix) -> f64 {
    (0..a.cols())
        .map(|j| (0..a.rows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute row sum, `‖A‖_{∞→∞}`.
pub fn norm_inf(a: &Matrix) -> f64 {
    (0..a.rows())
        .map(|i| a.row(i).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Riesz–Thorin bound `‖A‖_1^{1/p}·‖A‖_∞^{1/p′}` alone.
pub fn interpolation_bound(a: &Matrix, e: &Exponent) -> f64 {
    norm_one(a).powf(1.0 / e.p()) * norm_inf(a).powf(1.0 / e.conj())
}

/// Certified upper bound on `‖A‖_{p→p}`.
///
/// The matrix is split into the connected components of its nonzero
/// pattern (a permuted block-diagonal form); the norm is the maximum over
/// blocks. Single-column and single-row blocks use their exact norms. Other
/// blocks take the smallest of the Riesz–Thorin bounds between the
/// endpoints `{1, 2, ∞}` (spectral norm slightly inflated) and a weighted
/// Schur test on the entrywise modulus.
pub fn opnorm_upper(a: &Matrix, e: &Exponent) -> f64 {
    components(a)
        .into_iter()
        .map(|(rows, cols)| block_upper(&a.select(&rows, &cols), e))
        .fold(0.0, f64::max)
}

fn block_upper(b: &Matrix, e: &Exponent) -> f64 {
    let (p, pc) = (e.p(), e.conj());
    if b.cols() == 1 {
        return lp(b.data(), p);
    }
    if b.rows() == 1 {
        return lp(b.data(), pc);
    }
    let one = norm_one(b);
    let inf = norm_inf(b);
    let mut best = one.powf(1.0 / p) * inf.powf(1.0 / pc);
    let s2 = b.singular_values()[0] * (1.0 + SPECTRAL_SLACK);
    let via_two = if p < 2.0 {
        let theta = 2.0 / pc;
        one.powf(1.0 - theta) * s2.powf(theta)
    } else if p > 2.0 {
        let theta = 2.0 / p;
        s2.powf(theta) * inf.powf(1.0 - theta)
    } else {
        s2
    };
    if via_two < best {
        best = via_two;
    }
    best.min(schur_bound(b, e))
}

/// Weighted Schur test on `|A|`: for any positive `x`,
/// `‖A‖_{p→p}^p ≤ max_j (|A|ᵀ(|A|x)^{p−1})_j / x_j^{p−1}`. The weights come
/// from a few power steps on `|A|`, where the bound is tight.
fn schur_bound(b: &Matrix, e: &Exponent) -> f64 {
    let (p, pc) = (e.p(), e.conj());
    let m = b.map(|z| C64::new(z.norm(), 0.0));
    let mut x = vec![C64::new(1.0, 0.0); m.cols()];
    for _ in 0..SCHUR_STEPS {
        let z = m.adjoint_matvec(&duality_map(&m.matvec(&x), p));
        let xn = duality_map(&z, pc);
        if xn.iter().any(|c| !(c.re > 0.0) || !c.re.is_finite()) {
            break;
        }
        x = xn;
        normalize(&mut x, p);
    }
    let y = m.matvec(&x);
    let z = m.adjoint_matvec(&duality_map(&y, p));
    let worst = z
        .iter()
        .zip(&x)
        .map(|(zj, xj)| zj.re / xj.re.powf(p - 1.0))
        .fold(0.0, f64::max);
    worst.powf(1.0 / p) * (1.0 + SPECTRAL_SLACK)
}

/// Connected components of the bipartite row/column graph of nonzero
/// entries, each as (sorted rows, sorted cols). Ordered by smallest row.
pub fn components(a: &Matrix) -> Vec<(Vec<usize>, Vec<usize>)> {
    let (r, c) = a.shape();
    let mut parent: Vec<usize> = (0..r + c).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut active = vec![false; r + c];
    for i in 0..r {
        for j in 0..c {
            if a[(i, j)] != C64::new(0.0, 0.0) {
                active[i] = true;
                active[r + j] = true;
                let (x, y) = (find(&mut parent, i), find(&mut parent, r + j));
                if x != y {
                    parent[x.max(y)] = x.min(y);
                }
            }
        }
    }
    let mut out: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();
    for v in 0..r + c {
        if !active[v] {
            continue;
        }
        let root = find(&mut parent, v);
        let slot = match out.iter().position(|(k, _, _)| *k == root) {
            Some(s) => s,
            None => {
                out.push((root, Vec::new(), Vec::new()));
                out.len() - 1
            }
        };
        if v < r {
            out[slot].1.push(v);
        } else {
            out[slot].2.push(v - r);
        }
    }
    out.into_iter().map(|(_, rows, cols)| (rows, cols)).collect()
}

// ---- brute-force oracle ------------------------------------------------------

/// Point on the unit `p`-sphere of `ℂ^c` from `c−1` modulus angles in
/// `[0, π/2]` and `c−1` phases (the first coordinate is real nonnegative).
fn sphere_point(params: &[f64], c: usize, p: f64) -> Vec<C64> {
    let (angles, phases) = params.split_at(c - 1);
    let mut s = vec![0.0; c];
    let mut prod = 1.0;
    for k in 0..c - 1 {
        s[k] = prod * angles[k].cos();
        prod *= angles[k].sin();
    }
    s[c - 1] = prod;
    (0..c)
        .map(|k| {
            let modulus = (s[k] * s[k]).powf(1.0 / p);
            if k == 0 {
                C64::new(modulus, 0.0)
            } else {
                C64::from_polar(modulus, phases[k - 1])
            }
        })
        .collect()
}

/// Dense grid search for `max ‖Ax‖_p` over the unit sphere, refined by
/// shrinking local grids around the best cells. Test oracle only; supports
/// at most three columns.
pub fn opnorm_oracle_small(a: &Matrix, e: &Exponent, grid_density: usize) -> Result<f64> {
    let c = a.cols();
    if c > 3 {
        return Err(Error::UnsupportedSize(format!("oracle handles at most 3 columns, got {c}")));
    }
    if grid_density < 2 {
        return Err(Error::Parameter("grid density must be at least 2".into()));
    }
    let p = e.p();
    if c == 1 {
        return Ok(lp(a.data(), p));
    }
    let dim = 2 * (c - 1);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let two_pi = 2.0 * std::f64::consts::PI;
    let upper: Vec<f64> = (0..dim).map(|k| if k < c - 1 { half_pi } else { two_pi }).collect();
    let eval = |params: &[f64]| ratio(a, &sphere_point(params, c, p), p);

    // Coarse grid: modulus angles include both endpoints, phases are periodic.
    let mut scored: Vec<(f64, Vec<f64>)> = Vec::new();
    let total = grid_density.pow(dim as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut params = vec![0.0; dim];
        for k in 0..dim {
            let g = rem % grid_density;
            rem /= grid_density;
            params[k] = if k < c - 1 {
                upper[k] * g as f64 / (grid_density - 1) as f64
            } else {
                upper[k] * g as f64 / grid_density as f64
            };
        }
        scored.push((eval(&params), params));
    }
    scored.sort_by(|x, y| y.0.total_cmp(&x.0));
    scored.truncate(8);

    let mut best = scored[0].0;
    for (mut val, mut centre) in scored {
        let mut h: Vec<f64> = upper.iter().map(|u| u / grid_density as f64).collect();
        for _ in 0..80 {
            let mut improved = centre.clone();
            let offsets = 3usize.pow(dim as u32);
            for o in 0..offsets {
                let mut rem = o;
                let mut cand = centre.clone();
                for k in 0..dim {
                    let step = (rem % 3) as f64 - 1.0;
                    rem /= 3;
                    cand[k] = if k < c - 1 {
                        (cand[k] + step * h[k]).clamp(0.0, half_pi)
                    } else {
                        cand[k] + step * h[k]
                    };
                }
                let v = eval(&cand);
                if v > val {
                    val = v;
                    improved = cand;
                }
            }
            if improved == centre {
                for hk in h.iter_mut() {
                    *hk *= 0.5;
                }
            }
            centre = improved;
        }
        best = best.max(val);
    }
    Ok(best)
}

// ---- comparison checks --------------------------------------------------------

/// Outcome of [`check_p_comparison`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PComparisonReport {
    pub n: usize,
    pub p: Exponent,
    pub trials: usize,
    /// Largest observed `‖λ‖_p / (n^δ ‖λ‖_{p′})`.
    pub max_ratio: f64,
    /// Trial indices where the ratio exceeded `1 + 1e−12`.
    pub violations: Vec<usize>,
    #[serde(with = "crate::io::complex_vec")]
    pub worst: Vec<C64>,
}

impl PComparisonReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples vectors and checks `‖λ‖_p ≤ n^{|1/p−1/p′|}·‖λ‖_{p′}` on each.
pub fn check_p_comparison(n: usize, e: &Exponent, trials: usize, seed: u64) -> Result<PComparisonReport> {
    if trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    let scale = (n as f64).powf(e.delta());
    let mut rng = random::rng(seed);
    let mut report = PComparisonReport {
        n,
        p: *e,
        trials,
        max_ratio: 0.0,
        violations: Vec::new(),
        worst: Vec::new(),
    };
    for t in 0..trials {
        let lambda = Ensemble::cycle(t).vector(&mut rng, n);
        let ratio = lp(&lambda, e.p()) / (scale * lp(&lambda, e.conj()));
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.worst = lambda;
        }
        if ratio > 1.0 + 1e-12 {
            report.violations.push(t);
        }
    }
    Ok(report)
}

/// Outcome of [`check_opnorm_bounds`] for one matrix.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OpnormBoundsReport {
    /// `n`: rows of `α`, columns of `β = αᵀ`.
    pub n: usize,
    pub alpha_lower: f64,
    /// `‖α‖_{p′}·n^δ`.
    pub alpha_bound: f64,
    pub beta_lower: f64,
    /// `‖β‖_p·n^δ`.
    pub beta_bound: f64,
}

impl OpnormBoundsReport {
    pub fn passed(&self) -> bool {
        self.alpha_lower <= self.alpha_bound * (1.0 + 1e-12) && self.beta_lower <= self.beta_bound * (1.0 + 1e-12)
    }

    /// Largest of the two ratios lower/bound.
    pub fn worst_ratio(&self) -> f64 {
        let r = |l: f64, b: f64| if b > 0.0 { l / b } else if l > 0.0 { f64::INFINITY } else { 0.0 };
        r(self.alpha_lower, self.alpha_bound).max(r(self.beta_lower, self.beta_bound))
    }
}

/// Checks `‖α‖_{B(ℓ_p^r,ℓ_p^n)} ≤ ‖α‖_{p′}·n^δ` for `α = a` (`n×r`) and
/// `‖β‖_{B(ℓ_p^n,ℓ_p^r)} ≤ ‖β‖_p·n^δ` for `β = aᵀ`, using certified lower
/// bounds on the left.
pub fn check_opnorm_bounds(a: &Matrix, e: &Exponent, restarts: usize, seed: u64) -> Result<OpnormBoundsReport> {
    let n = a.rows();
    let scale = (n as f64).powf(e.delta());
    let beta = a.transpose();
    let alpha_lower = opnorm_lower(a, e, restarts, 1e-12, seed)?.lower;
    let beta_lower = opnorm_lower(&beta, e, restarts, 1e-12, random::derive_seed(seed, 1))?.lower;
    Ok(OpnormBoundsReport {
        n,
        alpha_lower,
        alpha_bound: lp(a.data(), e.conj()) * scale,
        beta_lower,
        beta_bound: lp(beta.data(), e.p()) * scale,
    })
}
