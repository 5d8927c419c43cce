//! Seeded random ensembles.
//!
//! Every stochastic routine in the crate takes an explicit `u64` seed and
//! builds a [`ChaCha8Rng`] from it, so results are reproducible across
//! platforms. Sub-streams are derived with [`derive_seed`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::matrix::{Matrix, C64};

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a parent seed with a stream label (splitmix64 finaliser).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random matrix families used by the verification campaigns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ensemble {
    /// Standard complex Gaussian entries.
    Gaussian,
    /// Real Gaussian entries.
    RealGaussian,
    /// Gaussian divided by a uniform(0,1] variable: heavy tails.
    HeavyTailed,
    /// Gaussian entries with roughly 70% zeroed, at least one nonzero kept.
    Sparse,
}

impl Ensemble {
    pub const ALL: [Ensemble; 4] =
        [Ensemble::Gaussian, Ensemble::RealGaussian, Ensemble::HeavyTailed, Ensemble::Sparse];

    /// Round-robin choice by case index.
    pub fn cycle(i: usize) -> Ensemble {
        Self::ALL[i % Self::ALL.len()]
    }

    pub fn sample_scalar<R: Rng>(self, rng: &mut R) -> C64 {
        match self {
            Ensemble::Gaussian => complex_normal(rng),
            Ensemble::RealGaussian => C64::new(rng.sample(StandardNormal), 0.0),
            Ensemble::HeavyTailed => {
                let u: f64 = 1.0 - rng.random::<f64>();
                complex_normal(rng) / u
            }
            Ensemble::Sparse => {
                if rng.random::<f64>() < 0.7 {
                    C64::new(0.0, 0.0)
                } else {
                    complex_normal(rng)
                }
            }
        }
    }

    pub fn vector<R: Rng>(self, rng: &mut R, n: usize) -> Vec<C64> {
        let mut v: Vec<C64> = (0..n).map(|_| self.sample_scalar(rng)).collect();
        if v.iter().all(|z| z.norm() == 0.0) {
            let k = rng.random_range(0..n);
            v[k] = complex_normal(rng);
        }
        v
    }

    pub fn matrix<R: Rng>(self, rng: &mut R, rows: usize, cols: usize) -> Matrix {
        Matrix::from_vec(rows, cols, self.vector(rng, rows * cols))
    }
}

/// Standard complex normal: real and imaginary parts i.i.d. N(0, 1/2).
pub fn complex_normal<R: Rng>(rng: &mut R) -> C64 {
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    C64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n).map(|_| complex_normal(rng)).collect()
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, gaussian_vector(rng, rows * cols))
}

pub fn real_gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| C64::new(rng.sample(StandardNormal), 0.0)).collect(),
    )
}

/// Random step of relative size `step`: either a dense Gaussian
/// perturbation or a single-entry one, with equal probability.
pub fn perturb<R: Rng>(rng: &mut R, m: &Matrix, step: f64) -> Matrix {
    let scale = m.max_abs().max(1e-300) * step;
    let mut out = m.clone();
    if rng.random::<bool>() {
        out = out.add(&gaussian_matrix(rng, m.rows(), m.cols()).scale_real(scale));
    } else {
        let (i, j) = (rng.random_range(0..m.rows()), rng.random_range(0..m.cols()));
        out[(i, j)] += complex_normal(rng) * scale;
    }
    out
}
