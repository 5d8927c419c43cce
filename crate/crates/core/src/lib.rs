//! Norms of matrices acting on `ℓ_p` spaces: certified operator-norm
//! bounds, `ℓ_p`-polar decompositions, factorization norms, column
//! operator-space norms, and seeded verification campaigns.
//!
//! Estimates come as a certified lower bound with a witness and a proven
//! upper bound. See the guide in `book/` for worked examples.

pub mod colspace;
pub mod error;
pub mod factnorm;
pub mod io;
pub mod isometry;
pub mod matrix;
pub mod pnorms;
pub mod random;
pub mod verify;

pub use error::{Error, Result};
pub use matrix::{Matrix, C64};
pub use pnorms::{Exponent, NormEstimate};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    pub struct Intro;
    #[doc = include_str!("../../../book/src/norms.md")]
    pub struct Norms;
    #[doc = include_str!("../../../book/src/polar.md")]
    pub struct Polar;
    #[doc = include_str!("../../../book/src/factorization.md")]
    pub struct Factorization;
    #[doc = include_str!("../../../book/src/colspace.md")]
    pub struct Colspace;
    #[doc = include_str!("../../../book/src/verification.md")]
    pub struct Verification;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
