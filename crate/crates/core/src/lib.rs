//! Chess billiards on planar domains, the complex deformations they induce, and
//! the viscous internal-wave operator `P = -w^2 d1^2 + (1 - w^2) d2^2 + i w nu Lap^2`
//! discretised on real and deformed domains.

pub mod billiard;
pub mod deformation;
pub mod escape;
pub mod geometry;
pub mod potentials;
pub mod report;
pub mod roots;
pub mod solver;
pub mod symbols;

pub use num_complex::Complex64 as C64;

use serde::{Deserialize, Serialize};

/// Selects one of the two characteristic families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn s(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("domain is not lambda-simple: {0}")]
    NotSimple(String),
    #[error("|Im theta| = {im} exceeds the analyticity radius {radius}")]
    Analyticity { im: f64, radius: f64 },
    #[error("point lies outside the closed domain")]
    OutsideDomain,
    #[error("dynamics is not Morse-Smale: {0}")]
    NotMorseSmale(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("certificate failed: {0}")]
    Certificate(String),
    #[error("log branch violated: {0}")]
    Branch(String),
    #[error("linear algebra: {0}")]
    Linear(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by malformed user input rather than a failed check.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidInput(_) | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Reduces an angle in turns to `[0, 1)`.
pub fn wrap01(t: f64) -> f64 {
    let r = t - t.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Signed circular distance in `[-1/2, 1/2)`.
pub fn circ_diff(a: f64, b: f64) -> f64 {
    let d = a - b;
    d - (d + 0.5).floor()
}
