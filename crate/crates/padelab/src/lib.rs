//! Classical emulation of Padé-based linear-system encodings for linear
//! ODEs `x' = Ax + b`, alongside the Taylor encoding they improve on.
//!
//! Module map:
//! - [`pade`]: coefficients, `N/D/R` evaluation, reference `e^{At}`
//! - [`bounds`]: remainder series, `θ_k`, orders and parameter selection
//! - [`scheme`], [`system`]: encoding schemes and system assembly
//! - [`solver`]: block-forward and dense solves, success probability
//! - [`analysis`]: norms, condition numbers and every checkable bound
//! - [`circuit`]: block-encoding circuits at small register sizes
//! - [`experiments`]: sweeps and random suites

pub mod analysis;
pub mod bounds;
pub mod circuit;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod pade;
pub mod problem;
pub mod random;
pub mod scheme;
pub mod solver;
pub mod suites;
pub mod system;
pub mod trajectory;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
pub use problem::OdeProblem;
