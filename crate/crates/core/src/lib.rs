//! Analysis and synthesis of linear open quantum harmonic oscillators.
//!
//! A real state-space system `(A, B, C, D)` with `2n` states and `2m`
//! channels is physically realizable when it is the realization of an
//! oscillator with Hamiltonian matrix `R`, coupling `M`, scattering `D` and
//! CCR matrix `Θ`. The [`pr`] module decides this from the transfer function
//! and recovers the parameters; [`convert`] moves between the
//! position-momentum and annihilation-creation parameterizations.

pub mod convert;
pub mod error;
pub mod example;
pub mod json;
pub mod linalg;
pub mod pr;
pub mod random;
pub mod skew;
pub mod state_space;

pub use convert::{AcParams, ComplexStateSpace, PmParams};
pub use error::{Error, Result, Violation};
pub use linalg::{ComplexMatrix, RealMatrix, StructureTolerance};
pub use pr::{PrOptions, PrReport, SynthesisResult, ThetaTarget, Verdict};
pub use skew::SkewFactorization;
pub use state_space::{DiagonalRational, RankTolerance, RationalEntry, SpectrumReport, StateSpace};
pub use num_complex::Complex64;
