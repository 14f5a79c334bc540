use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("shape mismatch: {what} ({left_rows}x{left_cols} vs {right_rows}x{right_cols})")]
    ShapeMismatch {
        what: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("evaluation point {point} lies within the resolvent guard of eigenvalue {eigenvalue}")]
    NearPole {
        point: Complex64,
        eigenvalue: Complex64,
    },

    #[error("{what} is singular")]
    Singular { what: &'static str },

    #[error("matrix is not skew-symmetric (residual {residual:.3e})")]
    NotSkew { residual: f64 },

    #[error("skew-symmetric matrix is singular (min delta {min_delta:.3e}, max delta {max_delta:.3e})")]
    SingularSkew { min_delta: f64, max_delta: f64 },

    #[error("rational entry is improper (numerator degree {num_degree} > denominator degree {den_degree})")]
    Improper { num_degree: usize, den_degree: usize },

    #[error("rational entry has a zero denominator")]
    ZeroDenominator,

    #[error("block list is empty")]
    EmptyBlockList,

    #[error("parameter invariants violated: {}", format_violations(.0))]
    InvariantViolation(Vec<Violation>),

    #[error("system has no dynamics (zero state dimension)")]
    NoDynamics,

    #[error("no similarity solution within tolerance (residual {residual:.3e})")]
    NoSolution { residual: f64 },

    #[error("system is not physically realizable: {0}")]
    NotRealizable(String),

    #[error("synthesis verification failed: {0}")]
    Verification(String),

    #[error("eigenvalue computation failed: {0}")]
    Eigen(&'static str),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// One failed structural condition together with its measured residual.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Violation {
    pub condition: String,
    pub residual: f64,
}

impl Violation {
    pub fn new(condition: impl Into<String>, residual: f64) -> Self {
        Self {
            condition: condition.into(),
            residual,
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("{} (residual {:.3e})", x.condition, x.residual))
        .collect::<Vec<_>>()
        .join("; ")
}
