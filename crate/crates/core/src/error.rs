//! Error types shared across the crate.

use thiserror::Error;

/// Everything that can go wrong while building or running an analysis.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("series variable mismatch: {0} vs {1}")]
    VarMismatch(&'static str, &'static str),

    #[error("Borel transform requires zero constant term, found |c0| = {0}")]
    NonzeroConstantTerm(String),

    #[error("matrix is not nilpotent to tolerance: |M^{n}|_max = {residual}")]
    NotNilpotent { n: usize, residual: String },

    #[error("matrix is not unipotent: M - I failed nilpotency check")]
    NotUnipotent,

    #[error("prepared-form validation failed: {0:?}")]
    Validation(Vec<String>),

    #[error("singular elimination step at block ({j},{k}), row {row}, order {m}")]
    SingularStep { j: usize, k: usize, row: usize, m: usize },

    #[error("path violates clearance {clearance} near {near}")]
    PathClearance { clearance: String, near: String },

    #[error("Pade approximant did not stabilize (best agreement {achieved})")]
    NonStabilizing { achieved: String },

    #[error("major fit residual {residual} above tolerance {tolerance}")]
    FitResidual { residual: String, tolerance: String },

    #[error("model-order ambiguity: exponents {0} and {1} congruent mod Z")]
    ModelAmbiguity(String, String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("ill-conditioned sample design: {0}")]
    IllConditioned(String),

    #[error("kappa_0({0}) below tolerance; cannot invert connection map")]
    KappaZero(String),

    #[error("coordinates of {0} in the lattice basis are not integral")]
    NonIntegralCoordinates(String),

    #[error("no exact lattice basis found at working precision; supply one")]
    NoExactBasis,

    #[error("lattice basis is not Z-linearly independent: relation {0:?}")]
    DependentBasis(Vec<i64>),

    #[error("grading inconsistency: stray monomial {0:?} has nonzero coefficient {1}")]
    StrayMonomial(Vec<i64>, String),

    #[error("direction {0} is not resolvable from the input")]
    UnknownDirection(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("stage {stage}: {source}")]
    Staged {
        stage: &'static str,
        #[source]
        source: Box<CoreError>,
    },
}

impl CoreError {
    pub fn at_stage(self, stage: &'static str) -> CoreError {
        CoreError::Staged { stage, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
