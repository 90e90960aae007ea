//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("conductor {found} does not divide {target}")]
    IncompatibleConductor { found: u32, target: u32 },
    #[error("conductor {needed} exceeds the configured cap {cap} (set KATZ_MAX_CONDUCTOR to raise it)")]
    ConductorTooSmall { needed: u64, cap: u32 },
    #[error("value requires a field extension outside the cyclotomic-rational fields: {0}")]
    FieldExtensionRequired(String),
    #[error("coordinate change is not invertible (zero linear coefficient)")]
    NotInvertible,
    #[error("insufficient precision in truncated series: {0}")]
    InsufficientPrecision(String),
    #[error("series has no dominant term")]
    NoDominantTerm,
    #[error("non-integral irregularity: block data violates primitivity")]
    NonIntegralIrregularity,
    #[error("imprimitive block: phase orbit is smaller than the declared ramification")]
    ImprimitiveBlock,
    #[error("ramified component where a rank-one choice is required")]
    RamifiedChoice,
    #[error("rigidity index {0} exceeds two")]
    RigTooLarge(i64),
    #[error("local Fourier transform is not defined on trivial blocks")]
    TrivialBlock,
    #[error("slope at infinity must exceed one, got {0}")]
    SlopeNotGreaterThanOne(String),
    #[error("middle convolution parameter must not be an integer")]
    IntegerLambda,
    #[error("middle convolution is excluded on this trivial rank-one shape")]
    ExcludedTrivialCase,
    #[error("not a rigid input: rigidity index is {0}, expected 2")]
    NotRigidInput(i64),
    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),
    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),
    #[error("invalid datum: {0}")]
    InvalidDatum(String),
    #[error("unknown corpus entry: {0}")]
    UnknownName(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
