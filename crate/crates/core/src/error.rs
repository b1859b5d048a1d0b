use thiserror::Error;

/// Errors shared across the library. Variant names follow the failure modes
/// of the operations that raise them.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum Error {
    #[error("invalid ring spec: {0}")]
    SpecInvalid(String),
    #[error("carrier would have {size} elements, cap is {cap}")]
    SizeOverflow { size: u64, cap: u64 },
    #[error("involution `{name}` is not applicable to this ring: {reason}")]
    IncompatibleRing { name: String, reason: String },
    #[error("bar is not an involution with symmetry lambda: {0}")]
    NotASymmetry(String),
    #[error("mu constraint failed: mu != bar(mu)*lambda")]
    MuConstraintFailed,
    #[error("closure exceeded cap of {cap} elements")]
    ClosureOverflow { cap: usize },
    #[error("enumeration exceeded cap of {cap}")]
    EnumerationOverflow { cap: usize },
    #[error("bad theta indices: {0}")]
    BadIndices(String),
    #[error("point ({x},{y}) is not in the required form parameter")]
    PointNotInParameter { x: u32, y: u32 },
    #[error("matrix is not invertible")]
    NotInvertible,
    #[error("exhaustive cap {cap} exceeded (needed {needed})")]
    CapExceeded { cap: u64, needed: u64 },
    #[error("dimension mismatch: {0}")]
    SizeMismatch(String),
    #[error("classical instance `{kind}` needs {reason}")]
    IncompatibleBase { kind: String, reason: String },
    #[error("no shift found: precondition (unimodular column) violated")]
    NoShiftFound,
    #[error("column reduction failed: {0}")]
    ReductionFailed(String),
    #[error("certification failed: {0}")]
    CertificationFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
