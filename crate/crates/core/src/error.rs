use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("reflector vector {index} is not unit norm (norm = {norm})")]
    NonUnitVector { index: usize, norm: f64 },
    #[error("sign entry {index} is not +1 or -1")]
    InvalidSign { index: usize },
    #[error("input is not orthonormal: |U^T U - I|_F = {deviation}")]
    NotOrthonormal { deviation: f64 },
    #[error("input is not symmetric: |S - S^T|_F = {deviation}")]
    NotSymmetric { deviation: f64 },
    #[error("reference matrix has zero norm")]
    ZeroReference,
    #[error("{name} = {value} out of range ({range})")]
    OutOfRange {
        name: &'static str,
        value: usize,
        range: String,
    },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("eigenvalue iteration failed to converge")]
    NoConvergence,
    #[error("bad magic")]
    BadMagic,
    #[error("truncated stream")]
    Truncated,
    #[error("unknown factor kind byte {0:#04x}")]
    UnknownKind(u8),
    #[error("invalid sign byte {byte:#04x} at position {index}")]
    BadSignByte { index: usize, byte: u8 },
    #[error("unexpected trailing bytes after factor payload")]
    TrailingBytes,
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
