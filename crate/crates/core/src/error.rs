use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("qubit index {index} out of range for {n} qubits")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("invalid scale factor {0}, must be strictly positive")]
    InvalidScale(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid spin value {0}, spins must be -1 or +1")]
    InvalidSpin(i64),
    #[error("invalid topology spec: {0}")]
    InvalidSpec(String),
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("coefficient {value} outside device range [-{max}, {max}]")]
    RangeViolation { value: f64, max: f64 },
    #[error("qmi incompatible with device: {0}")]
    IncompatibleDevice(String),
    #[error("invalid device model: {0}")]
    InvalidDevice(String),
    #[error("an ensemble needs at least 2 members, got {0}")]
    NeedEnsemble(usize),
    #[error("{n} qubits is too many for exhaustive enumeration (max {max}); use estimate_ground")]
    TooLarge { n: usize, max: usize },
    #[error("sample set is empty")]
    EmptySamples,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed checkpoints: {0}")]
    InvalidCheckpoints(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
