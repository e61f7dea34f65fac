use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // simulator
    #[error("qubit {qubit} out of range for a {n_qubits}-qubit register")]
    TargetOutOfRange { qubit: usize, n_qubits: usize },
    #[error("qubit {0} targeted more than once")]
    DuplicateTarget(usize),
    #[error("gate of dimension {gate_dim} cannot act on {n_targets} target(s)")]
    DimensionMismatch { gate_dim: usize, n_targets: usize },
    #[error("rotation axis is not normalized (norm {0})")]
    AxisNotNormalized(f64),
    #[error("matrix is not unitary (max deviation {0:e})")]
    NotUnitary(f64),
    #[error("dense oracle supports at most 10 qubits, got {0}")]
    TooManyQubits(usize),

    // embedding
    #[error("cannot amplitude-embed an all-zero image")]
    AllZeroImage,
    #[error("{n_pixels} values do not fit in a {n_qubits}-qubit register")]
    RegisterTooSmall { n_pixels: usize, n_qubits: usize },
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),

    // qcnn
    #[error("depth {depth} leaves fewer than 2 active wires on {n_qubits} qubits")]
    TooDeep { n_qubits: usize, depth: usize },
    #[error("expected {expected} weights, got {got}")]
    WeightLengthMismatch { expected: usize, got: usize },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    // training / cnn
    #[error("empty batch")]
    EmptyBatch,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("labels must be 0 or 1, found {0}")]
    NonBinaryLabels(u8),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("numeric failure: {0}")]
    NonFinite(String),

    // augment
    #[error("rotation angle {angle} exceeds bound {max}")]
    AngleOutOfBounds { angle: f64, max: f64 },
    #[error("contrast factor {factor} outside [{lo}, {hi}]")]
    FactorOutOfBounds { factor: f64, lo: f64, hi: f64 },

    // datasets
    #[error("{path}:{line}: malformed record: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}: bad magic 0x{found:08x}, expected 0x{expected:08x}")]
    BadMagic {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("{0}: file is truncated")]
    TruncatedFile(PathBuf),
    #[error("{path}: unsupported PGM: {reason}")]
    UnsupportedPgm { path: PathBuf, reason: String },
    #[error("{0}: no class matches the file name prefix")]
    UnknownClassPrefix(PathBuf),
    #[error("cannot resize {from_h}x{from_w} to {to_h}x{to_w} by integer blocks")]
    NonIntegerFactor {
        from_h: usize,
        from_w: usize,
        to_h: usize,
        to_w: usize,
    },
    #[error("class {class} has {available} samples, {needed} needed")]
    InsufficientSamples {
        class: u8,
        available: usize,
        needed: usize,
    },

    // harness
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse classification used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            Config(_)
            | InvalidConfig(_)
            | TooDeep { .. }
            | InvalidArchitecture(_)
            | AngleOutOfBounds { .. }
            | FactorOutOfBounds { .. } => ErrorKind::Usage,
            Malformed { .. }
            | BadMagic { .. }
            | CountMismatch { .. }
            | TruncatedFile(_)
            | UnsupportedPgm { .. }
            | UnknownClassPrefix(_)
            | NonIntegerFactor { .. }
            | InsufficientSamples { .. }
            | Io { .. }
            | AllZeroImage
            | RegisterTooSmall { .. }
            | NonBinaryLabels(_)
            | OutOfRange(_) => ErrorKind::Data,
            _ => ErrorKind::Numeric,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Numeric,
}
