use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid fiber spec: {0}")]
    InvalidSpec(String),

    #[error("no guided mode found (V = {0})")]
    NoGuidedMode(f64),

    #[error("sampled basis is not orthonormal: max off-diagonal Gram entry {0:.3e} (grid too coarse or window too small)")]
    NotOrthonormal(f64),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("grid mismatch: expected {expected:?}, got {actual:?}")]
    GridMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("correlation undefined: image is constant over the region of interest")]
    ConstantImage,

    #[error("invalid region of interest: {0}")]
    InvalidRoi(String),

    #[error("mode weights are all zero")]
    ZeroWeights,

    #[error("weights are not canonical: {0}")]
    NotCanonical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sideband overlap: object bandwidth {bandwidth:.4} cycles/px exceeds band-pass radius {radius:.4} cycles/px; reconstruction unreliable")]
    SidebandOverlap { bandwidth: f64, radius: f64 },

    #[error("record count {count} exceeds configured cap {cap}")]
    CountCapExceeded { count: u128, cap: u128 },

    #[error("record count overflows 128 bits")]
    CountOverflow,

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported container version {0} (expected 1)")]
    UnsupportedVersion(u32),

    #[error("file truncated at record {index}")]
    Truncated { index: u64 },

    #[error("unexpected trailing data: {extra} bytes after the last record")]
    TrailingData { extra: u64 },

    #[error("label entry {position} of record {index} is {value}, outside [0, 1]")]
    LabelOutOfRange { index: u64, position: usize, value: f32 },

    #[error("split `{0}` would be empty")]
    EmptySplit(&'static str),

    #[error("matrix is ill-conditioned (1-norm condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("matrix is zero")]
    ZeroMatrix,

    #[error("mode {0} is not guided by both fibers")]
    ModeNotGuided(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the filesystem rather than of the inputs.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Csv(e) => e.is_io_error(),
            _ => false,
        }
    }
}
