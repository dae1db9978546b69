use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit codes used by the runner.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const ASSUMPTION: i32 = 3;
    pub const NUMERICAL: i32 = 4;
    pub const WINDOW_CAP: i32 = 5;
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("lattice mismatch: {0}")]
    LatticeMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("support {support} is not contained in window {window}")]
    SupportNotContained { support: String, window: String },

    #[error("window of {sites} sites exceeds the dense cap of {cap} sites")]
    WindowCap { sites: usize, cap: usize },

    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("degenerate ground state: gap {gap:e} below threshold {threshold:e}")]
    DegenerateGround { gap: f64, threshold: f64 },

    #[error("gap assumption violated: minimum gap {min_gap} at s = {s} is below the bound {bound}")]
    GapViolated { min_gap: f64, s: f64, bound: f64 },

    #[error("filter cutoff gamma = {gamma} must lie below the gap bound {gap}")]
    FilterCutoff { gamma: f64, gap: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("integration failed: {0}")]
    Integration(String),

    #[error("eigendecomposition failed")]
    Eigen,

    #[error("config: {0}")]
    Config(String),

    #[error("fixture: {0}")]
    Fixture(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::LatticeMismatch(_)
            | Error::InvalidInput(_)
            | Error::SupportNotContained { .. }
            | Error::NotHermitian(_) => exit::CONFIG,
            Error::DegenerateGround { .. } | Error::GapViolated { .. } | Error::FilterCutoff { .. } => exit::ASSUMPTION,
            Error::Quadrature(_) | Error::Integration(_) | Error::Eigen => exit::NUMERICAL,
            Error::WindowCap { .. } => exit::WINDOW_CAP,
            Error::Fixture(_) | Error::Io(_) => exit::CHECK_FAILED,
        }
    }
}
