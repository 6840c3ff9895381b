//! Control-adapted quantum noise spectroscopy (CA QNS) for digitally
//! controlled one- and two-qubit systems under non-Gaussian dephasing noise.
//!
//! The library covers the full characterization-and-control loop:
//!
//! - [`algebra`] — Pauli strings, dense operators, process matrices.
//! - [`noise`] — random-telegraph noise models, nested-bracket correlators,
//!   and control-adapted (CA) spectra, both in closed form and by Monte Carlo.
//! - [`control`] — window grids, digital controls (switching vectors / KAK
//!   gates), and frame-based filter functions.
//! - [`dyson`] — the toggling-frame Dyson series evaluated through control
//!   tensors, plus closed-form trace cross-checks.
//! - [`symmetry`] — contraction, dark and swap classification of spectra,
//!   learnable-set enumeration and sample-complexity counting.
//! - [`protocols`] — QNS experiment design, design matrices, least-squares
//!   spectral reconstruction, and the bundled protocol fixtures.
//! - [`sim`] — exact Monte Carlo trajectory simulation used as ground truth.
//! - [`optimizer`] — process-matrix prediction and Nelder-Mead control
//!   optimization for noise-tailored gates.

pub mod algebra;
pub mod control;
pub mod dyson;
pub mod noise;
pub mod optimizer;
pub mod polyexp;
pub mod protocols;
pub mod sim;
pub mod symmetry;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("operator is not a unitary Hermitian observable")]
    NotPauliObservable,
    #[error("unsupported noise model: {0}")]
    UnsupportedModel(String),
    #[error("spectrum table is missing required index {0}")]
    MissingSpectrum(String),
    #[error("design matrix is rank deficient (rank {rank} < {need}); increase the candidate pool")]
    RankDeficient { rank: usize, need: usize },
    #[error("invalid spectrum index: {0}")]
    InvalidIndex(String),
    #[error("invalid protocol row: {0}")]
    InvalidProtocol(String),
    #[error("truncation order {k} exceeds coverage {max}")]
    TruncationBeyondTable { k: usize, max: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Default absolute tolerance for matrix comparisons.
pub const MAT_TOL: f64 = 1e-10;
