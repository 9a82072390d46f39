use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input shape: {0}")]
    InputShape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("codebook: {0}")]
    Codebook(String),

    #[error("numerical configuration: {0}")]
    NumericalConfig(String),

    #[error("timing loop did not converge: {0}")]
    Convergence(String),

    #[error("equalizer diverged after {symbols_processed} symbols")]
    Divergence { symbols_processed: usize },

    #[error("frequency offset estimate unreliable (peak-to-median {peak_to_median_db:.2} dB)")]
    EstimationUnreliable { peak_to_median_db: f64 },

    #[error("tributary alignment failed (best parity score {best_score:.3})")]
    AlignmentFailed { best_score: f64 },

    #[error("frame synchronization failed (agreement {agreement:.3} at offset {offset})")]
    SyncFailed { offset: usize, agreement: f64 },

    #[error("curve fit undefined: {0}")]
    FitUndefined(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
