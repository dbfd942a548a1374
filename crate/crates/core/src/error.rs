use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the laboratory core.
///
/// Variants split into two families: input validation (a caller handed us
/// something outside an operation's contract) and numerical failure (the
/// computation itself broke down). [`Error::is_numerical`] tells them apart.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("rank-deficient design matrix: {0}")]
    RankDeficient(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("fit window: {0}")]
    FitWindow(String),

    #[error("training diverged at step {step} (loss {loss})")]
    TrainingDiverged { step: u64, loss: f64 },

    #[error("chain {chain} diverged at step {step}; partial chain means {partial_means:?}")]
    ChainDiverged {
        chain: usize,
        step: usize,
        partial_means: Vec<f64>,
    },

    #[error("quantization failed: {0}")]
    QuantizationFailed(String),

    #[error("tolerance unreachable: {0}")]
    UnreachableTolerance(String),

    #[error("covering failure at audit point {witness:?} (KL to nearest center {gap} > {epsilon})")]
    CoveringFailure {
        witness: Vec<f64>,
        gap: f64,
        epsilon: f64,
    },
}

impl Error {
    /// True for failures of the computation rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::TrainingDiverged { .. }
                | Error::ChainDiverged { .. }
                | Error::QuantizationFailed(_)
                | Error::UnreachableTolerance(_)
                | Error::CoveringFailure { .. }
                | Error::RankDeficient(_)
                | Error::InsufficientData(_)
                | Error::FitWindow(_)
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! invalid {
    ($($arg:tt)*) => {
        $crate::error::Error::InvalidInput(alloc::format!($($arg)*))
    };
}
pub(crate) use invalid;
