use thiserror::Error;

/// Errors raised by model constructors and planners.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The discard window covers the whole acceptance region.
    #[error("discard window v = {v} leaves no acceptance region (needs v < sqrt(pi)/2)")]
    EmptyWindow { v: f64 },

    #[error("repeater spacing {0} km is not on the grid {{0.5, 1, 2, 2.5, 5}}")]
    OffGrid(f64),

    #[error("no qubit budget up to {cap_qubits} GKP qubits per repeater reaches the success threshold")]
    Infeasible { cap_qubits: u64 },

    #[error("no repeater spacing yields a positive rate at {l_tot_km} km")]
    NoKey { l_tot_km: f64 },
}

impl ModelError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        ModelError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ModelError>;
