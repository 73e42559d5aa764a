use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid {quantity}: {value} ({reason})")]
    InvalidValue {
        quantity: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("cannot parse quantity `{input}`: {reason}")]
    UnitParse { input: String, reason: String },

    #[error("missing {0}")]
    Missing(&'static str),

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("timing conflict at cycle {cycle} ({mirror}): {reason}")]
    TimingConflict {
        mirror: String,
        cycle: u64,
        reason: String,
    },

    #[error("infeasible design: {0}")]
    Infeasible(String),

    #[error("lattice mismatch: {0}")]
    GridMismatch(String),

    #[error("CFL bound violated: c*dt/spacing = {courant} > {limit}")]
    Cfl { courant: f64, limit: f64 },

    #[error("wave vector component {axis} = {value} rad/m is not commensurate with the periodic grid")]
    NonCommensurate { axis: usize, value: f64 },

    #[error("polarization is not transverse to k (|k.e|/|k||e| = {0})")]
    NotTransverse(f64),
}

impl Error {
    pub(crate) fn invalid(quantity: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidValue {
            quantity,
            value,
            reason,
        }
    }
}
