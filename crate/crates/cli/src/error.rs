use clairaut_core::dynamics::DynamicsError;
use clairaut_core::{PartitionError, SolveError};

pub const EXIT_PROBLEM: u8 = 2;
pub const EXIT_RANK: u8 = 3;
pub const EXIT_SOLVER: u8 = 4;
pub const EXIT_DOMAIN: u8 = 5;
pub const EXIT_EQUIVALENCE: u8 = 6;
pub const EXIT_VERIFY: u8 = 7;
/// Output could not be written.
pub const EXIT_IO: u8 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn problem(message: impl Into<String>) -> Self {
        CliError::new(EXIT_PROBLEM, message)
    }
}

impl From<PartitionError> for CliError {
    fn from(e: PartitionError) -> Self {
        let code = match e {
            PartitionError::RankNotConstant { .. } | PartitionError::NoValidMinor { .. } => EXIT_RANK,
            PartitionError::Eval(_) => EXIT_SOLVER,
            PartitionError::NoSamples | PartitionError::InvalidIndexSet(_) => EXIT_PROBLEM,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        let code = match e {
            SolveError::Dimension { .. } => EXIT_PROBLEM,
            _ => EXIT_SOLVER,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        let code = match e {
            DynamicsError::GaugeDimension { .. }
            | DynamicsError::Dimension { .. }
            | DynamicsError::NotLagrangian
            | DynamicsError::InvalidStep(_)
            | DynamicsError::InvalidSpan { .. } => EXIT_PROBLEM,
            DynamicsError::PrimaryViolated { ref phi, tol } => {
                let parts: Vec<String> = phi.iter().enumerate().map(|(i, f)| format!("Phi_{} = {f}", i + 1)).collect();
                return CliError::new(
                    EXIT_SOLVER,
                    format!("enforce_primary: initial data violate the primary constraints ({}; tolerance {tol:e})", parts.join(", ")),
                );
            }
            DynamicsError::Solve(ref s) => return s.clone().into(),
            DynamicsError::StepFailure { .. } | DynamicsError::GridMismatch { .. } => EXIT_SOLVER,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new(EXIT_IO, e.to_string())
    }
}
