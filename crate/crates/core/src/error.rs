//! Error types shared across the solver.
//!
//! Every fallible operation in this crate returns [`Result`]. The variants
//! distinguish the failure classes that callers handle differently: bad input
//! geometry, bad configuration, numeric breakdown inside a kernel, and I/O.
//! Failure to converge within an increment is deliberately *not* an error;
//! the solver reports it through
//! [`IncrementResult`](crate::solver::IncrementResult) so that drivers such
//! as the limit-load search can treat it as data.

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid or degenerate geometry (negative areas, inverted elements,
    /// out-of-range node references).
    #[error("geometry error: {0}")]
    Geometry(String),

    /// Invalid configuration: bad parameter ranges, unknown names,
    /// inconsistent case setup.
    #[error("configuration error: {0}")]
    Config(String),

    /// Numeric breakdown: non-finite values, singular local operators.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The stress return mapping could not produce an admissible state.
    /// Carries the trial stress `(sig_xx, sig_yy, sig_zz, tau_xy)` that
    /// triggered the failure so the offending state can be reproduced.
    #[error("constitutive error: {message}; trial stress [{:.6e}, {:.6e}, {:.6e}, {:.6e}]",
            trial[0], trial[1], trial[2], trial[3])]
    Constitutive {
        /// Description of the failure.
        message: String,
        /// The trial stress that could not be returned to the yield surface.
        trial: [f64; 4],
    },

    /// Global solver failure other than non-convergence: singular stiffness,
    /// empty active domain, factorization breakdown.
    #[error("solver error: {0}")]
    Solver(String),

    /// A text input (mesh file or case file) could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse {
        /// One-based line number in the input.
        line: usize,
        /// What went wrong on that line.
        message: String,
    },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: configuration and parse problems map
    /// to 3, everything else to 1. Non-convergence is handled separately by
    /// the drivers (exit code 2) because it is not an `Error`.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } => 3,
            _ => 1,
        }
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_cli_contract() {
        assert_eq!(Error::Config("x".into()).exit_code(), 3);
        assert_eq!(
            Error::Parse {
                line: 3,
                message: "x".into()
            }
            .exit_code(),
            3
        );
        assert_eq!(Error::Geometry("x".into()).exit_code(), 1);
        assert_eq!(Error::Solver("x".into()).exit_code(), 1);
    }

    #[test]
    fn constitutive_error_reports_trial_stress() {
        let err = Error::Constitutive {
            message: "apex return without dilation".into(),
            trial: [1.0, 2.0, 3.0, 4.0],
        };
        let text = err.to_string();
        assert!(text.contains("apex return without dilation"));
        assert!(text.contains("1.000000e0"));
    }
}
