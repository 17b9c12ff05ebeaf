//! Error types shared across the crate.

use std::fmt;

/// Errors produced by solvers, simulators, and analysis routines.
#[derive(Debug)]
pub enum Error {
    /// A precondition on an argument was violated.
    InvalidArgument(String),
    /// A time query fell outside the horizon or grid.
    OutOfRange(String),
    /// The backward Riccati integration blew up before reaching `t0`.
    /// `time` is the earliest time that was still representable.
    FiniteEscape { time: f64, norm: f64 },
    /// A simulated trajectory produced a non-finite state.
    DivergedTrajectory { interval: usize },
    /// A policy produced moments outside its constraint set.
    ConstraintViolation(String),
    /// Several trajectories of an ensemble failed; indices attached.
    EnsembleFailures(Vec<(usize, String)>),
    Io(std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::OutOfRange(msg) => write!(f, "out of range: {msg}"),
            Error::FiniteEscape { time, norm } => write!(
                f,
                "finite escape in backward Riccati integration near t = {time}: |P| = {norm:.3e}"
            ),
            Error::DivergedTrajectory { interval } => {
                write!(f, "trajectory diverged in interval {interval}")
            }
            Error::ConstraintViolation(msg) => write!(f, "constraint violation: {msg}"),
            Error::EnsembleFailures(fails) => {
                write!(f, "{} trajectories failed; first: ", fails.len())?;
                match fails.first() {
                    Some((idx, msg)) => write!(f, "#{idx}: {msg}"),
                    None => write!(f, "(none)"),
                }
            }
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
