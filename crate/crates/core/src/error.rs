//! Error conditions shared by all modules.

use alloc::string::String;

/// Error conditions. Hypothesis checks that merely *fail* are not errors;
/// they come back as records with negative margins. Errors signal inputs or
/// numerics that leave no meaningful result.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible range.
    InvalidParameter(String),
    /// Iterative root finding did not converge within its iteration cap.
    NumericFailure { what: &'static str, x: f64 },
    /// Derivative data of the requested order is not available.
    MissingDerivative { order: usize },
    /// The arcs of a cover do not cover the circle.
    CoverGap { uncovered: f64 },
    /// A constant constraint has an empty feasible set.
    Infeasible(String),
    /// Power iteration did not converge within the iteration limit.
    NoConvergence { iterations: usize, last_delta: f64 },
    /// An input that must be strictly positive is not.
    NonPositiveInput,
    /// A function is not a strict member of the cone it was claimed to be in.
    NotInCone,
    /// An arc passed to a Jacobian check spans a branch boundary.
    ArcTooLarge { arc_lo: f64, arc_hi: f64 },
    /// All correlation entries are below the fit noise floor.
    AllBelowFloor,
    /// Green-Kubo variance came out negative beyond tolerance.
    NegativeVariance(f64),
    /// The observable has vanishing asymptotic variance.
    ZeroVariance,
    /// Two points are too far apart for the preimage-matching recursion.
    TooFar { level: usize, distance: f64, limit: f64 },
    /// Contraction factor outside (0, 1).
    InvalidContraction(f64),
}

impl core::fmt::Display for Error {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::NumericFailure { what, x } => {
                write!(f, "numeric failure in {what} near x = {x}")
            }
            Error::MissingDerivative { order } => {
                write!(f, "derivative data of order {order} not available")
            }
            Error::CoverGap { uncovered } => {
                write!(f, "cover leaves {uncovered} of the circle uncovered")
            }
            Error::Infeasible(msg) => write!(f, "infeasible constants: {msg}"),
            Error::NoConvergence { iterations, last_delta } => {
                write!(f, "no convergence after {iterations} iterations (last change {last_delta})")
            }
            Error::NonPositiveInput => write!(f, "input must be strictly positive"),
            Error::NotInCone => write!(f, "function is not a strict cone member"),
            Error::ArcTooLarge { arc_lo, arc_hi } => {
                write!(f, "arc [{arc_lo}, {arc_hi}) spans a branch boundary")
            }
            Error::AllBelowFloor => write!(f, "all entries below the noise floor"),
            Error::NegativeVariance(v) => write!(f, "variance {v} negative beyond tolerance"),
            Error::ZeroVariance => write!(f, "observable has zero asymptotic variance"),
            Error::TooFar { level, distance, limit } => {
                write!(f, "matching chain broke at level {level}: distance {distance} >= {limit}")
            }
            Error::InvalidContraction(l) => write!(f, "contraction factor {l} outside (0, 1)"),
        }
    }
}

impl core::error::Error for Error {}
