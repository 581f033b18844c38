//! Error type shared by every module.

use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Erosion or time clipping produced a cylinder with no cells.
    EmptyCylinder { detail: String },
    /// Newton iteration failed to reach the residual tolerance; usually
    /// means dt is too large for the grid or the linear solve stagnated.
    NewtonDivergence { step: usize, residual: f64 },
    /// Boundary datum evaluated negative on a parabolic-boundary node.
    NegativeBoundary { x: f64, y: f64, t: f64, value: f64 },
    /// Operation requires `smooth = true` boundary data (with derivative
    /// metadata for the penalty term psi).
    MissingSmoothness,
    /// `smooth_power_approx` could not enforce the sandwich
    /// `phi^m <= g^m <= phi^m + eps^m` at the requested level.
    SandwichFailure { j: usize, deficit: f64 },
    /// Poisson modification asked for on a cylinder not flagged regular.
    NotRegular,
    /// Candidate filtering removed every field.
    EmptyClass,
    /// Two fields/grids that must share a discretization do not.
    MismatchedGrids { detail: String },
    /// Boundary ordering hypothesis of the comparison theorem fails, so a
    /// comparison report is inapplicable rather than failed.
    BoundaryOrderingViolated { max_excess: f64 },
    /// Grid construction rejected (empty interior, bad extents, T = 0, ...).
    InvalidGrid { detail: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyCylinder { detail } => write!(f, "empty cylinder: {detail}"),
            Error::NewtonDivergence { step, residual } => write!(
                f,
                "newton iteration diverged at step {step} (residual {residual:.3e})"
            ),
            Error::NegativeBoundary { x, y, t, value } => write!(
                f,
                "boundary datum negative at ({x}, {y}, t={t}): {value}"
            ),
            Error::MissingSmoothness => write!(f, "boundary datum lacks smoothness metadata"),
            Error::SandwichFailure { j, deficit } => write!(
                f,
                "smoothing sandwich unattainable at j={j} (deficit {deficit:.3e})"
            ),
            Error::NotRegular => write!(f, "cylinder is not flagged regular"),
            Error::EmptyClass => write!(f, "no candidate passed the class filter"),
            Error::MismatchedGrids { detail } => write!(f, "mismatched grids: {detail}"),
            Error::BoundaryOrderingViolated { max_excess } => write!(
                f,
                "comparison hypothesis fails on the parabolic boundary (excess {max_excess:.3e})"
            ),
            Error::InvalidGrid { detail } => write!(f, "invalid grid: {detail}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
