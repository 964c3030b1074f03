use alloc::string::String;
use core::fmt;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A temperature fell outside the validity range covered by the phase diagram.
    TemperatureOutOfRange { temperature: f64, lo: f64, hi: f64 },
    /// A parameter violates its declared invariant.
    InvalidParameter { name: &'static str, reason: String },
    /// Linearized equilibrium concentrations produce no valid partition ratio.
    DegenerateDiagram { temperature: f64, c_alpha_eq: f64, c_gamma_eq: f64 },
    /// A denominator or normalization vanished.
    NumericalDegeneracy(&'static str),
    /// A level-set field has no sign change, so it carries no interface.
    NoInterface,
    /// The linear solver hit its iteration cap.
    SolverDiverged { iterations: usize, relative_residual: f64 },
    /// Two fields live on different grids.
    GridMismatch,
    /// Closed-form geometry became singular.
    DegenerateGeometry(&'static str),
    /// Not every nucleus could be placed under the separation constraint.
    PlacementFailed { requested: usize, placed: usize },
    /// A sharp interface reached the domain boundary.
    DomainExhausted { position: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::TemperatureOutOfRange { temperature, lo, hi } => write!(
                f,
                "temperature {temperature} K is outside the covered range [{lo}, {hi}] K"
            ),
            Error::InvalidParameter { name, reason } => write!(f, "invalid `{name}`: {reason}"),
            Error::DegenerateDiagram { temperature, c_alpha_eq, c_gamma_eq } => write!(
                f,
                "degenerate phase diagram at {temperature} K (c_alpha_eq = {c_alpha_eq}, c_gamma_eq = {c_gamma_eq})"
            ),
            Error::NumericalDegeneracy(what) => write!(f, "numerical degeneracy: {what}"),
            Error::NoInterface => f.write_str("level-set field has no sign change"),
            Error::SolverDiverged { iterations, relative_residual } => write!(
                f,
                "linear solver stopped after {iterations} iterations at relative residual {relative_residual:e}"
            ),
            Error::GridMismatch => f.write_str("fields are defined on different grids"),
            Error::DegenerateGeometry(what) => write!(f, "degenerate geometry: {what}"),
            Error::PlacementFailed { requested, placed } => write!(
                f,
                "placed only {placed} of {requested} nuclei under the separation constraint"
            ),
            Error::DomainExhausted { position } => {
                write!(f, "interface left the domain (position {position} µm)")
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
