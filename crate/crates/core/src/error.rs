use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter or input violates its documented domain.
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    /// δ = 0 closes every gap.
    #[error("the waveguide is gapless (delta = 0)")]
    Gapless,

    /// Group velocity at a point where ω(k) = 0.
    #[error("singular point: omega(k) = 0 at k = {k}")]
    SingularPoint { k: f64 },

    /// Energy outside the domain of a bandgap quantity (inside a band or at an edge).
    #[error("energy {energy} is outside the bandgap domain (distance to nearest band edge {distance:e})")]
    OutOfGap { energy: f64, distance: f64 },

    /// Detuning sits on a band edge where the density of states diverges.
    #[error("detuning {detuning} lies on a band edge")]
    BandEdge { detuning: f64 },

    /// Band-regime quantity requested for a detuning inside a gap, or vice versa.
    #[error("detuning {detuning} is in the wrong regime: {expected} required")]
    Regime { detuning: f64, expected: &'static str },

    /// No sign change of E - Δ - Σ(E) inside a gap.
    #[error("no bound state bracketed in the {gap} gap")]
    NotBracketed { gap: &'static str },

    /// Quadrature did not reach its tolerance before the point budget ran out.
    #[error("quadrature did not converge ({points} points, last change {change:e})")]
    Quadrature { points: usize, change: f64 },

    /// Extrapolation to η → 0 was not self-consistent.
    #[error("eta extrapolation did not converge (spread {spread:e})")]
    Extrapolation { spread: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    /// Dissipator with a clearly negative eigenvalue.
    #[error("unphysical dissipator: eigenvalue {eigenvalue:e}")]
    UnphysicalDissipator { eigenvalue: f64 },

    /// The step integrator could not meet its error target.
    #[error("step size underflow at t = {time}")]
    StepUnderflow { time: f64 },

    #[error("no oscillation detected in the time window")]
    NoOscillation,

    /// An operation was called outside its precondition.
    #[error("contract violation: {0}")]
    Contract(&'static str),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }
}
