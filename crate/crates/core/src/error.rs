use thiserror::Error;

/// Broad failure category, used by front ends to choose an exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: malformed map, wrong dimensions, violated continuity.
    Config,
    /// The mathematics does not apply (a nondegeneracy condition fails).
    Degenerate,
    /// A numerical procedure failed (Newton, continuation, escape).
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("continuity violated on the switching manifold; offending monomials: {}", .monomials.join(", "))]
    ContinuityViolation { monomials: Vec<String> },

    #[error("linearization has eigenvalue 1 (|lambda - 1| = {distance:.3e}); fixed point is not isolated")]
    SingularLinearization { distance: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("a_L(0,0) = {value} is not -1; no period-doubling at the border-collision")]
    SingularityMissing { value: f64 },

    #[error("degenerate unfolding: {0}")]
    DegenerateUnfolding(String),

    #[error("converged two-cycle has itinerary {found}, requested {requested}")]
    WrongItinerary { requested: String, found: String },

    #[error("two-cycle solve collapsed onto a fixed point")]
    CollapsedCycle,

    #[error("period bound {n_max} exceeds the cost guard of {limit}")]
    CostGuard { n_max: usize, limit: usize },

    #[error("orbit escaped (|x| = {norm:.3e} after {step} steps)")]
    Escaped { step: usize, norm: f64 },

    #[error("preconditions not met: {0}")]
    PreconditionsNotMet(String),

    #[error("trapping set is not forward invariant: f^2({x:.6e}) = {image:.6e} leaves [{lo:.6e}, {hi:.6e}]")]
    InvarianceFailed { x: f64, image: f64, lo: f64, hi: f64 },

    #[error("resonant monomial {monomial} in the homological equation (smallest singular value {sigma:.3e})")]
    ResonantMonomial { monomial: String, sigma: f64 },

    #[error("admissibility sign is zero within tolerance (value {value:.3e})")]
    ZeroSign { value: f64 },

    #[error("invalid continuation seed: {0}")]
    SeedInvalid(String),

    #[error("continuation step failure at step {step}: step size fell below {min_step:.1e}")]
    StepFailure { step: usize, min_step: f64 },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_)
            | Error::DimensionMismatch { .. }
            | Error::ContinuityViolation { .. }
            | Error::CostGuard { .. } => ErrorKind::Config,
            Error::SingularLinearization { .. }
            | Error::SingularityMissing { .. }
            | Error::DegenerateUnfolding(_)
            | Error::ResonantMonomial { .. }
            | Error::ZeroSign { .. }
            | Error::PreconditionsNotMet(_) => ErrorKind::Degenerate,
            Error::NoConvergence { .. }
            | Error::WrongItinerary { .. }
            | Error::CollapsedCycle
            | Error::Escaped { .. }
            | Error::InvarianceFailed { .. }
            | Error::SeedInvalid(_)
            | Error::StepFailure { .. } => ErrorKind::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
