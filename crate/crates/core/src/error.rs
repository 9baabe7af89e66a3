use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    /// An input lies outside the domain on which the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series was asked for a point too close to the edge of its disk of convergence.
    #[error("convergence margin exceeded: |{what}| = {modulus} > {bound}")]
    ConvergenceMargin {
        what: &'static str,
        modulus: f64,
        bound: f64,
    },

    #[error("pole: {0}")]
    Pole(String),

    #[error("branch tracking failed at step {step}: jump {jump} exceeds half the branch gap")]
    Tracking { step: usize, jump: f64 },

    #[error("{steps} continuation steps per turn are too few to track branches (need {min})")]
    TooFewSteps { steps: usize, min: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("annulus {r_in}..{r_out} has no finite conformal modulus")]
    NotConformalAnnulus { r_in: f64, r_out: f64 },
}

pub type Result<T> = std::result::Result<T, GeomError>;
