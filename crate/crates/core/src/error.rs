//! Error type shared by mesh construction, linear solves and estimators.

/// Errors produced by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Construction-time validation failure (meshes, problem data, configs).
    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    /// A direct solver hit a zero (or numerically vanishing) pivot.
    #[error("singular linear system: vanishing pivot at row {row}")]
    SingularSystem { row: usize },

    /// The elliptic bound's safety factor is undefined on this mesh.
    #[error("mesh too coarse for the elliptic bound: max_i h_i^2 sup|r| / (8 d_i) = {factor} >= 1")]
    MeshTooCoarse { factor: f64 },

    /// Split index of the final-time bound outside `0..=M-1`.
    #[error("split index K = {k} out of range 0..={max}")]
    SplitIndexOutOfRange { k: usize, max: usize },

    /// Kernel-derivative bound is unbounded at `t = 0` when `kappa1 > 0`.
    #[error("phi1 is unbounded at t = 0 for kappa1 > 0")]
    Phi1AtZero,

    /// A closed-form reconstruction was requested for a trajectory that does
    /// not carry the stage data the formula needs.
    #[error("trajectory has no stage data for scheme {scheme}")]
    MissingStages { scheme: &'static str },
}

impl Error {
    pub fn invalid(what: &'static str, why: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            why: why.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
