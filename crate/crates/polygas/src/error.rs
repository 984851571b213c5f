//! Error type shared across the crate.

/// Errors reported by kinematic transforms, quadrature drivers, and operator
/// evaluations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A direction argument was expected to be a unit vector.
    #[error("direction is not a unit vector (|omega| = {norm})")]
    NonUnitDirection { norm: f64 },

    /// The colliding pair carries no energy, so energy fractions are undefined.
    #[error("total pair energy is zero; energy fractions are undefined")]
    ZeroPairEnergy,

    /// A molecule specification outside the supported table.
    #[error("unsupported molecule: {reason}")]
    UnsupportedMolecule { reason: String },

    /// A slice-chart inversion landed outside the collision manifold.
    #[error("slice inversion left the collision domain: {reason}")]
    OutsideDomain { reason: String },

    /// A configuration or argument value that cannot be used.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A non-finite value surfaced during evaluation.
    #[error("numerical failure in {context}: {detail}")]
    Numerics { context: String, detail: String },
}

impl Error {
    pub(crate) fn numerics(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numerics {
            context: context.into(),
            detail: detail.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
