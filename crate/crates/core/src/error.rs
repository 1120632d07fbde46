use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("profile is not periodic: |I_h(2pi)| = {residual:.3e} exceeds {tol:.1e}")]
    NonPeriodicProfile { residual: f64, tol: f64 },

    #[error("delta index (i={i}, j={j}) out of range for degree n={n}")]
    DeltaIndexOutOfRange { n: u32, i: u32, j: u32 },

    #[error("perturbation degree must be >= 1")]
    ZeroDegree,

    #[error("coefficient index ({i},{j},{k}) violates i+j+k <= {max} for degree {degree}")]
    CoefficientOutOfRange { i: u32, j: u32, k: u32, degree: u32, max: u32 },

    #[error("polynomial coefficient index ({i},{j}) violates i+j <= {max} for degree {degree}")]
    PolyIndexOutOfRange { i: u32, j: u32, degree: u32, max: u32 },

    #[error("closed-form path supports degrees 2 and 3 only (got {0}); use the generic path")]
    UnsupportedDegree(u32),

    #[error("radius must be positive (got {0})")]
    NonPositiveRadius(f64),

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("averaged function is identically zero; it has no isolated zeros")]
    IdenticallyZeroPoly,

    #[error("averaged slice at z0 = {z0} is identically zero in r; zeros are not isolated")]
    DegenerateSlice { z0: f64 },

    #[error("locus curve is empty")]
    EmptyCurve,

    #[error("angular mesh needs at least 3 samples (got {0})")]
    TooFewSamples(u32),

    #[error("|epsilon| = {0} exceeds the perturbative bound {1}")]
    EpsilonOutOfBounds(f64, f64),

    #[error("fixed-point equation is degenerate: the return map is the identity at epsilon = 0")]
    DegenerateReturnMap,

    #[error("locus point is degenerate: |dpsi/dr| = {dpsi_dr:.3e} <= {threshold:.1e}")]
    DegeneratePoint { dpsi_dr: f64, threshold: f64 },

    #[error("fixed-point iteration did not converge after {iters} iterations (last residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("iterate r = {r:.6e} left the admissible interval (0, {bound:.1e})")]
    IterateOutOfBounds { r: f64, bound: f64 },

    #[error("radius left the admissible interval during integration: r = {r:.6e}")]
    RadiusOutOfBounds { r: f64 },

    #[error("trajectory entered the tangency guard around the z-axis (|x|,|y| <= {guard:.1e} at t = {t:.6})")]
    TangencyGuard { t: f64, guard: f64 },

    #[error("integration failure: {0}")]
    Integration(String),

    #[error("serialization: {0}")]
    Serialize(String),

    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
