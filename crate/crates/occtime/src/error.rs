//! Error taxonomy shared by every module.

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature exhausted its subdivision budget. The best
    /// estimate and its error bound are reported so callers can decide
    /// whether the partial answer is still useful.
    #[error("quadrature did not converge in {context}: estimate {estimate}, error bound {error_bound}")]
    NonConvergence {
        estimate: f64,
        error_bound: f64,
        context: String,
    },

    /// e^{x^2} erfc(x) exceeds the floating range (large negative x).
    #[error("erfcx overflow for x = {0}")]
    Overflow(f64),

    /// Covariance matrix is not positive-definite.
    #[error("covariance matrix is singular or indefinite")]
    SingularCovariance,

    /// The queried point is not in a stable sliding region
    /// (requires a_L(y) > 0 and a_R(y) > 0).
    #[error("not a stable sliding region: {0}")]
    NotStableSliding(String),

    /// A deterministic sliding orbit exited the stable sliding region.
    #[error("orbit left the stable sliding region near t = {exit_time}")]
    LeftSlidingRegion { exit_time: f64 },

    /// The x-noise is correlated with the y-noise (beta != 0); the parallel
    /// short-time density is only available for independent noise.
    #[error("noise independence violated: ||beta|| = {0}")]
    IndependenceViolated(f64),

    /// b_L = b_R, so the occupation time does not move y; the density
    /// degenerates to a pure Gaussian.
    #[error("degenerate parallel direction: b_L = b_R")]
    DegenerateDirection,

    /// A state left the floating range.
    #[error("non-finite state encountered: {0}")]
    NonFinite(String),

    /// Two density grids have disjoint supports.
    #[error("grids have disjoint supports")]
    MismatchedGrids,

    /// Histogram range is empty or degenerate.
    #[error("empty or degenerate histogram range")]
    EmptyRange,
}
