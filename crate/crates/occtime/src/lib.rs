//! Occupation times of Brownian motion with two-valued drift, and transitional
//! densities of stochastically perturbed sliding motion in Filippov systems.
//!
//! The scalar process at the heart of the library is
//!
//! ```text
//! dx(t) = { a_L,  x < 0       dt + dW(t),      x(0) = x0,
//!         { -a_R, x > 0
//! ```
//!
//! whose positive occupation time `tau = meas{ s in [0,t] : x(s) >= 0 }` has an
//! exact density (module [`occupation`]), a long-time asymptotic form, and two
//! classical special cases (arc-sine law, constant drift). On top of that sit
//! the short-time and long-time transitional PDFs of sliding motion for the
//! N-dimensional piecewise-smooth SDE (modules [`sliding_short`] and
//! [`sliding_long`]), plus a seeded Euler-Maruyama simulator used as the
//! verification oracle throughout ([`montecarlo`]).

pub mod error;
pub mod montecarlo;
pub mod numerics;
pub mod occupation;
pub mod sliding_long;
pub mod sliding_short;

pub use error::{Error, Result};
pub use sliding_short::DensityGrid;
