//! Heights and saturation levels of multiplicative-cascade occupancy trees.
//!
//! `n` balls are thrown into nested boxes whose masses come from a random
//! multiplicative cascade. The height `H_{n,j}` is the first generation where
//! every box holds fewer than `j` balls; the saturation level `G_{n,j}` is the
//! first generation where some box does. Both grow like a constant times
//! `ln n`, and the constants are read off the Laplace transform of the
//! splitting law:
//!
//! * [`laws`]: splitting laws and their Laplace profiles
//! * [`constants`]: critical exponents, `C_j`, `C*`, `C₋`
//! * [`cascade`]: lazy deterministic environment, ball placement, measurements
//! * [`experiments`]: replica harness, slope regressions, spacing experiment
//!
//! ```
//! use cascade_core::{constants, laws::SplittingLaw};
//!
//! let profile = SplittingLaw::UniformStick.closed_form().unwrap();
//! let c = constants::critical_constants(&profile, &Default::default()).unwrap();
//! assert!((c.c_upper - 4.31107).abs() < 1e-4);
//! ```

pub mod cascade;
pub mod constants;
pub mod error;
pub mod experiments;
pub mod laws;
pub mod poisson;
pub mod rng;
pub mod stats;

pub use cascade::{BallMode, Budget, CascadeEnvironment, OccupancyState};
pub use constants::{CriticalConstants, Hypothesis, Threshold};
pub use error::{Error, Result};
pub use laws::{LaplaceProfile, SplittingLaw};
