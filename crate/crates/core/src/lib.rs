//! Joint design of digital beamforming, fronthaul quantization and analog RF
//! beamforming for the downlink of a C-RAN.
//!
//! The BBU serves `N_U` single-antenna UEs through `N_R` remote radio heads,
//! each with `M` antennas driven by `N <= M` RF chains. Digital beamformers and
//! quantization-noise covariances live at the BBU and are constrained by the
//! per-RRH fronthaul capacities; the analog beamformers are phase-shifter
//! matrices with unit-modulus entries. The optimizer alternates a WMMSE-style
//! successive convex approximation over the digital variables with a relaxed
//! update of the RF matrices followed by projection onto the unit-modulus set.
//!
//! Crate layout:
//! - [`channel`]: one-ring covariances and seeded Rayleigh channel draws
//! - [`model`]: system configuration and the exact rate/power functionals
//! - [`wmmse`]: MSE surrogate, fronthaul upper bound, closed-form tightness updates
//! - [`subsolver`]: feasible-start log-barrier maximizer for the inner convex steps
//! - [`optimizer`]: block-coordinate alternation and the modulus projection
//! - [`baselines`]: fully digital and random-RF comparison schemes
//! - [`harness`]: declarative Monte-Carlo sweeps with CSV/JSON output
//! - [`oracle`]: exhaustive grid-search references for desk-scale instances

pub mod baselines;
pub mod channel;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod oracle;
pub mod seed;
pub mod subsolver;
pub mod wmmse;

pub use error::{Error, Result};
pub use model::{DigitalDesign, ModulusState, RfDesign, SystemConfig};
pub use optimizer::{OptimizerOptions, SolveReport};

// Re-export the linear-algebra backbone so downstream crates and integration
// tests build matrices with the same types.
pub use nalgebra;
pub use num_complex::Complex64;

/// Complex matrix/vector aliases used throughout the crate.
pub type CMat = nalgebra::DMatrix<Complex64>;
/// Dynamic complex column vector.
pub type CVec = nalgebra::DVector<Complex64>;
