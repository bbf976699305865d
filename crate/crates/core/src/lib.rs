//! Downlink CSI sensing for Type-I feedback users.
//!
//! The crate simulates a base station that learns a target user's channel
//! from low-resolution Type-I PMI/CQI feedback. The channel is parameterised
//! in a low-dimensional subspace learned from nearby reference users, the
//! training precoders are hybrid (subspace projection times Gaussian), and the
//! PMI argmax is turned into quadratic inequality constraints of a phase
//! retrieval problem.
//!
//! Module map:
//!
//! * [`channel`]: array responses, multipath channels, spatially consistent
//!   scenarios and the CSI interchange file.
//! * [`codebook`]: Type-I codebook, Type-II surrogate, PMI/CQI selection and
//!   CQI quantization.
//! * [`basis`]: truncated-SVD bases and the delay-domain transform.
//! * [`precoder`]: hybrid and Gaussian training precoders.
//! * [`feedback`]: UE-side simulation and solver instance assembly.
//! * [`solvers`]: MM baseline, PD-EVD, MECS construction, SGDA.
//! * [`metrics`]: correlation and NMSE with phase alignment.
//! * [`harness`]: Monte-Carlo experiment driver and report tooling.

pub mod basis;
pub mod channel;
pub mod codebook;
mod error;
pub mod feedback;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod precoder;
pub mod solvers;

pub use error::{Result, SenseError};

/// Complex scalar used throughout the crate.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
