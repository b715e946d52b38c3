//! Region-of-safety verification for wind-turbine frequency support.
//!
//! The crate is organised bottom-up: [`polyalg`] provides polynomials,
//! [`sdp`] a primal-dual interior-point solver, [`sos`] compiles
//! sum-of-squares programs into SDPs, [`barrier`] computes barrier
//! certificates and regions of safety, [`plant`] builds the wind-turbine and
//! frequency-response models, and [`hybrid`] simulates the switched system
//! and synthesizes safe switching instants. [`study`] ties everything
//! together into the full case study.

pub mod barrier;
pub mod hybrid;
pub mod linalg;
pub mod plant;
pub mod polyalg;
pub mod sdp;
pub mod sos;
pub mod study;
