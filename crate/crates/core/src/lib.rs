//! Finite-difference solver for the viscous primitive equations of large-scale
//! ocean dynamics in a box `M x (-h, 0)`, written in the pressure-eliminated
//! form: the vertical velocity is diagnosed from continuity, the pressure is a
//! vertical integral of temperature plus a surface pressure, and the surface
//! pressure is recovered by projecting the depth-averaged tendency onto
//! divergence-free fields.
//!
//! Alongside the solver the crate evaluates the a-priori energy bounds for the
//! system and monitors them along computed trajectories.

pub mod dynamics;
pub mod energetics;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod operators;
pub mod par;
pub mod pressure;
pub mod timestepper;
pub mod verification;

pub use error::{Error, Result};
pub use fields::{Forcing, ForcingProfile, Params, State};
pub use geometry::{build_domain, Domain, DomainConstants, Grid};
