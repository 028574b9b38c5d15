//! Inverse design of growth fields for thin incompressible hyperelastic
//! shells: given a reference midsurface and a target midsurface, compute
//! the through-thickness growth tensor field that morphs one into the
//! other without residual stress, and verify the stress-free conditions
//! numerically.
//!
//! The crate is organised around the steps of that scheme:
//!
//! - [`surface`] — pointwise differential geometry of parametric surfaces;
//! - [`net`] — reparametrization of the target so coordinate curves become
//!   an orthogonal net of curvature lines (closed-form or traced);
//! - [`growth`] — assembly of the growth tensor field, directly when the
//!   target is already curvature-line parametrized and through an
//!   intermediate configuration otherwise;
//! - [`stressfree`] — reconstruction of the 3D kinematics and residual
//!   checks certifying the field is stress-free, including the
//!   incompressible neo-Hookean stress expansion;
//! - [`catalog`] — built-in reference/target pairs with closed-form growth
//!   oracles, used by the test and acceptance suites;
//! - [`expr`] — a small expression language for defining surfaces in
//!   configuration files;
//! - [`cli`], [`config`], [`io`] — the command-line driver and its file
//!   formats.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod catalog;
pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod growth;
pub mod io;
pub mod jet;
pub mod linalg;
pub mod net;
pub mod ode;
pub mod stressfree;
pub mod surface;

pub use error::{Error, Result};
