//! Normalized Ricci flow of rotationally symmetric asymptotically hyperbolic
//! metrics on the n-ball: flow integration in both the ungauged and the
//! DeTurck-gauged form, gauge recovery and interval chaining, spectral
//! certification of the linearized operator, and scripted experiments with
//! machine-readable reports.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod fd;
pub mod fit;
pub mod flow;
pub mod geometry;
pub mod interp;
pub mod io;
pub mod oracle;
pub mod spectral;
pub mod util;

pub use error::{Error, Result};
