#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

//! Mean-field dynamics of a driven spin-1 condensate: integration, Lyapunov
//! exponents, phase-space coverage, ensemble randomization and rotating-frame
//! analysis, plus declarative parameter scans.

pub mod bessel;
pub mod config;
pub mod coverage;
pub mod dynamics;
pub mod eigen;
pub mod ensemble;
pub mod error;
pub mod haar;
pub mod lyapunov;
pub mod params;
pub mod output;
pub mod phase_eom;
pub mod rotating;
pub mod scan;
pub mod spin;
pub mod validate;

pub use error::{Error, Result};
