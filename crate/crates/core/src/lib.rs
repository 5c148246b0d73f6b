// NaN-rejecting `!(x > 0.0)` guards and index loops over paired matrices are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod calibration;
pub mod cli;
pub mod error;
pub mod enet;
pub mod exec;
pub mod filter;
pub mod knockoff;
pub mod recycling;
pub mod seeds;
pub mod simgen;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Exec;
