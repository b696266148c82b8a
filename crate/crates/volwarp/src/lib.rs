//! File formats, threaded execution and the `volwarp` command line on top of
//! [`volwarp_core`].

pub mod cli;
pub mod error;
pub mod exec;
pub mod json;
pub mod raster;
pub mod volt;

pub use error::{Error, Result};
pub use exec::Threads;
pub use volt::{Kind, Tensor};
