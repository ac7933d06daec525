//! File formats, pipeline commands and the command-line interface for
//! rhotic classification experiments.

pub mod analyze;
pub mod cli;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod extract;
pub mod io;
pub mod manifest;
pub mod parallel;
pub mod synth;
pub mod train;

pub use error::{MdxError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
