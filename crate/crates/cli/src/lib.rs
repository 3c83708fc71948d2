//! Stage functions and the end-to-end pipeline behind the `qeforge` binary.

pub mod config;
pub mod pipeline;
pub mod stages;
