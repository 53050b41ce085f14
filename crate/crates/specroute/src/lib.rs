//! Std companion to `specroute-core`: configuration, on-disk formats,
//! latency emulation, the benchmark harness and the `specroute` CLI.

pub mod bench;
pub mod config;
pub mod io;
pub mod pipeline;
pub mod stages;
pub mod timing;
