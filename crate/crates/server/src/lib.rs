//! HTTP service and command-line tools around the crowd labeling core.

pub mod api;
pub mod cli;
pub mod config;
pub mod store;
