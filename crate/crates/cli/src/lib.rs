//! Command-line front end tying scan registration, costmap construction, and
//! incremental planning into one reproducible pipeline.

pub mod config;
pub mod io;
pub mod pipeline;
