//! File formats, corpus loading and command implementations around
//! `obf-core`.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod corpus;
pub mod error;
pub mod kv;
pub mod manifest;
pub mod recording;
pub mod store;
pub mod trainlog;

pub use error::{ObfError, Result};
pub use obf_core as core;
