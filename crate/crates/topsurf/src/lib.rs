// SPDX-License-Identifier: Apache-2.0

//! File formats, on-disk index, batch pipeline, CLI and HTTP service around
//! [`topsurf_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod formats;
pub mod imageio;
pub mod pipeline;
pub mod server;
pub mod store;

pub use config::EngineConfig;
pub use error::{Error, Result};
pub use store::{IndexStore, Layout};
