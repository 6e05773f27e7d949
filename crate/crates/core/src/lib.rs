pub mod conductivity;
pub mod config;
pub mod error;
pub mod excitation;
pub mod export;
pub mod forward;
pub mod measurement;
pub mod mesh;
pub mod models;
pub mod objective;
pub mod optimizer;
pub mod pipeline;
pub mod sampling;
mod textio;

pub use error::{Error, Result};
