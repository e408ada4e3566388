pub mod analysis;
pub mod commands;
pub mod error;
pub mod eval;
pub mod objectives;
pub mod policy;
pub mod seed;
pub mod store;
pub mod tasks;
pub mod template;
pub mod trainer;
pub mod warmstart;

pub use error::{Error, Result};
