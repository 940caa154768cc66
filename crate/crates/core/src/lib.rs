pub mod cli;
pub mod ctvol;
pub mod error;
pub mod eval;
pub mod kv;
pub mod network;
pub mod phantom;
pub mod removal;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
