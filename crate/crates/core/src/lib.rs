pub mod algebra;
pub mod channels;
pub mod entropy;
pub mod error;
pub mod harness;
pub mod hermlin;
pub mod qforms;
pub mod sampling;

pub use error::{Error, Result};
