pub mod criteria;
pub mod error;
pub mod experiments;
pub mod fit;
pub mod numerics;
pub mod prequential;
pub mod process;

pub use error::{Error, Result};
