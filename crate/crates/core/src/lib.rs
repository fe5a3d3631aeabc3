pub mod bridge;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod interp;
pub mod kendall;
pub mod mvn;
pub mod optim;
pub mod par;
pub mod synth;

pub use error::{Error, Result};
