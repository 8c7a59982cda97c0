pub mod cases;
pub mod config;
pub mod design;
pub mod error;
pub mod estimator;
pub mod experiment;
pub mod linalg;
pub mod output;
pub mod partition;
pub mod poly;
pub mod system;
pub mod tracker;
pub mod uio;
pub mod unit_circle;
pub mod zeros;

pub use error::{Error, Result};
