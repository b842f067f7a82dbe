pub mod annotation;
pub mod edges;
pub mod error;
pub mod evaluation;
pub mod figures;
pub mod hough;
pub mod imaging;
pub mod overlay;
pub mod pipeline;
pub mod synthgen;
pub mod threshold;

pub use error::{Error, Result};
