pub mod canvas;
pub mod conditioning;
pub mod error;
pub mod generator;
pub mod geom;
pub mod pipeline;
pub mod scheduler;
pub mod service;

pub use error::{Error, Result};
