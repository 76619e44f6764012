pub mod constants;
pub mod error;
pub mod geometry;
pub mod kdtree;
pub mod matching;
pub mod quadrature;
pub mod rng;
pub mod simulation;
pub mod special;
pub mod voronoi_mc;

pub use error::{Error, Result};
