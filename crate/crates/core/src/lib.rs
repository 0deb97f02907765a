pub mod analysis;
pub mod assembly;
pub mod error;
pub mod experiments;
pub mod mandel;
pub mod manufactured;
pub mod mesh;
pub mod params;
pub mod ref_elements;
pub mod solver;
pub mod spaces;
pub mod sparse;

pub use error::{Error, Result};
