pub mod assignment;
pub mod crystal;
pub mod denoiser;
pub mod diffusion;
pub mod elements;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod rational;
pub mod spacegroup;
pub mod templates;
pub mod toy;

pub use crystal::{Annotation, Crystal, Site};
pub use elements::Element;
pub use error::{Error, Result};
pub use lattice::{CrystalFamily, KVector, LatticeMatrix};
