//! Numerical laboratory for Perelman's W-functional on the space of metrics
//! of a flat torus, the geometry of that space, and Kahler structures carried
//! along metric curves.
//!
//! All fields are sampled on a uniform periodic lattice and differentiated
//! spectrally; see [`grid`].

pub mod error;
pub mod geometry;
pub mod grid;
pub mod kahler;
pub mod samples;
pub mod space_of_metrics;
pub mod tensor;
pub mod variations;

pub use error::{Error, Result};
