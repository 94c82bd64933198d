//! Discrete Korn-type rigidity seminorms for objective structures: orbits
//! `G·x0` of discrete groups of Euclidean isometries.

pub mod catalog;
pub mod cli;
pub mod error;
pub mod euclid;
pub mod fields;
pub mod fourier;
pub mod group;
pub mod korn;
pub mod seminorms;

pub use error::{Error, Result};
