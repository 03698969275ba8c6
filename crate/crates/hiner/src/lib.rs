//! Implicit neural compression of hyperspectral cubes.
//!
//! A cube is stored as the weights of a small network that maps a normalized
//! wavelength to the image of that band. [`codec`] defines the network,
//! [`training`] fits it, [`bitstream`] quantizes and entropy-codes it, and
//! [`downstream`] trains a pixel classifier directly on decoded cubes.

pub mod bitstream;
pub mod codec;
pub mod downstream;
pub mod error;
pub mod hsi_io;
pub mod nn;
pub mod training;

pub use codec::{ArchSpec, EmbedShape, HinerModel};
pub use error::{Error, Result};
pub use hsi_io::{HsiCube, LabelMap, WavelengthGrid};
