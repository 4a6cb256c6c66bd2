//! Leveled homomorphic inference for small quantized convolutional networks.
//!
//! The crate is layered bottom-up: [`ring`] implements the negacyclic
//! polynomial ring, [`fv`] the FV encryption scheme over it, [`encode`] the
//! fixed-point integer encoder, [`approx`] and [`compress`] prepare
//! power-of-two activations and weights, and [`engine`] evaluates networks in
//! the clear or under encryption while counting homomorphic operations.
//! [`io`] and [`protocol`] define the file and wire formats.

pub mod approx;
pub mod compress;
pub mod encode;
pub mod engine;
pub mod error;
pub mod fv;
pub mod io;
pub mod protocol;
pub mod ring;

pub use error::{Error, Result};
