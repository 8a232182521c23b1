//! Multiple-description quantization by sequential dithered quantization.
//!
//! The crate computes the quadratic Gaussian two-description rate region in
//! closed form, wires dithered lattice quantizers into the codecs that reach
//! every point of its dominant face, measures those codecs by Monte Carlo,
//! and analyzes the undithered scalar version through its exact cell
//! geometry.
//!
//! Modules, bottom-up: [`lattice`], [`gs`], [`region`], [`codec`],
//! [`geometry`], [`harness`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codec;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod gs;
pub mod harness;
pub mod lattice;
pub mod region;

pub use error::{MdqError, Result};
