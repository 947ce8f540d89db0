//! Numerical toolkit for Hardy spaces attached to semigroups on
//! Euclidean domains: kernels, quadrature, Riesz transforms, atomic
//! decompositions and checks of the kernel assumptions on coverings.

pub mod error;
pub mod geometry;
pub mod hardy;
pub mod kernels;
pub mod quadrature;
pub mod special;
pub mod transforms;
pub mod verifier;

pub use error::{Error, Result};
