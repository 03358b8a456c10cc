//! Location-scale kernel mixture priors on functions of `[0,1]^d`: prior
//! simulation, posterior inference for regression, density estimation and
//! classification, and numerical checks of approximation and contraction
//! properties. See the guide in `book/` for a tour.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approximation;
pub mod error;
pub mod harness;
pub mod inference;
pub mod kernels;
pub mod mixture;
pub mod multi_index;
pub mod quadrature;
pub mod stats;
pub mod truths;
pub mod verification;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
pub mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/kernels.md")]
pub mod book_kernels {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/prior.md")]
pub mod book_prior {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/approximation.md")]
pub mod book_approximation {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/inference.md")]
pub mod book_inference {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/verification.md")]
pub mod book_verification {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub mod book_cli {}
