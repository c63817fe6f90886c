//! Permutation-invariant pooling encoders and the constructive side of the
//! Borsuk-Ulam latent-dimension lower bound for Deep Sets and k-ary Janossy
//! pooling.
//!
//! The crate builds the sphere covering, obstruction sets and separating
//! target used by the argument, checks the finite-difference rigidity of
//! indexed Janossy maps, searches for antipodal latent collisions of concrete
//! encoders, and turns each collision into a certificate that the encoder
//! cannot approximate the target to sup-error below one half.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod architectures;
pub mod bounds;
pub mod collision;
pub mod constructions;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod numerics;
pub mod rigidity;
pub mod seed;

pub use error::{Error, Result};
