//! Dense numeric kernels shared by the rest of the crate: small MLPs with
//! exact reverse-mode gradients, first-order optimizers, a central
//! finite-difference checker and Gaussian elimination for nullspaces.

mod array;
mod fd;
mod linalg;
mod mlp;
mod optim;

pub use array::DenseArray;
pub use fd::finite_difference_gradient;
pub use linalg::{nullspace, Matrix};
pub use mlp::{Activation, Layer, Mlp, MlpGradient};
pub use optim::{Method, OptimizerState};

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared Euclidean distance.
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
