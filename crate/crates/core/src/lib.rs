//! Inexact Newton iteration for generalized equations `f(p) + F(p) ∋ 0` on
//! Riemannian manifolds, together with the geometry kernel it runs on, a
//! metric-regularity laboratory on the SPD cone and a configuration-driven
//! experiment runner for the constrained Karcher mean on `S³`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod manifold;

pub use error::{Error, Result};
pub mod experiment;
pub mod geneq;
pub mod mreglab;
pub mod newton;
pub mod subsolvers;
