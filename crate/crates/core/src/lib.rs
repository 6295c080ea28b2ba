//! Perturbed Hammerstein formulations of impulsive boundary value problems
//! with Stieltjes boundary conditions
//!
//! ```text
//! u″(t) + g(t) f(t, u(t)) = 0,  t ∈ (0,1) \ {τᵢ}
//! Δu|τᵢ = Iᵢ(u(τᵢ)),  Δu′|τᵢ = Iᵢ(u(τᵢ))/(τᵢ − 1)
//! u(0) = α[u] = A₀ + ∫ u dA,  u(1) = 0
//! ```
//!
//! The crate computes the constants entering cone-theoretic existence
//! conditions, checks those conditions, and computes positive solutions with
//! a Nyström solver and an independent shooting solver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod conditions;
pub mod constants;
pub mod error;
pub mod expr;
pub mod kernel;
pub mod measure;
pub mod operator;
pub mod pcfun;
pub mod quad;
pub mod shoot;
pub mod solver;

pub use error::{Error, Result};
pub use operator::ProblemSpec;
pub use pcfun::PCFunction;
