//! Optimal control of continuous-time Markov chains whose transition rates,
//! costs and decisions depend on the time spent in the current state.
//!
//! The solvers go through the embedded jump-to-jump semi-Markov problem:
//! [`reduction`] builds its tables, [`discounted`] and [`average`] solve it,
//! and [`sim`] estimates the same criteria by simulating the original chain.

// `!(x > 0.0)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod model;
pub mod policy;
pub mod reduction;
pub mod discounted;
pub mod average;
pub mod sim;
pub mod export;

pub use error::{Error, Result};
pub use grid::{AgeGrid, DecisionCells};
pub use model::{ActionDistribution, ModelFile, TransitionRateModel};
pub use policy::AgePolicy;
pub use reduction::Discretization;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/model.md")]
    struct Model;
    #[doc = include_str!("../../../book/src/reduction.md")]
    struct Reduction;
    #[doc = include_str!("../../../book/src/discounted.md")]
    struct Discounted;
    #[doc = include_str!("../../../book/src/average.md")]
    struct Average;
    #[doc = include_str!("../../../book/src/simulation.md")]
    struct Simulation;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
