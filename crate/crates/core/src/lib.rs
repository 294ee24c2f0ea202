//! Two-tier remote patient monitoring as a controlled Markov chain.
//!
//! A patient's health level `h ∈ {0, …, H}` moves up or down each period
//! with a probability that depends on the monitoring tier (ordinary or
//! intensive) chosen by the service. Level `0` is critical and ends the
//! process at cost `C_c`. This crate computes optimal discounted-cost
//! monitoring policies, evaluates the large-`H` closed forms, simulates the
//! chain, and runs parameter sweeps over the optimal policy structure.
//!
//! ```
//! use rpm_core::{model, policy::PolicyClass, solver};
//!
//! let p = model::simplified_preset(0.2, 0.3, 1.0, 60.0, 0.9, 6).unwrap();
//! let r = solver::solve(&p).unwrap();
//! assert_eq!(r.policy.classify(), PolicyClass::Threshold { h_bar: 3 });
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod bench;
pub mod cli;
pub mod model;
pub mod policy;
pub mod sim;
pub mod solver;

pub use model::{Action, ModelParams, State, Tier};
pub use policy::{Policy, PolicyClass};
pub use solver::{SolveResult, ValueFunction};
