//! Offline constrained reinforcement learning on tabular CMDPs with
//! sparsity-aware cost penalties.
//!
//! The pipeline: generate or load a [`cmdp::TabularCmdp`], sample a
//! [`datagen::Dataset`], estimate a model, inflate costs where data is
//! sparse ([`sparsity`]), solve for a reweighting of the data distribution
//! ([`dice`]) and score the resulting policy on the true model
//! ([`harness`]).
//!
//! ```
//! use spdice::datagen::*;
//! use spdice::dice::{solve_coptidice, SolverConfig};
//!
//! let cmdp = generate_random_cmdp(3, &RandomCmdpConfig { n_states: 8, n_actions: 2, connectivity: 2, ..Default::default() })?;
//! let data = sample_dataset(&cmdp, &make_behavior_policy(&cmdp, 0.5)?, 30, 20, 0)?;
//! let model = mle_estimate(&data)?;
//! let (r, c) = empirical_reward_cost(&data);
//! let sol = solve_coptidice(&model, &r, &c, cmdp.p0(), cmdp.gamma(), cmdp.cost_threshold(), &SolverConfig::default())?;
//! assert!(sol.est_cost <= cmdp.cost_threshold() + 1e-5);
//! # Ok::<(), spdice::error::Error>(())
//! ```

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cmdp;
pub mod datagen;
pub mod dice;
pub mod error;
pub mod format;
pub mod harness;
pub mod rng;
pub mod sparsity;
pub mod table;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/intro.md")]
mod book_intro {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cmdp.md")]
mod book_cmdp {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/datasets.md")]
mod book_datasets {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/sparsity.md")]
mod book_sparsity {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/solver.md")]
mod book_solver {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/experiments.md")]
mod book_experiments {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
