//! Covert stochastic optimization.
//!
//! A learner queries an incentivized stochastic oracle and interleaves a
//! learning stochastic-gradient run with an obfuscating one, so that an
//! eavesdropper watching the queries cannot tell which run is real. The
//! choice between the two runs, and the incentive paid per query, is a
//! finite-horizon MDP whose optimal policy has a monotone threshold form.
//!
//! Modules, bottom up:
//! - [`oracle`]: oracle state chain, incentive-dependent success, noisy gradients
//! - [`gradient`]: learning budget and the dual SG state
//! - [`eavesdropper`]: query labelling and the incentive-weighted belief
//! - [`mdp`]: model, backward induction, structural checks
//! - [`policy`]: threshold policies, SPSA and UCB search
//! - [`harness`]: configuration, episode simulation, benchmarks

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod eavesdropper;
pub mod error;
pub mod gradient;
pub mod harness;
pub mod mdp;
pub mod objective;
pub mod oracle;
pub mod policy;
pub mod rng;

pub use error::{Error, Result};
