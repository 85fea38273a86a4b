//! CMAX: interleaved real-time planning and execution with an inaccurate
//! dynamics model.
//!
//! Instead of repairing the model when the real world disagrees with it, the
//! planner inflates the cost of every state-action pair discovered to be
//! incorrect and replans around them. The model's dynamics are never touched.
//!
//! The crate is organized around the pieces of that loop:
//!
//! - [`core`]: state/action types, the environment and planning-model
//!   contracts, and the penalized-cost transform.
//! - [`search`]: bounded best-first lookahead that returns one action plus
//!   cost-to-go updates for every expanded state.
//! - [`discrepancy`]: exact and hypersphere-cover stores of discovered
//!   incorrect transitions, backed by per-action KD-trees.
//! - [`value`]: tabular and RBF-kernel cost-to-go estimators.
//! - [`agent`]: the execution loops for small (exact) and large
//!   (function-approximated) state spaces.
//! - [`envs`]: seedable environments whose true and modeled dynamics disagree.
//! - [`baselines`]: comparison methods (model-patching search, tabular
//!   Q-learning, KNN residual dynamics).

pub mod agent;
pub mod baselines;
pub mod core;
pub mod discrepancy;
pub mod envs;
pub mod search;
pub mod spatial;
pub mod value;
