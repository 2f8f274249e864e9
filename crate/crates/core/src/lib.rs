//! Skill-based reinforcement learning with decision-tree policies.
//!
//! The pipeline has five stages, each building on the previous one:
//!
//! 1. [`env`] — a small sequential-reach environment with sparse ordered
//!    rewards, plus a scripted demonstrator that produces an offline,
//!    task-agnostic trajectory dataset.
//! 2. [`skills`] — a vector-quantized skill model learned from that
//!    dataset: an encoder maps fixed-length state-action segments to one
//!    of `K` codebook embeddings, a decoder replays them as low-level
//!    actions, and a soft-tree prior predicts the code from the segment's
//!    first state.
//! 3. [`rl`] — an actor-critic over the discrete skill space. The
//!    high-level policy is a soft decision tree initialized from the
//!    prior and regularized toward it by an auto-tuned KL penalty; the
//!    codebook is finetuned through the actor objective.
//! 4. [`distill`] — the trained soft policy is sampled greedily and
//!    compressed into a small axis-aligned hard decision tree.
//! 5. [`explain`] — tree renderings, per-skill ablation matrices, and
//!    per-episode skill traces.
//!
//! [`autodiff`] provides the reverse-mode gradient machinery used by
//! stages 2 and 3, [`sdt`] the soft decision tree used as policy and
//! prior, and [`checkpoint`]/[`config`] the persistence and
//! configuration surface shared by the CLI.

pub mod autodiff;
pub mod checkpoint;
pub mod config;
pub mod distill;
pub mod env;
pub mod error;
pub mod explain;
pub mod rl;
pub mod sdt;
pub mod skills;

pub use error::{Error, Result};
