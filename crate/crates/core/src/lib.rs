//! Crowd labeling of ordered three-class clips.
//!
//! The crate covers the whole pipeline of a gamified labeling platform:
//!
//! - [`model`]: labels, clips, opinions and users.
//! - [`consensus`]: expert reference standards (full panel and leave-one-out)
//!   and quality-gated crowd consensus.
//! - [`quality`]: sliding-window trailing accuracy and the skilled verdict.
//! - [`ingest`]: manifests, expert opinion files, patient-wise partitioning.
//! - [`contest`]: the concurrent contest engine with its append-only opinion
//!   log, leaderboard, prize ledger and replay.
//! - [`simulator`]: synthetic datasets, expert panels and learning crowds.
//! - [`analysis`]: concordance, opinions-needed curves, ROC, learning curves
//!   and the hypothesis tests used to compare crowd and experts.

pub mod analysis;
pub mod consensus;
pub mod contest;
pub mod ingest;
pub mod model;
pub mod quality;
pub mod rng;
pub mod simulator;

pub use model::{ClassLabel, Clip, ClipRole, Opinion, User, UserKind, VoteCounts};
