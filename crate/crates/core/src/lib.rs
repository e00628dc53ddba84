//! Batch re-ranking and offline evaluation for top-k recommendation with
//! provider-side visibility quotas and per-user genre calibration.
//!
//! The pipeline operates on three plain-CSV inputs — a rating history, an
//! item catalog carrying genre and continent labels, and pre-computed
//! per-user candidate rankings — and produces re-ranked top-k lists plus an
//! evaluation report. The stages are deliberately decoupled:
//!
//! 1. [`ingest`] parses and validates the input files and performs the
//!    per-user temporal train/test split.
//! 2. [`stats`] derives catalog-level continent representation and per-user
//!    genre propensity from the training history.
//! 3. [`moregin`] re-ranks candidate lists through a shared pool of
//!    (continent, genre) buckets under global continent quotas and per-user
//!    genre targets.
//! 4. [`baselines`] provides three reference re-rankers: plain score
//!    truncation, greedy genre calibration, and a visibility-only quota
//!    filler.
//! 5. [`metrics`] measures visibility deviation, genre miscalibration, and
//!    NDCG@k on any produced top-k lists.
//! 6. [`synth`] generates seeded synthetic instances for experiments and
//!    regression baselines.
//!
//! Every public function is deterministic: ordered maps throughout, explicit
//! tie-breaking on every sort, and a single seeded random generator
//! (ChaCha8) in the synthetic generator. Running the same command twice on
//! the same inputs produces byte-identical outputs.

pub mod baselines;
pub mod cli;
pub mod ingest;
pub mod metrics;
pub mod moregin;
pub mod report;
pub mod stats;
pub mod synth;
pub mod types;

mod error;

pub use error::{Error, Result};
