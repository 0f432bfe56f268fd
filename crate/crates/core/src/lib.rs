//! Toolkit for turning congressional hearing transcripts into
//! speaker-attributed utterances and question/answer pairs, extracting
//! interpretable linguistic features from them, and running party
//! affiliation / standing experiments over the result.
//!
//! The crate is organised bottom-up:
//!
//! * [`corpus`] holds the shared domain types and the on-disk corpus store.
//! * [`segment`] trims transcript boilerplate, finds speaker markers and
//!   resolves them against a hearing roster; [`segment::fetch`] is the optional
//!   network client that feeds it.
//! * [`qa`] trains and applies the lexical question/answer classifier and
//!   pairs member questions with witness answers.
//! * [`features`] computes the per-utterance feature vector.
//! * [`stats`] runs two-sample Kolmogorov-Smirnov comparisons between
//!   party / standing groups.
//! * [`models`] holds the random forest, logistic regression, baselines and
//!   cross-validation used for party prediction.
//! * [`experiment`] builds split-wise datasets, runs models against
//!   majority baselines and writes result tables and prompts.
//! * [`synth`] generates synthetic hearings with known ground truth for
//!   tests and fixtures.

pub mod corpus;
pub mod error;
pub mod experiment;
pub mod features;
pub mod logit;
pub mod models;
pub mod qa;
pub mod rng;
pub mod segment;
pub mod stats;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
