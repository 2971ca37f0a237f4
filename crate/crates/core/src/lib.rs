//! Aspect-based sentiment mining of scientific peer reviews.
//!
//! The crate covers the whole offline pipeline: corpus ingestion and
//! segmentation, text featurization, the cold-start and entropy-batch
//! sentence selection rounds, annotation adjudication, per-aspect sentiment
//! classifiers, review/paper aggregation and the downstream analytics
//! (reviewer/chair agreement, disagreement, aspect importance).
//!
//! The HTTP annotation service lives in `revmine-server` and the command
//! line driver in `revmine-cli`.

pub mod active_learning;
pub mod aggregation;
pub mod analytics;
pub mod annotation;
pub mod clustering;
pub mod corpus;
pub mod features;
pub mod models;
pub mod report;
pub mod rng;
pub mod stats;
pub mod synth;

pub use annotation::{Aspect, LabelMap, Sentiment};
pub use corpus::{Corpus, Decision, Paper, Review, Sentence};
