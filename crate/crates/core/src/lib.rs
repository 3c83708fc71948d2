//! Building blocks for semi-synthetic parallel datasets used to train
//! sentence-level translation quality estimation (QE) models.
//!
//! The pipeline atom is [`corpus::ScoredSegment`]: a source/target pair with a
//! 0–5 quality score and its provenance. Everything else either produces
//! segments ([`ingestion`], [`consensus`]), derives new segments from existing
//! ones ([`morph`], [`perturbation`]), selects subsets ([`sampler`]) or measures
//! them ([`bleu`], [`evaluation`]).

pub mod bleu;
pub mod consensus;
pub mod corpus;
pub mod evaluation;
pub mod fixture;
pub mod ingestion;
pub mod morph;
pub mod perturbation;
pub mod sampler;
pub mod seed;
pub mod text;

pub use corpus::{DatasetManifest, Origin, QualityScore, ScoredSegment, SegmentId};
