//! Multi-scene surveillance activity modelling.
//!
//! Each scene is described by a bag of quantized motion words per clip and
//! modelled with a per-scene LDA topic model. Scenes are aligned by a closed
//! form similarity transform, related to each other by counting corresponding
//! topics, and grouped with self-tuning spectral clustering. Inside each scene
//! cluster the aligned local topics are merged into a shared topic basis which
//! supports cross-scene query by example, cross-scene classification and
//! multi-scene k-center summarization.
//!
//! The crate is `no_std` and only needs `alloc`; file formats, the pipeline
//! runner and the command line tool live in the `scenemesh` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod alignment;
pub mod clustering;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod linalg;
pub mod math;
pub mod relatedness;
pub mod synth;
pub mod tasks;
pub mod topic_model;

pub use alignment::{NormalizationStats, SceneTransform};
pub use clustering::{SceneClustering, SharedTopicBasis};
pub use corpus::{BehaviorLabel, CategoryId, ClipDocument, GridSpec, SceneCorpus, VisualWord};
pub use error::{Error, Result};
pub use relatedness::{AffinityMatrix, SceneModel};
pub use topic_model::{ClipTopicProfile, DirichletPrior, LdaConfig, TopicMatrix};
