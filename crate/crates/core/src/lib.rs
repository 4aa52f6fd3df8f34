//! Reference-based evaluation of generative audio models.
//!
//! The crate computes divergences between a reference embedding set and a
//! candidate set (FAD, unbiased MMD², PRDC, MAUVE and its log form MAD),
//! meta-evaluates those metrics on synthetic distortion ladders with Kendall's
//! τ-b, generates noise and MIDI degradation corpora, and analyses pairwise
//! human preferences with a Bradley-Terry model.

pub mod degrade;
pub mod error;
pub mod mauve;
pub mod metaeval;
pub mod moments;
pub mod mmd;
pub mod prdc;
pub mod prefstats;
pub mod report;
pub mod rng;
pub mod score;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use score::{DivergenceScore, Metric, Orientation};
pub use tensor::{EmbeddingSet, FrameSequence, PoolMethod, Role};
