//! Self-supervised parallel sentence mining from comparable corpora.
//!
//! A small sentence encoder is trained online on the sentence pairs it
//! extracts itself. Two sentence representations are kept per sentence: the
//! sum of word embeddings (`cw`) and the sum of context-window encoder states
//! (`ch`). A pair is accepted only when it is the mutual top-scoring match
//! under the ratio margin for both representations, with no threshold.
//!
//! Around the mining loop sit the tools needed to study what gets selected:
//! synthetic comparable corpora with ground truth ([`synthcorp`]),
//! precision/recall over epochs ([`evalx`]) and the curriculum measures
//! (similarity, Gunning Fog, homograph ratio, n-gram perplexity, Pearson
//! correlations) in [`curriculum`].

pub mod cli;
pub mod config;
pub mod curriculum;
pub mod embeddings;
pub mod encoder;
pub mod error;
pub mod evalx;
pub mod miner;
pub mod pipeline;
pub mod synthcorp;
pub mod textprep;
pub mod toy;
mod util;

pub use embeddings::EmbeddingTable;
pub use encoder::{EncoderHyper, EncoderModel, SentenceRepr};
pub use error::{Error, Result};
pub use miner::{CandidatePair, MinerConfig, MiningLog};
pub use textprep::{BpeModel, ComparableCorpus, Document, Sentence};
