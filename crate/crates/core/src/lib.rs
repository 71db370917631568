//! Tooling for adapting Chinese literary classics into child-friendly text.
//!
//! The crate is organised around the pipeline it supports:
//!
//! * [`text`] segments sentences, tags adverbs/conjunctions with a pluggable
//!   tagger and computes the raw readability indicators.
//! * [`readability`] turns those indicators into the Red-CN score and exposes
//!   the guidance function used while decoding.
//! * [`lm`] defines the [`LanguageModel`](lm::LanguageModel) interface and a
//!   reference character n-gram model, plus top-p sampling and generation.
//! * [`decoding`] implements readability-guided lookahead decoding.
//! * [`preference`] builds preference pairs for DPO-style trainers.
//! * [`instruction`] holds character profiles, narrative triplets, the
//!   instruction template, response parsers and the annotation client.
//! * [`corpus`] loads, validates and splits paired datasets.
//! * [`evaluation`] computes BLEU, corpus Red-CN and Pearson correlation.
//! * [`sweep`] runs one-factor-at-a-time decoding hyperparameter sweeps.
//!
//! ```
//! use childadapt::readability::{ReadabilityConfig, RedCnScore};
//!
//! let cfg = ReadabilityConfig::default();
//! let score = RedCnScore::from_components(0.5, 1.0, 0.4, &cfg);
//! assert!((score.total - 67.0).abs() < 1e-9);
//! ```

pub mod corpus;
pub mod decoding;
pub mod evaluation;
pub mod instruction;
pub mod lm;
pub mod preference;
pub mod readability;
pub mod resources;
pub mod rng;
pub mod sweep;
pub mod text;

// The guide under book/ is compiled as doc-tests so its snippets cannot rot.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/readability.md")]
    pub mod readability {}
    #[doc = include_str!("../../../book/src/language_models.md")]
    pub mod language_models {}
    #[doc = include_str!("../../../book/src/lookahead.md")]
    pub mod lookahead {}
    #[doc = include_str!("../../../book/src/preference.md")]
    pub mod preference {}
    #[doc = include_str!("../../../book/src/instruction.md")]
    pub mod instruction {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    pub mod evaluation {}
}
