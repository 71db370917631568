//! Character personality profiles, narrative triplets and the integrative
//! instruction that conditions adaptation, plus parsers for annotation
//! responses and an annotation client with offline fixture replay.

use std::fmt;

use thiserror::Error;

mod annotate;
mod parse;
mod profile;
mod template;

pub use annotate::{
    annotate, annotate_batch, fixture_key, write_fixture, Annotation, AnnotationClient, AnnotationRequest, Backend,
    RetryPolicy, DEFAULT_MODEL,
};
pub use parse::{parse_personality_response, parse_triplet_response, render_personality_response, BadGroup};
pub use profile::{
    description_units, load_profiles, load_triplets, match_characters, parse_profiles, parse_triplets, save_triplets,
    BigFive, CharacterProfile, RecordTriplets, TraitScore, Traits, Triplet, MAX_DESCRIPTION_UNITS,
};
pub use template::{
    assemble_instruction, parse_instruction, personality_prompt, record_instruction, render_triplets, triplet_prompt,
    Instruction, ParsedInstruction, EMPTY_MARKER, PREAMBLE,
};

#[derive(Debug, Error)]
pub enum InstructionError {
    #[error("original text is empty")]
    EmptyOriginal,
    #[error("profile {name:?} does not occur in the original text")]
    ProfileNotInOriginal { name: String },
    #[error("invalid profile {name:?}: {message}")]
    InvalidProfile { name: String, message: String },
    #[error("invalid triplet: {0}")]
    InvalidTriplet(String),
    #[error("malformed response: {0}")]
    MalformedResponse(Malformed),
    #[error("malformed instruction: {0}")]
    MalformedInstruction(String),
    #[error("annotation service unavailable after {attempts} attempt(s): {last_error}")]
    ServiceUnavailable { attempts: u32, last_error: String },
    #[error("annotation service rejected the request with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("no fixture for this request at {path}")]
    FixtureMissing { path: String },
    #[error("invalid annotation payload: {0}")]
    InvalidPayload(String),
    #[error("annotation not configured: {0}")]
    NotConfigured(String),
    #[error("{path}: {message}")]
    Json { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Structured detail of a response that could not be parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Malformed {
    Personality {
        missing: Vec<BigFive>,
        duplicate: Vec<BigFive>,
        /// Trait and the offending score or description text.
        invalid: Vec<(BigFive, String)>,
    },
    Triplets {
        groups: Vec<BadGroup>,
    },
}

impl fmt::Display for Malformed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Malformed::Personality {
                missing,
                duplicate,
                invalid,
            } => {
                let mut parts = Vec::new();
                let names = |ts: &[BigFive]| ts.iter().map(|t| t.key()).collect::<Vec<_>>().join(", ");
                if !missing.is_empty() {
                    parts.push(format!("missing: {}", names(missing)));
                }
                if !duplicate.is_empty() {
                    parts.push(format!("duplicate: {}", names(duplicate)));
                }
                for (t, v) in invalid {
                    parts.push(format!("{}: invalid value {v:?}", t.key()));
                }
                f.write_str(&parts.join("; "))
            }
            Malformed::Triplets { groups } => {
                let parts: Vec<String> = groups
                    .iter()
                    .map(|g| format!("{:?} has {} field(s)", g.text, g.arity))
                    .collect();
                write!(f, "bad triplet group(s): {}", parts.join("; "))
            }
        }
    }
}
