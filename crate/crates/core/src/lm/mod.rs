//! Language-model interface, reference n-gram model, sampling and generation.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod ngram;
mod sampling;

pub use ngram::NgramModel;
pub use sampling::{nucleus, sample_top_p, SamplingConfig};

use crate::rng;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("smoothing constant must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("text to score is empty")]
    EmptyText,
    #[error("invalid sampling config: {0}")]
    InvalidSampling(String),
    #[error("model file line {line}: {message}")]
    ModelFormat { line: usize, message: String },
    #[error("model file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

pub const EOS_FORM: &str = "</s>";
pub const BOS_FORM: &str = "<s>";

/// Ordered token inventory. Id 0 is EOS and id 1 is BOS; the remaining ids
/// are ordinary tokens in the order given at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    forms: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub const EOS: TokenId = TokenId(0);
    pub const BOS: TokenId = TokenId(1);

    /// Builds a vocabulary from ordinary token forms; duplicates and the
    /// reserved forms are ignored.
    pub fn new<I, S>(forms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocabulary {
            forms: Vec::new(),
            index: HashMap::new(),
        };
        for form in [EOS_FORM.to_string(), BOS_FORM.to_string()]
            .into_iter()
            .chain(forms.into_iter().map(Into::into))
        {
            if !vocab.index.contains_key(&form) {
                let id = TokenId(vocab.forms.len() as u32);
                vocab.index.insert(form.clone(), id);
                vocab.forms.push(form);
            }
        }
        vocab
    }

    /// Character vocabulary sorted by code point.
    pub fn from_chars<I: IntoIterator<Item = char>>(chars: I) -> Self {
        let mut chars: Vec<char> = chars.into_iter().collect();
        chars.sort_unstable();
        chars.dedup();
        Self::new(chars.into_iter().map(String::from))
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn id(&self, form: &str) -> Option<TokenId> {
        self.index.get(form).copied()
    }

    pub fn form(&self, id: TokenId) -> &str {
        &self.forms[id.index()]
    }

    pub fn ids(&self) -> impl Iterator<Item = TokenId> {
        (0..self.forms.len() as u32).map(TokenId)
    }

    pub fn is_special(id: TokenId) -> bool {
        id == Self::EOS || id == Self::BOS
    }

    /// Character-level encoding. Characters outside the vocabulary are
    /// dropped, so the result is always a valid context.
    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        let mut buf = [0u8; 4];
        text.chars().filter_map(|c| self.id(c.encode_utf8(&mut buf))).collect()
    }

    /// Concatenates token forms, skipping BOS/EOS.
    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .filter(|&&id| !Self::is_special(id))
            .map(|&id| self.form(id))
            .collect()
    }
}

/// Next-token distribution provider over a fixed vocabulary.
///
/// `next_token_logprobs` must return exactly `vocab().len()` natural-log
/// probabilities whose exponentials sum to 1, and must be deterministic and
/// safe to call concurrently.
pub trait LanguageModel: Send + Sync {
    fn vocab(&self) -> &Vocabulary;

    fn next_token_logprobs(&self, context: &[TokenId]) -> Vec<f64>;

    /// Most probable next token, ties broken by smaller id.
    fn greedy_next(&self, context: &[TokenId]) -> TokenId {
        argmax(&self.next_token_logprobs(context))
    }
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(values: &[f64]) -> TokenId {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    TokenId(best as u32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy {
    Greedy,
    TopP(SamplingConfig),
}

/// Extends `prompt` until EOS (inclusive) or until the whole sequence is
/// `max_len` tokens long, returning only the continuation.
///
/// Top-p generation draws from a stream seeded by the config's seed.
pub fn generate<M: LanguageModel + ?Sized>(
    model: &M,
    prompt: &[TokenId],
    max_len: usize,
    strategy: &Strategy,
) -> Vec<TokenId> {
    let mut seq = prompt.to_vec();
    let mut rng = match strategy {
        Strategy::TopP(cfg) => Some(rng::stream(cfg.seed)),
        Strategy::Greedy => None,
    };
    while seq.len() < max_len {
        let next = match (strategy, rng.as_mut()) {
            (Strategy::TopP(cfg), Some(rng)) => sample_top_p(model, &seq, cfg, rng),
            _ => model.greedy_next(&seq),
        };
        seq.push(next);
        if next == Vocabulary::EOS {
            break;
        }
    }
    seq.split_off(prompt.len())
}

/// exp of the mean negative log-probability of `text`, each token conditioned
/// on the tokens before it.
pub fn perplexity<M: LanguageModel + ?Sized>(model: &M, text: &[TokenId]) -> Result<f64, LmError> {
    if text.is_empty() {
        return Err(LmError::EmptyText);
    }
    let nll: f64 = (0..text.len())
        .map(|i| -model.next_token_logprobs(&text[..i])[text[i].index()])
        .sum();
    Ok((nll / text.len() as f64).exp())
}
