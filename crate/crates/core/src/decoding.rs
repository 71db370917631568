//! Readability-guided lookahead decoding.
//!
//! At every step the `L` most probable next tokens become candidates. Each
//! candidate is extended by an `n`-token rollout, and the text generated so
//! far plus the rollout is scored with the readability guidance function.
//! The chosen token maximises
//!
//! ```text
//! combined = log p(token | context) + lambda * guidance / 100
//! ```
//!
//! Guidance is rescaled from 0-100 to 0-1 so that `lambda` trades off against
//! log-probabilities on a comparable scale. With `lambda = 0` or `L = 1` the
//! decoder reduces exactly to greedy decoding.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lm::{generate, LanguageModel, SamplingConfig, Strategy, TokenId, Vocabulary};
use crate::readability::{ReadabilityError, Scorer};
use crate::rng;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("invalid decode config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Readability(#[from] ReadabilityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    /// Number of candidate first tokens per step (`L`).
    pub num_candidates: usize,
    /// Rollout length in tokens, counting the candidate itself (`n`).
    pub lookahead_n: usize,
    pub lambda: f64,
    /// Maximum number of generated tokens.
    pub max_len: usize,
    pub rollout: Strategy,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            num_candidates: 5,
            lookahead_n: 20,
            lambda: 1.0,
            max_len: 128,
            rollout: Strategy::Greedy,
            seed: 42,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self, vocab_size: usize) -> Result<(), DecodeError> {
        let bad = |m: String| Err(DecodeError::InvalidConfig(m));
        if self.num_candidates == 0 || self.num_candidates > vocab_size {
            return bad(format!(
                "num_candidates must be in 1..={vocab_size}, got {}",
                self.num_candidates
            ));
        }
        if self.lookahead_n == 0 {
            return bad("lookahead_n must be at least 1".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be a non-negative number, got {}", self.lambda));
        }
        if let Strategy::TopP(s) = &self.rollout {
            s.validate().map_err(|e| DecodeError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub first_token: TokenId,
    pub logprob: f64,
    pub rollout: Vec<TokenId>,
    pub guidance_score: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub candidates: Vec<CandidateScore>,
    pub chosen: TokenId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// Generated tokens, including a terminating EOS if one was produced.
    pub tokens: Vec<TokenId>,
    pub text: String,
    pub trace: Vec<StepTrace>,
}

/// `first_token` followed by up to `n - 1` tokens from `policy`, stopping
/// after EOS. A sampling policy draws from a stream seeded by `seed`.
pub fn rollout<M: LanguageModel + ?Sized>(
    model: &M,
    prefix: &[TokenId],
    first_token: TokenId,
    n: usize,
    policy: &Strategy,
    seed: u64,
) -> Vec<TokenId> {
    let mut seq = vec![first_token];
    if n <= 1 || first_token == Vocabulary::EOS {
        return seq;
    }
    let mut context = prefix.to_vec();
    context.push(first_token);
    let policy = match policy {
        Strategy::TopP(cfg) => Strategy::TopP(SamplingConfig { seed, ..*cfg }),
        Strategy::Greedy => Strategy::Greedy,
    };
    let budget = context.len() + n - 1;
    seq.extend(generate(model, &context, budget, &policy));
    seq
}

/// Token ids sorted by descending log-probability, ties by smaller id.
fn top_candidates(logprobs: &[f64], l: usize) -> Vec<TokenId> {
    let mut ids: Vec<TokenId> = (0..logprobs.len() as u32).map(TokenId).collect();
    ids.sort_by(|a, b| logprobs[b.index()].total_cmp(&logprobs[a.index()]).then(a.cmp(b)));
    ids.truncate(l);
    ids
}

/// One decoding step. Returns the selected token and every candidate's
/// scores; the first candidate wins ties on the combined score.
pub fn lookahead_step<M: LanguageModel + ?Sized>(
    model: &M,
    instruction_prefix: &[TokenId],
    generated: &[TokenId],
    original: &str,
    config: &DecodeConfig,
    scorer: &Scorer,
) -> Result<(TokenId, Vec<CandidateScore>), DecodeError> {
    config.validate(model.vocab().len())?;
    let input_len = scorer.count_tokens(original)?;
    step(model, instruction_prefix, generated, input_len, config, scorer)
}

fn step<M: LanguageModel + ?Sized>(
    model: &M,
    instruction_prefix: &[TokenId],
    generated: &[TokenId],
    input_len: usize,
    config: &DecodeConfig,
    scorer: &Scorer,
) -> Result<(TokenId, Vec<CandidateScore>), DecodeError> {
    let mut context = instruction_prefix.to_vec();
    context.extend_from_slice(generated);
    let logprobs = model.next_token_logprobs(&context);
    let step = generated.len() as u64;

    let mut candidates = Vec::with_capacity(config.num_candidates);
    for (rank, first) in top_candidates(&logprobs, config.num_candidates).into_iter().enumerate() {
        let seed = rng::derive_seed(config.seed, &[step, rank as u64]);
        let roll = rollout(model, &context, first, config.lookahead_n, &config.rollout, seed);
        let mut text_ids = generated.to_vec();
        text_ids.extend_from_slice(&roll);
        let guidance_score = scorer.guidance_with_input_len(input_len, &model.vocab().decode(&text_ids))?;
        let logprob = logprobs[first.index()];
        candidates.push(CandidateScore {
            first_token: first,
            logprob,
            rollout: roll,
            guidance_score,
            combined: logprob + config.lambda * guidance_score / 100.0,
        });
    }

    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        if c.combined > candidates[best].combined {
            best = i;
        }
    }
    Ok((candidates[best].first_token, candidates))
}

/// Separates an instruction from its response, both when training the
/// reference model and when decoding from it. A low-order character model
/// only sees the last few characters of its context, so the response must
/// start after a sequence that occurs nowhere else.
pub const RESPONSE_MARKER: &str = "\n## 输出：";

/// The decoding context for an instruction: BOS, its characters, then the
/// response marker. Characters outside the vocabulary are dropped.
pub fn instruction_prefix(vocab: &Vocabulary, instruction: &str) -> Vec<TokenId> {
    let mut prefix = vec![Vocabulary::BOS];
    prefix.extend(vocab.encode(instruction));
    prefix.extend(vocab.encode(RESPONSE_MARKER));
    prefix
}

/// A training sequence laid out the way [`instruction_prefix`] decodes.
pub fn training_text(instruction: &str, response: &str) -> String {
    format!("{instruction}{RESPONSE_MARKER}{response}")
}

pub fn lookahead_decode<M: LanguageModel + ?Sized>(
    model: &M,
    instruction: &str,
    original: &str,
    config: &DecodeConfig,
    scorer: &Scorer,
) -> Result<Decoded, DecodeError> {
    config.validate(model.vocab().len())?;
    let input_len = scorer.count_tokens(original)?;
    if input_len == 0 {
        return Err(ReadabilityError::EmptyOriginal.into());
    }
    let prefix = instruction_prefix(model.vocab(), instruction);
    let mut tokens = Vec::new();
    let mut trace = Vec::new();
    while tokens.len() < config.max_len {
        let (chosen, candidates) = step(model, &prefix, &tokens, input_len, config, scorer)?;
        trace.push(StepTrace {
            step: tokens.len(),
            candidates,
            chosen,
        });
        tokens.push(chosen);
        if chosen == Vocabulary::EOS {
            break;
        }
    }
    let text = model.vocab().decode(&tokens);
    Ok(Decoded { tokens, text, trace })
}
