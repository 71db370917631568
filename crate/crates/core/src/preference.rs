//! Preference pairs for DPO-style trainers.
//!
//! For each prompt, `K` candidates are sampled with top-p, each one is scored
//! with Red-CN against the record's original, and every unordered candidate
//! pair whose score gap reaches the threshold becomes a (chosen, rejected)
//! pair.

use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DatasetRecord, Split};
use crate::decoding::instruction_prefix;
use crate::lm::{generate, LanguageModel, LmError, SamplingConfig, Strategy};
use crate::readability::{ReadabilityError, Scorer};
use crate::rng;

/// Gaps are compared with this slack so that e.g. 73.0 - 70.0 qualifies for a
/// threshold of 3 despite rounding in the scores.
const GAP_EPSILON: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PreferenceError {
    #[error("invalid preference config: {0}")]
    InvalidConfig(String),
    #[error("{requested} prompts requested but the training split has {available} records")]
    InsufficientData { available: usize, requested: usize },
    #[error("record {id}: {source}")]
    Scoring {
        id: String,
        #[source]
        source: ReadabilityError,
    },
    #[error(transparent)]
    Sampling(#[from] LmError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub record_id: String,
    pub prompt: String,
    pub chosen: String,
    pub rejected: String,
    pub chosen_score: f64,
    pub rejected_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceConfig {
    pub n_prompts: usize,
    /// Candidates sampled per prompt (`K`).
    pub k: usize,
    pub sampling: SamplingConfig,
    /// Minimum Red-CN gap, on the 0-100 scale.
    pub threshold: f64,
    pub max_new_tokens: usize,
}

impl Default for PreferenceConfig {
    fn default() -> Self {
        Self {
            n_prompts: 1000,
            k: 4,
            sampling: SamplingConfig::default(),
            threshold: 3.0,
            max_new_tokens: 128,
        }
    }
}

impl PreferenceConfig {
    pub fn validate(&self) -> Result<(), PreferenceError> {
        if self.k < 2 {
            return Err(PreferenceError::InvalidConfig(format!(
                "k must be at least 2, got {}",
                self.k
            )));
        }
        if self.threshold.is_nan() || self.threshold < 0.0 {
            return Err(PreferenceError::InvalidConfig(format!(
                "threshold must be non-negative, got {}",
                self.threshold
            )));
        }
        self.sampling.validate()?;
        Ok(())
    }
}

/// `k` top-p continuations of `prompt`. Candidate `i` draws from a stream
/// seeded with `derive_seed(sampling.seed, [i])`.
pub fn sample_candidates<M: LanguageModel + ?Sized>(
    model: &M,
    prompt: &str,
    k: usize,
    sampling: &SamplingConfig,
    max_new_tokens: usize,
) -> Vec<String> {
    let prefix = instruction_prefix(model.vocab(), prompt);
    (0..k as u64)
        .map(|i| {
            let cfg = sampling.with_seed(rng::derive_seed(sampling.seed, &[i]));
            let out = generate(model, &prefix, prefix.len() + max_new_tokens, &Strategy::TopP(cfg));
            model.vocab().decode(&out)
        })
        .collect()
}

/// Pairs of candidate indices `(chosen, rejected)` whose score gap reaches
/// `threshold`, by descending gap and then input order.
pub fn rank_pairs(scores: &[f64], threshold: f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..scores.len() {
        for j in i + 1..scores.len() {
            let gap = (scores[i] - scores[j]).abs();
            if gap >= threshold - GAP_EPSILON {
                let (hi, lo) = if scores[i] >= scores[j] { (i, j) } else { (j, i) };
                pairs.push((gap, i, j, hi, lo));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    pairs.into_iter().map(|(_, _, _, hi, lo)| (hi, lo)).collect()
}

/// Rank pairs over scored candidates. Pairs whose two texts are identical are
/// dropped.
pub fn build_pairs(record_id: &str, prompt: &str, candidates: &[(String, f64)], threshold: f64) -> Vec<PreferencePair> {
    let scores: Vec<f64> = candidates.iter().map(|c| c.1).collect();
    rank_pairs(&scores, threshold)
        .into_iter()
        .filter(|&(hi, lo)| candidates[hi].0 != candidates[lo].0)
        .map(|(hi, lo)| PreferencePair {
            record_id: record_id.to_string(),
            prompt: prompt.to_string(),
            chosen: candidates[hi].0.clone(),
            rejected: candidates[lo].0.clone(),
            chosen_score: candidates[hi].1,
            rejected_score: candidates[lo].1,
        })
        .collect()
}

/// Samples, scores and pairs one record's candidates. The sampling seed is
/// derived from the configured seed and the record id.
pub fn pairs_for_record<M: LanguageModel + ?Sized>(
    model: &M,
    record: &DatasetRecord,
    prompt: &str,
    config: &PreferenceConfig,
    scorer: &Scorer,
) -> Result<Vec<PreferencePair>, PreferenceError> {
    let seed = rng::derive_seed(config.sampling.seed, &[rng::hash_str(&record.id)]);
    let texts = sample_candidates(
        model,
        prompt,
        config.k,
        &config.sampling.with_seed(seed),
        config.max_new_tokens,
    );
    let scored = texts
        .into_iter()
        .map(|t| {
            let s = scorer
                .score(&record.original, &t)
                .map_err(|source| PreferenceError::Scoring {
                    id: record.id.clone(),
                    source,
                })?;
            Ok((t, s.score.total))
        })
        .collect::<Result<Vec<_>, PreferenceError>>()?;
    Ok(build_pairs(&record.id, prompt, &scored, config.threshold))
}

/// Draws `n_prompts` training records without replacement and returns their
/// pairs concatenated in dataset order. `prompt_for` renders each record's
/// prompt (typically the integrative instruction).
pub fn build_preference_dataset<M, F>(
    records: &[DatasetRecord],
    model: &M,
    config: &PreferenceConfig,
    scorer: &Scorer,
    prompt_for: F,
) -> Result<Vec<PreferencePair>, PreferenceError>
where
    M: LanguageModel + ?Sized,
    F: Fn(&DatasetRecord) -> String + Sync,
{
    config.validate()?;
    let train: Vec<&DatasetRecord> = records.iter().filter(|r| r.split == Split::Train).collect();
    if config.n_prompts > train.len() {
        return Err(PreferenceError::InsufficientData {
            available: train.len(),
            requested: config.n_prompts,
        });
    }
    let mut stream = rng::stream(config.sampling.seed);
    let mut picked = index::sample(&mut stream, train.len(), config.n_prompts).into_vec();
    picked.sort_unstable();

    let per_record = picked
        .par_iter()
        .map(|&i| pairs_for_record(model, train[i], &prompt_for(train[i]), config, scorer))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(per_record.into_iter().flatten().collect())
}

pub fn to_jsonl(pairs: &[PreferencePair]) -> String {
    let mut out = String::new();
    for p in pairs {
        out.push_str(&serde_json::to_string(p).expect("pairs serialise"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(pairs: &[PreferencePair], path: &Path) -> Result<(), PreferenceError> {
    let io = |source| PreferenceError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(to_jsonl(pairs).as_bytes()).map_err(io)
}
