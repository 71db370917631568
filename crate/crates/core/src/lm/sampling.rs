use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LanguageModel, LmError, TokenId};

/// Cumulative-mass comparisons tolerate this much floating-point error, so
/// that e.g. 0.7 + 0.2 counts as reaching 0.9.
const MASS_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub top_p: f64,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            top_p: 0.9,
            temperature: 0.8,
            seed: 42,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), LmError> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(LmError::InvalidSampling(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(LmError::InvalidSampling(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// The renormalised nucleus: temperature-scaled probabilities truncated to
/// the smallest descending-probability prefix with mass >= `top_p`.
///
/// Sorted by probability, ties by smaller id.
pub fn nucleus(logprobs: &[f64], top_p: f64, temperature: f64) -> Vec<(TokenId, f64)> {
    let max = logprobs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<(TokenId, f64)> = logprobs
        .iter()
        .enumerate()
        .map(|(i, &lp)| {
            let scaled = if lp == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                (lp - max) / temperature
            };
            (TokenId(i as u32), scaled.exp())
        })
        .collect();
    let z: f64 = probs.iter().map(|p| p.1).sum();
    for p in &mut probs {
        p.1 /= z;
    }
    probs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut mass = 0.0;
    let mut keep = probs.len();
    for (i, p) in probs.iter().enumerate() {
        mass += p.1;
        if mass >= top_p - MASS_EPSILON {
            keep = i + 1;
            break;
        }
    }
    probs.truncate(keep.max(1));
    let kept: f64 = probs.iter().map(|p| p.1).sum();
    for p in &mut probs {
        p.1 /= kept;
    }
    probs
}

/// Draws one token from the nucleus of the model's next-token distribution.
pub fn sample_top_p<M, R>(model: &M, context: &[TokenId], config: &SamplingConfig, rng: &mut R) -> TokenId
where
    M: LanguageModel + ?Sized,
    R: Rng + ?Sized,
{
    let dist = nucleus(&model.next_token_logprobs(context), config.top_p, config.temperature);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &(id, p) in &dist {
        acc += p;
        if u < acc {
            return id;
        }
    }
    dist.last().expect("nucleus is never empty").0
}
