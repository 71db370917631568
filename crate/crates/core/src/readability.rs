//! The Red-CN readability score.
//!
//! Each raw indicator is mapped through a Gaussian kernel centred on its
//! target value and scaled so that the peak is exactly 1:
//!
//! ```text
//! norm(x) = exp(-(x - target)^2 / (2 sigma^2))
//! ```
//!
//! The length indicator is `max(0, 1 - output_len / input_len)`. The total is
//! the weighted sum of the three components, reported on a 0-100 scale while
//! the components stay in [0, 1].

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{compute_indicators, output_indicators, FrequencyTable, IndicatorSet, Tagger, TextError};

pub const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ReadabilityError {
    #[error("sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("target must be positive, got {0}")]
    InvalidTarget(f64),
    #[error("weights must be non-negative and sum to 1 (got {sum})")]
    InvalidWeights { sum: f64 },
    #[error("original text is empty")]
    EmptyOriginal,
    #[error(transparent)]
    Text(TextError),
    #[error("readability config {path}: {message}")]
    Config { path: String, message: String },
}

impl From<TextError> for ReadabilityError {
    fn from(e: TextError) -> Self {
        match e {
            TextError::EmptyOriginal => ReadabilityError::EmptyOriginal,
            other => ReadabilityError::Text(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadabilityConfig {
    pub target_ac: f64,
    pub target_f: f64,
    pub sigma_ac: f64,
    pub sigma_f: f64,
    pub weight_ac: f64,
    pub weight_f: f64,
    pub weight_t: f64,
}

impl Default for ReadabilityConfig {
    fn default() -> Self {
        Self {
            target_ac: 5.0,
            target_f: 85.0,
            sigma_ac: 2.5,
            sigma_f: 42.5,
            weight_ac: 0.3,
            weight_f: 0.4,
            weight_t: 0.3,
        }
    }
}

impl ReadabilityConfig {
    pub fn validate(&self) -> Result<(), ReadabilityError> {
        for sigma in [self.sigma_ac, self.sigma_f] {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(ReadabilityError::InvalidSigma(sigma));
            }
        }
        for target in [self.target_ac, self.target_f] {
            if !(target > 0.0 && target.is_finite()) {
                return Err(ReadabilityError::InvalidTarget(target));
            }
        }
        let weights = [self.weight_ac, self.weight_f, self.weight_t];
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| w.is_nan() || *w < 0.0) || (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(ReadabilityError::InvalidWeights { sum });
        }
        Ok(())
    }

    /// Parses a TOML document with any subset of the config keys; missing
    /// keys keep their defaults.
    pub fn from_toml_str(source_name: &str, contents: &str) -> Result<Self, ReadabilityError> {
        let cfg: ReadabilityConfig = toml::from_str(contents).map_err(|e| ReadabilityError::Config {
            path: source_name.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ReadabilityError> {
        let contents = std::fs::read_to_string(path).map_err(|e| ReadabilityError::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&path.display().to_string(), &contents)
    }
}

/// Gaussian kernel with peak 1 at `target`.
pub fn gaussian_normalize(value: f64, target: f64, sigma: f64) -> Result<f64, ReadabilityError> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(ReadabilityError::InvalidSigma(sigma));
    }
    let d = value - target;
    Ok((-(d * d) / (2.0 * sigma * sigma)).exp())
}

pub fn length_indicator(input_len: usize, output_len: usize) -> Result<f64, ReadabilityError> {
    if input_len == 0 {
        return Err(ReadabilityError::EmptyOriginal);
    }
    Ok((1.0 - output_len as f64 / input_len as f64).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RedCnScore {
    pub norm_ac: f64,
    pub norm_f: f64,
    pub norm_t: f64,
    /// Weighted sum of the components, scaled to 0-100.
    pub total: f64,
}

impl RedCnScore {
    pub fn from_components(norm_ac: f64, norm_f: f64, norm_t: f64, config: &ReadabilityConfig) -> Self {
        let total = 100.0 * (config.weight_ac * norm_ac + config.weight_f * norm_f + config.weight_t * norm_t);
        Self {
            norm_ac,
            norm_f,
            norm_t,
            total,
        }
    }
}

pub fn red_cn(indicators: &IndicatorSet, config: &ReadabilityConfig) -> Result<RedCnScore, ReadabilityError> {
    let norm_ac = gaussian_normalize(indicators.r_ac, config.target_ac, config.sigma_ac)?;
    let norm_f = gaussian_normalize(indicators.r_f, config.target_f, config.sigma_f)?;
    let norm_t = length_indicator(indicators.input_len, indicators.output_len)?;
    Ok(RedCnScore::from_components(norm_ac, norm_f, norm_t, config))
}

/// Decoding guidance: the Red-CN total of `candidate` against `original`.
pub fn guidance(
    original: &str,
    candidate: &str,
    table: &FrequencyTable,
    tagger: &dyn Tagger,
    config: &ReadabilityConfig,
) -> Result<f64, ReadabilityError> {
    let indicators = compute_indicators(original, candidate, table, tagger)?;
    Ok(red_cn(&indicators, config)?.total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub indicators: IndicatorSet,
    pub score: RedCnScore,
}

/// Bundles everything needed to score text: frequency table, tagger and
/// config. Immutable and shareable across threads.
pub struct Scorer {
    pub table: FrequencyTable,
    pub tagger: Box<dyn Tagger>,
    pub config: ReadabilityConfig,
}

impl Scorer {
    pub fn new(table: FrequencyTable, tagger: impl Tagger + 'static, config: ReadabilityConfig) -> Self {
        Self {
            table,
            tagger: Box::new(tagger),
            config,
        }
    }

    pub fn score(&self, original: &str, output: &str) -> Result<Scored, ReadabilityError> {
        let mut indicators = compute_indicators(original, output, &self.table, self.tagger.as_ref())?;
        let score = red_cn(&indicators, &self.config)?;
        indicators.r_t = Some(score.norm_t);
        Ok(Scored { indicators, score })
    }

    pub fn guidance(&self, original: &str, candidate: &str) -> Result<f64, ReadabilityError> {
        guidance(original, candidate, &self.table, self.tagger.as_ref(), &self.config)
    }

    /// Guidance against an original of `input_len` tokens.
    pub fn guidance_with_input_len(&self, input_len: usize, candidate: &str) -> Result<f64, ReadabilityError> {
        let indicators = output_indicators(input_len, candidate, &self.table, self.tagger.as_ref())?;
        Ok(red_cn(&indicators, &self.config)?.total)
    }

    pub fn count_tokens(&self, text: &str) -> Result<usize, ReadabilityError> {
        Ok(self.tagger.count_tokens(text)?)
    }
}

impl std::fmt::Debug for Scorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scorer")
            .field("table_len", &self.table.len())
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}
