//! BLEU, corpus-level Red-CN, Pearson correlation and evaluation reports.

use std::collections::HashMap;
use std::hash::Hash;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DatasetRecord, Split};
use crate::readability::{ReadabilityConfig, ReadabilityError, Scorer};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("nothing to evaluate")]
    EmptyCorpus,
    #[error("{candidates} candidates but {references} references")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("BLEU order must be at least 1")]
    InvalidOrder,
    #[error("no output for record {0:?}")]
    MissingOutput(String),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("record {id}: {source}")]
    Readability {
        id: String,
        #[source]
        source: ReadabilityError,
    },
    #[error("outputs line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Character tokens with whitespace removed.
pub fn char_tokens(text: &str) -> Vec<char> {
    text.chars().filter(|c| !c.is_whitespace()).collect()
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU over orders `1..=max_n` with one reference per
/// candidate, scaled to 0-100.
///
/// No smoothing: any order without a single clipped match gives 0. An order
/// for which no candidate has n-grams counts as a perfect match if no
/// reference has any either, and as zero otherwise.
pub fn bleu_n<T: Eq + Hash>(candidates: &[Vec<T>], references: &[Vec<T>], max_n: usize) -> Result<f64, EvalError> {
    if candidates.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    if candidates.len() != references.len() {
        return Err(EvalError::LengthMismatch {
            candidates: candidates.len(),
            references: references.len(),
        });
    }
    if max_n == 0 {
        return Err(EvalError::InvalidOrder);
    }

    let mut log_precision = 0.0;
    for n in 1..=max_n {
        let (mut matched, mut total, mut ref_total) = (0usize, 0usize, 0usize);
        for (cand, reference) in candidates.iter().zip(references) {
            let c = ngram_counts(cand, n);
            let r = ngram_counts(reference, n);
            total += c.values().sum::<usize>();
            ref_total += r.values().sum::<usize>();
            matched += c
                .iter()
                .map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0)))
                .sum::<usize>();
        }
        let p = match (total, ref_total) {
            (0, 0) => 1.0,
            (0, _) => 0.0,
            _ => matched as f64 / total as f64,
        };
        if p == 0.0 {
            return Ok(0.0);
        }
        log_precision += p.ln() / max_n as f64;
    }

    let c: usize = candidates.iter().map(Vec::len).sum();
    let r: usize = references.iter().map(Vec::len).sum();
    let bp = if c >= r {
        1.0
    } else if c == 0 {
        0.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    Ok(100.0 * bp * log_precision.exp())
}

/// Character BLEU between output and reference texts.
pub fn char_bleu<A: AsRef<str>, B: AsRef<str>>(
    candidates: &[A],
    references: &[B],
    max_n: usize,
) -> Result<f64, EvalError> {
    let cands: Vec<Vec<char>> = candidates.iter().map(|s| char_tokens(s.as_ref())).collect();
    let refs: Vec<Vec<char>> = references.iter().map(|s| char_tokens(s.as_ref())).collect();
    bleu_n(&cands, &refs, max_n)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch {
            candidates: x.len(),
            references: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(EvalError::DegenerateInput("need at least two observations".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvalError::DegenerateInput("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn output_for<'a>(outputs: &'a HashMap<String, String>, id: &str) -> Result<&'a str, EvalError> {
    outputs
        .get(id)
        .map(String::as_str)
        .ok_or_else(|| EvalError::MissingOutput(id.to_string()))
}

fn score_record(record: &DatasetRecord, output: &str, scorer: &Scorer) -> Result<f64, EvalError> {
    scorer
        .score(&record.original, output)
        .map(|s| s.score.total)
        .map_err(|source| EvalError::Readability {
            id: record.id.clone(),
            source,
        })
}

/// Unweighted mean Red-CN of each record's output against its original.
pub fn corpus_red_cn(
    records: &[&DatasetRecord],
    outputs: &HashMap<String, String>,
    scorer: &Scorer,
) -> Result<f64, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let mut sum = 0.0;
    for r in records {
        sum += score_record(r, output_for(outputs, &r.id)?, scorer)?;
    }
    Ok(sum / records.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub id: String,
    pub bleu1: f64,
    pub bleu2: f64,
    pub red_cn: f64,
    /// Output length over original length, in non-whitespace characters.
    pub len_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub tokenization: String,
    pub smoothing: String,
    pub split: Option<Split>,
    pub readability: ReadabilityConfig,
}

impl EvalSettings {
    pub fn new(split: Option<Split>, readability: ReadabilityConfig) -> Self {
        Self {
            tokenization: "char".into(),
            smoothing: "none".into(),
            split,
            readability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Corpus-level, not the mean of the per-record values.
    pub bleu1: f64,
    pub bleu2: f64,
    pub red_cn_mean: f64,
    /// Reserved for an embedding-based metric; never computed here.
    pub bertscore: Option<f64>,
    pub per_record: Vec<RecordRow>,
    pub config: EvalSettings,
}

/// Scores `outputs` against every record's adapted reference and original.
/// Rows follow record order.
pub fn evaluate_run(
    records: &[&DatasetRecord],
    outputs: &HashMap<String, String>,
    scorer: &Scorer,
    settings: EvalSettings,
) -> Result<EvalReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyCorpus);
    }
    let texts: Vec<&str> = records
        .iter()
        .map(|r| output_for(outputs, &r.id))
        .collect::<Result<_, _>>()?;
    let per_record = records
        .par_iter()
        .zip(&texts)
        .map(|(r, &out)| {
            let cand = [char_tokens(out)];
            let reference = [char_tokens(&r.adapted)];
            let original_len = char_tokens(&r.original).len().max(1);
            Ok(RecordRow {
                id: r.id.clone(),
                bleu1: bleu_n(&cand, &reference, 1)?,
                bleu2: bleu_n(&cand, &reference, 2)?,
                red_cn: score_record(r, out, scorer)?,
                len_ratio: cand[0].len() as f64 / original_len as f64,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;

    let refs: Vec<&str> = records.iter().map(|r| r.adapted.as_str()).collect();
    let red_cn_mean = per_record.iter().map(|r| r.red_cn).sum::<f64>() / per_record.len() as f64;
    Ok(EvalReport {
        bleu1: char_bleu(&texts, &refs, 1)?,
        bleu2: char_bleu(&texts, &refs, 2)?,
        red_cn_mean,
        bertscore: None,
        per_record,
        config: settings,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputLine {
    pub id: String,
    pub text: String,
}

/// Reads `{id, text}` JSONL; ids must be unique.
pub fn parse_outputs(contents: &str) -> Result<HashMap<String, String>, EvalError> {
    let mut out = HashMap::new();
    for (i, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: OutputLine = serde_json::from_str(line).map_err(|e| EvalError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if out.insert(parsed.id.clone(), parsed.text).is_some() {
            return Err(EvalError::Parse {
                line: i + 1,
                message: format!("duplicate id {:?}", parsed.id),
            });
        }
    }
    Ok(out)
}

pub fn load_outputs(path: &Path) -> Result<HashMap<String, String>, EvalError> {
    let contents = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_outputs(&contents)
}

pub fn outputs_to_jsonl(lines: &[OutputLine]) -> String {
    lines
        .iter()
        .map(|l| serde_json::to_string(l).expect("outputs serialise") + "\n")
        .collect()
}
