//! One-factor-at-a-time sweeps over the lookahead hyperparameters.

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DatasetRecord;
use crate::decoding::{lookahead_decode, DecodeConfig, DecodeError};
use crate::evaluation::{char_bleu, corpus_red_cn, EvalError};
use crate::lm::LanguageModel;
use crate::readability::Scorer;

pub const CSV_HEADER: &str = "L,n,lambda,bleu2,red_cn,wall_ms";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("{records} records but {instructions} instructions")]
    Misaligned { records: usize, instructions: usize },
    #[error("record {id}: {source}")]
    Decode {
        id: String,
        #[source]
        source: DecodeError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub num_candidates: usize,
    pub lookahead_n: usize,
    pub lambda: f64,
}

/// The default point every one-factor sweep varies around.
pub const BASE_POINT: SweepPoint = SweepPoint {
    num_candidates: 5,
    lookahead_n: 20,
    lambda: 1.0,
};

/// One row per value of each axis, the other two held at `base`. Rows come
/// in axis order: all `L` values, then `n`, then `lambda`.
pub fn one_factor_grid(base: SweepPoint, ls: &[usize], ns: &[usize], lambdas: &[f64]) -> Vec<SweepPoint> {
    let mut grid: Vec<SweepPoint> = ls
        .iter()
        .map(|&l| SweepPoint {
            num_candidates: l,
            ..base
        })
        .collect();
    grid.extend(ns.iter().map(|&n| SweepPoint { lookahead_n: n, ..base }));
    grid.extend(lambdas.iter().map(|&lambda| SweepPoint { lambda, ..base }));
    grid
}

/// Varies `L` over {2, 5, 8}, `n` over {10, 20, 50} and `lambda` over
/// {0.5, 1, 2}, holding the other two at [`BASE_POINT`].
pub fn default_grid() -> Vec<SweepPoint> {
    one_factor_grid(BASE_POINT, &[2, 5, 8], &[10, 20, 50], &[0.5, 1.0, 2.0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub bleu2: f64,
    pub red_cn: f64,
    /// Wall-clock time spent decoding every record for this point.
    pub wall_ms: f64,
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:.4},{:.4},{:.3}",
            self.point.num_candidates, self.point.lookahead_n, self.point.lambda, self.bleu2, self.red_cn, self.wall_ms
        )
    }
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Decodes every record at every grid point (records in parallel, points in
/// order) and scores the outputs against the adapted references.
///
/// `base` supplies the settings the grid does not vary: `max_len`, rollout
/// policy and seed.
pub fn run_sweep<M: LanguageModel + ?Sized>(
    model: &M,
    records: &[&DatasetRecord],
    instructions: &[String],
    grid: &[SweepPoint],
    base: &DecodeConfig,
    scorer: &Scorer,
) -> Result<Vec<SweepRow>, SweepError> {
    if records.len() != instructions.len() {
        return Err(SweepError::Misaligned {
            records: records.len(),
            instructions: instructions.len(),
        });
    }
    let references: Vec<&str> = records.iter().map(|r| r.adapted.as_str()).collect();
    let mut rows = Vec::with_capacity(grid.len());
    for point in grid {
        let config = DecodeConfig {
            num_candidates: point.num_candidates,
            lookahead_n: point.lookahead_n,
            lambda: point.lambda,
            ..*base
        };
        let start = Instant::now();
        let texts = records
            .par_iter()
            .zip(instructions)
            .map(|(r, ins)| {
                lookahead_decode(model, ins, &r.original, &config, scorer)
                    .map(|d| d.text)
                    .map_err(|source| SweepError::Decode {
                        id: r.id.clone(),
                        source,
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let wall_ms = start.elapsed().as_secs_f64() * 1000.0;
        log::info!(
            "sweep L={} n={} lambda={}: {} records in {wall_ms:.1} ms",
            point.num_candidates,
            point.lookahead_n,
            point.lambda,
            records.len()
        );

        let outputs: HashMap<String, String> = records
            .iter()
            .map(|r| r.id.clone())
            .zip(texts.iter().cloned())
            .collect();
        rows.push(SweepRow {
            point: *point,
            bleu2: char_bleu(&texts, &references, 2)?,
            red_cn: corpus_red_cn(records, &outputs, scorer)?,
            wall_ms,
        });
    }
    Ok(rows)
}
