use std::collections::HashMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use childadapt::corpus::{load_dataset, Dataset, DatasetRecord};
use childadapt::instruction::{load_profiles, load_triplets, record_instruction, CharacterProfile, Triplet};
use childadapt::lm::NgramModel;
use childadapt::readability::{ReadabilityConfig, Scorer};
use childadapt::resources;
use childadapt::text::{FrequencyTable, LexiconTagger};

use crate::args::{InstructionSources, ReadabilityArgs, SplitArg};

/// A problem with how the tool was invoked rather than with its inputs.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

/// Defaults, then the config file, then individual flags.
pub fn readability_config(args: &ReadabilityArgs) -> Result<ReadabilityConfig> {
    let mut cfg = match &args.readability_config {
        Some(path) => ReadabilityConfig::load(path)?,
        None => ReadabilityConfig::default(),
    };
    let overrides = [
        (&mut cfg.target_ac, args.target_ac),
        (&mut cfg.target_f, args.target_f),
        (&mut cfg.sigma_ac, args.sigma_ac),
        (&mut cfg.sigma_f, args.sigma_f),
        (&mut cfg.weight_ac, args.weight_ac),
        (&mut cfg.weight_f, args.weight_f),
        (&mut cfg.weight_t, args.weight_t),
    ];
    for (slot, value) in overrides {
        if let Some(v) = value {
            *slot = v;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn scorer(args: &ReadabilityArgs) -> Result<Scorer> {
    let config = readability_config(args)?;
    let table = match &args.char_freq {
        Some(path) => FrequencyTable::load(path)?,
        None => resources::bundled_frequency_table(),
    };
    let tagger = match &args.lexicon {
        Some(path) => LexiconTagger::load(path)?,
        None => resources::bundled_tagger(),
    };
    Ok(Scorer::new(table, tagger, config))
}

/// Echo of the readability resources for output artifacts.
pub fn readability_echo(args: &ReadabilityArgs, scorer: &Scorer) -> Value {
    let source = |p: &Option<std::path::PathBuf>| match p {
        Some(p) => p.display().to_string(),
        None => "bundled".to_string(),
    };
    serde_json::json!({
        "settings": scorer.config,
        "char_freq": source(&args.char_freq),
        "lexicon": source(&args.lexicon),
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn load_model(path: &Path) -> Result<NgramModel> {
    NgramModel::load(path).with_context(|| format!("loading model {}", path.display()))
}

pub fn dataset(path: &Path) -> Result<Dataset> {
    load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

pub fn select(dataset: &Dataset, split: SplitArg) -> Vec<&DatasetRecord> {
    match split.split() {
        Some(s) => dataset.split(s).collect(),
        None => dataset.records().iter().collect(),
    }
}

/// Roster and per-record triplets used to render dataset instructions.
pub struct Instructions {
    roster: Vec<CharacterProfile>,
    triplets: HashMap<String, Vec<Triplet>>,
}

impl Instructions {
    pub fn load(sources: &InstructionSources) -> Result<Self> {
        let roster = match &sources.profiles {
            Some(p) => load_profiles(p)?,
            None => Vec::new(),
        };
        let triplets = match &sources.triplets {
            Some(p) => load_triplets(p)?
                .into_iter()
                .map(|e| (e.record_id, e.triplets))
                .collect(),
            None => HashMap::new(),
        };
        Ok(Self { roster, triplets })
    }

    pub fn render(&self, record: &DatasetRecord) -> Result<String> {
        let triplets = self.triplets.get(&record.id).map(Vec::as_slice).unwrap_or_default();
        let ins = record_instruction(record, &self.roster, triplets)
            .with_context(|| format!("rendering the instruction for record {}", record.id))?;
        Ok(ins.rendered)
    }

    pub fn echo(sources: &InstructionSources) -> Value {
        let path = |p: &Option<std::path::PathBuf>| p.as_ref().map(|p| p.display().to_string());
        serde_json::json!({ "profiles": path(&sources.profiles), "triplets": path(&sources.triplets) })
    }
}

pub fn jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("values serialise"));
        out.push('\n');
    }
    out
}

/// Prints the JSON summary of a subcommand to stdout.
pub fn emit(summary: Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("summary serialises")
    );
}
