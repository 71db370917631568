//! Data bundled into the crate: the character-frequency table, the
//! adverb/conjunction lexicon and a small synthetic corpus with matching
//! profiles, triplets and a reference n-gram model.
//!
//! The corpus is synthetic and only shaped like real paired data; it exists
//! so that every pipeline stage can be exercised offline.

use crate::corpus::Dataset;
use crate::instruction::{parse_profiles, parse_triplets, CharacterProfile, RecordTriplets};
use crate::lm::NgramModel;
use crate::readability::{ReadabilityConfig, Scorer};
use crate::text::{FrequencyTable, LexiconTagger};

pub const CHAR_FREQ: &str = include_str!("../data/char_freq.tsv");
pub const POS_LEXICON: &str = include_str!("../data/pos_lexicon.tsv");
pub const FIXTURE_DATASET: &str = include_str!("../data/fixture_dataset.jsonl");
pub const FIXTURE_PROFILES: &str = include_str!("../data/fixture_profiles.json");
pub const FIXTURE_TRIPLETS: &str = include_str!("../data/fixture_triplets.json");
pub const FIXTURE_MODEL: &str = include_str!("../data/fixture.ngram");

/// Records per novel held out as test data in the bundled corpus.
pub const FIXTURE_TEST_PER_NOVEL: usize = 75;

pub fn bundled_frequency_table() -> FrequencyTable {
    FrequencyTable::parse("char_freq.tsv", CHAR_FREQ).expect("bundled frequency table is valid")
}

pub fn bundled_tagger() -> LexiconTagger {
    LexiconTagger::parse("pos_lexicon.tsv", POS_LEXICON).expect("bundled lexicon is valid")
}

pub fn bundled_scorer(config: ReadabilityConfig) -> Scorer {
    Scorer::new(bundled_frequency_table(), bundled_tagger(), config)
}

pub fn fixture_dataset() -> Dataset {
    Dataset::parse_jsonl(FIXTURE_DATASET).expect("bundled dataset is valid")
}

pub fn fixture_profiles() -> Vec<CharacterProfile> {
    parse_profiles("fixture_profiles.json", FIXTURE_PROFILES).expect("bundled profiles are valid")
}

pub fn fixture_triplets() -> Vec<RecordTriplets> {
    parse_triplets("fixture_triplets.json", FIXTURE_TRIPLETS).expect("bundled triplets are valid")
}

pub fn fixture_model() -> NgramModel {
    NgramModel::parse(FIXTURE_MODEL).expect("bundled model is valid")
}
