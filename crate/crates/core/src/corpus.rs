//! Paired original/adapted datasets stored as JSONL.
//!
//! One record per line:
//! `{"id", "novel", "chapter", "original", "adapted", "split"}`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use rand::seq::index;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate id {id:?} on lines {first_line} and {second_line}")]
    DuplicateId {
        id: String,
        first_line: usize,
        second_line: usize,
    },
    #[error("line {line}: original text is empty")]
    EmptyOriginal { line: usize },
    #[error("line {line}: training record {id:?} has no adapted text")]
    MissingAdapted { line: usize, id: String },
    #[error("novel {novel} has {available} records, {requested} requested")]
    InsufficientData {
        novel: String,
        available: usize,
        requested: usize,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Source work. The four classic novels have fixed identifiers; any other
/// non-empty identifier is accepted as-is.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Novel {
    JourneyToTheWest,
    ThreeKingdoms,
    WaterMargin,
    RedChamber,
    Other(String),
}

impl Novel {
    pub const CLASSICS: [Novel; 4] = [
        Novel::JourneyToTheWest,
        Novel::ThreeKingdoms,
        Novel::WaterMargin,
        Novel::RedChamber,
    ];

    pub fn id(&self) -> &str {
        match self {
            Novel::JourneyToTheWest => "journey_to_the_west",
            Novel::ThreeKingdoms => "three_kingdoms",
            Novel::WaterMargin => "water_margin",
            Novel::RedChamber => "dream_of_the_red_chamber",
            Novel::Other(id) => id,
        }
    }

    /// Chinese title, used when rendering prompts.
    pub fn title(&self) -> &str {
        match self {
            Novel::JourneyToTheWest => "西游记",
            Novel::ThreeKingdoms => "三国演义",
            Novel::WaterMargin => "水浒传",
            Novel::RedChamber => "红楼梦",
            Novel::Other(id) => id,
        }
    }

    pub fn from_id(id: &str) -> Option<Novel> {
        let id = id.trim();
        if id.is_empty() {
            return None;
        }
        Some(
            Novel::CLASSICS
                .into_iter()
                .find(|n| n.id() == id)
                .unwrap_or_else(|| Novel::Other(id.to_string())),
        )
    }
}

impl fmt::Display for Novel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl Serialize for Novel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.id())
    }
}

impl<'de> Deserialize<'de> for Novel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Novel::from_id(&s).ok_or_else(|| serde::de::Error::custom("novel must be a non-empty identifier"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub id: String,
    pub novel: Novel,
    pub chapter: u32,
    pub original: String,
    #[serde(default)]
    pub adapted: String,
    pub split: Split,
}

impl DatasetRecord {
    fn check(&self, line: usize) -> Result<(), CorpusError> {
        if self.id.is_empty() {
            return Err(CorpusError::Parse {
                line,
                message: "id is empty".into(),
            });
        }
        if self.chapter == 0 {
            return Err(CorpusError::Parse {
                line,
                message: "chapter must be >= 1".into(),
            });
        }
        if self.original.trim().is_empty() {
            return Err(CorpusError::EmptyOriginal { line });
        }
        if self.split == Split::Train && self.adapted.trim().is_empty() {
            return Err(CorpusError::MissingAdapted {
                line,
                id: self.id.clone(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    records: Vec<DatasetRecord>,
}

impl Dataset {
    /// Validates every invariant; the first violation (in line order) wins.
    pub fn new(records: Vec<DatasetRecord>) -> Result<Self, CorpusError> {
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            let line = i + 1;
            r.check(line)?;
            if let Some(&first_line) = seen.get(r.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    id: r.id.clone(),
                    first_line,
                    second_line: line,
                });
            }
            seen.insert(&r.id, line);
        }
        Ok(Dataset { records })
    }

    pub fn records(&self) -> &[DatasetRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &DatasetRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn get(&self, id: &str) -> Option<&DatasetRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn split_counts(&self) -> BTreeMap<Split, usize> {
        let mut out = BTreeMap::from([(Split::Train, 0), (Split::Test, 0)]);
        for r in &self.records {
            *out.entry(r.split).or_default() += 1;
        }
        out
    }

    pub fn novel_counts(&self) -> BTreeMap<Novel, usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry(r.novel.clone()).or_default() += 1;
        }
        out
    }

    /// Test-split record count per novel.
    pub fn test_counts(&self) -> BTreeMap<Novel, usize> {
        let mut out = BTreeMap::new();
        for r in self.split(Split::Test) {
            *out.entry(r.novel.clone()).or_default() += 1;
        }
        out
    }

    pub fn parse_jsonl(contents: &str) -> Result<Self, CorpusError> {
        let mut records = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (i, line) in contents.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let record: DatasetRecord = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            record.check(line_no)?;
            if let Some(&first_line) = seen.get(&record.id) {
                return Err(CorpusError::DuplicateId {
                    id: record.id,
                    first_line,
                    second_line: line_no,
                });
            }
            seen.insert(record.id.clone(), line_no);
            records.push(record);
        }
        Ok(Dataset { records })
    }

    /// One compact JSON object per line, fields in schema order, LF endings.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialise"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        std::fs::write(path, self.to_jsonl()).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

pub fn load_dataset(path: &Path) -> Result<Dataset, CorpusError> {
    let contents = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Dataset::parse_jsonl(&contents)
}

/// Marks `test_per_novel` records of every novel as test (uniformly, without
/// replacement) and the rest as train. Novels are processed in identifier
/// order, each from its own seeded stream.
pub fn make_split(dataset: &Dataset, test_per_novel: usize, seed: u64) -> Result<Dataset, CorpusError> {
    let mut by_novel: BTreeMap<&Novel, Vec<usize>> = BTreeMap::new();
    for (i, r) in dataset.records.iter().enumerate() {
        by_novel.entry(&r.novel).or_default().push(i);
    }
    let mut records = dataset.records.clone();
    for r in &mut records {
        r.split = Split::Train;
    }
    for (novel, indices) in by_novel {
        if indices.len() < test_per_novel {
            return Err(CorpusError::InsufficientData {
                novel: novel.to_string(),
                available: indices.len(),
                requested: test_per_novel,
            });
        }
        let mut stream = rng::derived_stream(seed, &[rng::hash_str(novel.id())]);
        for pick in index::sample(&mut stream, indices.len(), test_per_novel) {
            records[indices[pick]].split = Split::Test;
        }
    }
    Dataset::new(records)
}
