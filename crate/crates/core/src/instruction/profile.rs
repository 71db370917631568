use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::InstructionError;
use crate::corpus::Novel;
use crate::text::is_cjk;

/// Upper bound on a trait description, counted by [`description_units`].
pub const MAX_DESCRIPTION_UNITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BigFive {
    Openness,
    Conscientiousness,
    Extraversion,
    Agreeableness,
    Neuroticism,
}

impl BigFive {
    pub const ALL: [BigFive; 5] = [
        BigFive::Openness,
        BigFive::Conscientiousness,
        BigFive::Extraversion,
        BigFive::Agreeableness,
        BigFive::Neuroticism,
    ];

    pub fn key(self) -> &'static str {
        match self {
            BigFive::Openness => "openness",
            BigFive::Conscientiousness => "conscientiousness",
            BigFive::Extraversion => "extraversion",
            BigFive::Agreeableness => "agreeableness",
            BigFive::Neuroticism => "neuroticism",
        }
    }

    /// Label used in rendered instructions and personality responses.
    pub fn label(self) -> &'static str {
        match self {
            BigFive::Openness => "经验开放性",
            BigFive::Conscientiousness => "尽责性",
            BigFive::Extraversion => "外向性",
            BigFive::Agreeableness => "亲和性",
            BigFive::Neuroticism => "神经质",
        }
    }

    /// Recognises Chinese and English trait labels, case-insensitively.
    pub fn from_label(label: &str) -> Option<BigFive> {
        let l = label.trim().to_lowercase();
        let t = match l.as_str() {
            "经验开放性" | "开放性" | "openness" | "openness to experience" => BigFive::Openness,
            "尽责性" | "conscientiousness" => BigFive::Conscientiousness,
            "外向性" | "extraversion" | "extroversion" => BigFive::Extraversion,
            "亲和性" | "宜人性" | "agreeableness" => BigFive::Agreeableness,
            "神经质" | "neuroticism" | "neuroticism or emotional stability" => BigFive::Neuroticism,
            _ => return None,
        };
        Some(t)
    }
}

impl fmt::Display for BigFive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

/// Length of a description: each CJK character and each run of other
/// alphanumerics counts as one unit; punctuation and spaces are free.
pub fn description_units(desc: &str) -> usize {
    let mut units = 0;
    let mut in_word = false;
    for c in desc.chars() {
        if is_cjk(c) {
            units += 1;
            in_word = false;
        } else if c.is_alphanumeric() {
            if !in_word {
                units += 1;
            }
            in_word = true;
        } else {
            in_word = false;
        }
    }
    units
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraitScore {
    pub score: u8,
    pub desc: String,
}

impl TraitScore {
    pub fn new(score: u8, desc: impl Into<String>) -> Self {
        Self {
            score,
            desc: desc.into(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(1..=5).contains(&self.score) {
            return Err(format!("score {} is outside 1-5", self.score));
        }
        if self.desc.trim().is_empty() {
            return Err("description is empty".into());
        }
        if self.desc.contains(['。', '[', ']', '\n']) {
            return Err(format!("description {:?} contains a reserved character", self.desc));
        }
        let units = description_units(&self.desc);
        if units > MAX_DESCRIPTION_UNITS {
            return Err(format!(
                "description {:?} has {units} units, at most {MAX_DESCRIPTION_UNITS} allowed",
                self.desc
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Traits {
    pub openness: TraitScore,
    pub conscientiousness: TraitScore,
    pub extraversion: TraitScore,
    pub agreeableness: TraitScore,
    pub neuroticism: TraitScore,
}

impl Traits {
    pub fn get(&self, t: BigFive) -> &TraitScore {
        match t {
            BigFive::Openness => &self.openness,
            BigFive::Conscientiousness => &self.conscientiousness,
            BigFive::Extraversion => &self.extraversion,
            BigFive::Agreeableness => &self.agreeableness,
            BigFive::Neuroticism => &self.neuroticism,
        }
    }

    /// Builds from five entries in [`BigFive::ALL`] order.
    pub fn from_array(entries: [TraitScore; 5]) -> Self {
        let [openness, conscientiousness, extraversion, agreeableness, neuroticism] = entries;
        Self {
            openness,
            conscientiousness,
            extraversion,
            agreeableness,
            neuroticism,
        }
    }

    pub fn scores(&self) -> [u8; 5] {
        BigFive::ALL.map(|t| self.get(t).score)
    }

    pub fn iter(&self) -> impl Iterator<Item = (BigFive, &TraitScore)> {
        BigFive::ALL.into_iter().map(move |t| (t, self.get(t)))
    }

    pub fn validate(&self) -> Result<(), String> {
        for (t, s) in self.iter() {
            s.validate().map_err(|m| format!("{t}: {m}"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacterProfile {
    pub novel: Novel,
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub traits: Traits,
}

impl CharacterProfile {
    pub fn validate(&self) -> Result<(), InstructionError> {
        let invalid = |message: String| InstructionError::InvalidProfile {
            name: self.name.clone(),
            message,
        };
        for n in std::iter::once(&self.name).chain(&self.aliases) {
            if n.trim().is_empty() || n.contains(['：', ':', '[', ']', '\n']) {
                return Err(invalid(format!(
                    "name or alias {n:?} is empty or contains a reserved character"
                )));
            }
        }
        self.traits.validate().map_err(invalid)
    }

    /// Name followed by aliases.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.name.as_str()).chain(self.aliases.iter().map(String::as_str))
    }

    /// Byte offset of the earliest occurrence of the name or any alias.
    pub fn first_occurrence(&self, text: &str) -> Option<usize> {
        self.names().filter_map(|n| text.find(n)).min()
    }
}

/// Roster profiles mentioned in `text` (by name or alias), ordered by first
/// mention; roster order breaks ties.
pub fn match_characters<'a>(text: &str, roster: &'a [CharacterProfile]) -> Vec<&'a CharacterProfile> {
    let mut hits: Vec<(usize, usize)> = roster
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.first_occurrence(text).map(|pos| (pos, i)))
        .collect();
    hits.sort_unstable();
    let mut seen = HashSet::new();
    hits.into_iter()
        .filter(|&(_, i)| seen.insert((&roster[i].novel, &roster[i].name)))
        .map(|(_, i)| &roster[i])
        .collect()
}

pub fn load_profiles(path: &Path) -> Result<Vec<CharacterProfile>, InstructionError> {
    parse_profiles(&path.display().to_string(), &read(path)?)
}

pub fn parse_profiles(source_name: &str, json: &str) -> Result<Vec<CharacterProfile>, InstructionError> {
    let profiles: Vec<CharacterProfile> = from_json(source_name, json)?;
    let mut seen = HashSet::new();
    for p in &profiles {
        p.validate()?;
        if !seen.insert((&p.novel, &p.name)) {
            return Err(InstructionError::InvalidProfile {
                name: p.name.clone(),
                message: format!("duplicate profile for novel {}", p.novel),
            });
        }
    }
    Ok(profiles)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawTriplet")]
pub struct Triplet {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTriplet {
    head: String,
    relation: String,
    tail: String,
}

impl TryFrom<RawTriplet> for Triplet {
    type Error = InstructionError;

    fn try_from(raw: RawTriplet) -> Result<Self, Self::Error> {
        Triplet::new(raw.head, raw.relation, raw.tail)
    }
}

impl Triplet {
    /// Fields are trimmed and must be non-empty and free of the delimiters
    /// used by the `<A, R, B>` notation.
    pub fn new(
        head: impl Into<String>,
        relation: impl Into<String>,
        tail: impl Into<String>,
    ) -> Result<Self, InstructionError> {
        let clean = |s: String| -> Result<String, InstructionError> {
            let t = s.trim();
            if t.is_empty() || t.contains(['<', '>', ',', '，', '\n']) {
                return Err(InstructionError::InvalidTriplet(format!(
                    "field {s:?} is empty or contains a delimiter"
                )));
            }
            Ok(t.to_string())
        };
        Ok(Self {
            head: clean(head.into())?,
            relation: clean(relation.into())?,
            tail: clean(tail.into())?,
        })
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}，{}，{}>", self.head, self.relation, self.tail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordTriplets {
    pub record_id: String,
    pub triplets: Vec<Triplet>,
}

pub fn load_triplets(path: &Path) -> Result<Vec<RecordTriplets>, InstructionError> {
    parse_triplets(&path.display().to_string(), &read(path)?)
}

pub fn parse_triplets(source_name: &str, json: &str) -> Result<Vec<RecordTriplets>, InstructionError> {
    let entries: Vec<RecordTriplets> = from_json(source_name, json)?;
    let mut seen = HashSet::new();
    for e in &entries {
        if !seen.insert(&e.record_id) {
            return Err(InstructionError::Json {
                path: source_name.to_string(),
                message: format!("duplicate record_id {:?}", e.record_id),
            });
        }
    }
    Ok(entries)
}

pub fn save_triplets(entries: &[RecordTriplets], path: &Path) -> Result<(), InstructionError> {
    // one record per line keeps large files diffable
    let lines: Vec<String> = entries
        .iter()
        .map(|e| serde_json::to_string(e).expect("triplets serialise"))
        .collect();
    let text = format!("[\n{}\n]\n", lines.join(",\n"));
    std::fs::write(path, text).map_err(|source| InstructionError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read(path: &Path) -> Result<String, InstructionError> {
    std::fs::read_to_string(path).map_err(|source| InstructionError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn from_json<T: serde::de::DeserializeOwned>(source_name: &str, json: &str) -> Result<T, InstructionError> {
    serde_json::from_str(json).map_err(|e| InstructionError::Json {
        path: source_name.to_string(),
        message: e.to_string(),
    })
}
