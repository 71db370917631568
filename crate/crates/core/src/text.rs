//! Sentence segmentation, POS tagging and the raw readability indicators.
//!
//! Indicators are computed per sentence and then averaged over the sentences
//! of a text:
//!
//! * `r_ac`: percentage of tokens tagged as adverbs or conjunctions.
//! * `r_f`: mean character-frequency score of the CJK characters.
//!
//! Tokens come from a [`Tagger`]. The bundled [`LexiconTagger`] performs
//! greedy longest-match against a word list and falls back to single
//! characters, so the same tokenizer also provides the token counts used by
//! the length indicator.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("tagger lexicon is empty")]
    TaggerNotLoaded,
    #[error("original text has no tokens")]
    EmptyOriginal,
    #[error("{source_name}:{line}: {message}")]
    Table {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn table_err(source_name: &str, line: usize, message: impl Into<String>) -> TextError {
    TextError::Table {
        source_name: source_name.to_string(),
        line,
        message: message.into(),
    }
}

fn read_file(path: &Path) -> Result<String, TextError> {
    std::fs::read_to_string(path).map_err(|source| TextError::Io {
        path: path.display().to_string(),
        source,
    })
}

const TERMINATORS: [char; 5] = ['。', '！', '？', '；', '\n'];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    pub index: usize,
}

/// Splits on 。！？； and newlines, keeping the terminator with its sentence.
///
/// A trailing unterminated fragment becomes the last sentence; fragments that
/// are empty or whitespace-only are dropped.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let mut out = Vec::new();
    let push = |frag: &str, out: &mut Vec<Sentence>| {
        if !frag.trim().is_empty() {
            let index = out.len();
            out.push(Sentence {
                text: frag.to_string(),
                index,
            });
        }
    };
    let mut start = 0;
    for (i, c) in text.char_indices() {
        if TERMINATORS.contains(&c) {
            let end = i + c.len_utf8();
            push(&text[start..end], &mut out);
            start = end;
        }
    }
    push(&text[start..], &mut out);
    out
}

/// CJK unified ideographs (basic block, extension A, compatibility, and the
/// supplementary-plane extensions).
pub fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF | 0x3400..=0x4DBF | 0xF900..=0xFAFF | 0x20000..=0x2FA1F)
}

/// Whitespace, ASCII punctuation, and the common CJK/full-width punctuation
/// blocks. Punctuation never forms a token.
pub fn is_punctuation(c: char) -> bool {
    c.is_whitespace()
        || c.is_ascii_punctuation()
        || matches!(c as u32,
            0x2000..=0x206F | 0x3000..=0x303F | 0xFE10..=0xFE1F | 0xFE30..=0xFE4F
            | 0xFF01..=0xFF0F | 0xFF1A..=0xFF20 | 0xFF3B..=0xFF40 | 0xFF5B..=0xFF65)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PosTag {
    Adv,
    Conj,
    Other,
}

impl PosTag {
    /// Collapses a fine-grained tag from an external tagger (jieba/ICTCLAS,
    /// CTB, or Universal Dependencies conventions) onto the three-way set.
    pub fn collapse(fine: &str) -> PosTag {
        match fine.trim() {
            "ADV" | "AD" | "d" | "dg" => PosTag::Adv,
            "CONJ" | "CCONJ" | "SCONJ" | "CC" | "CS" | "c" | "cc" => PosTag::Conj,
            _ => PosTag::Other,
        }
    }

    pub fn is_adv_or_conj(self) -> bool {
        matches!(self, PosTag::Adv | PosTag::Conj)
    }
}

impl fmt::Display for PosTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PosTag::Adv => "ADV",
            PosTag::Conj => "CONJ",
            PosTag::Other => "OTHER",
        })
    }
}

impl FromStr for PosTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ADV" => Ok(PosTag::Adv),
            "CONJ" => Ok(PosTag::Conj),
            "OTHER" => Ok(PosTag::Other),
            other => Err(format!("unknown tag {other:?} (expected ADV, CONJ or OTHER)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedToken {
    pub surface: String,
    pub pos: PosTag,
}

impl TaggedToken {
    pub fn new(surface: impl Into<String>, pos: PosTag) -> Self {
        Self {
            surface: surface.into(),
            pos,
        }
    }
}

/// A POS tagger. Implementations must return tokens with collapsed tags and
/// must not emit punctuation tokens.
pub trait Tagger: Send + Sync {
    fn tag(&self, text: &str) -> Result<Vec<TaggedToken>, TextError>;

    fn count_tokens(&self, text: &str) -> Result<usize, TextError> {
        Ok(self.tag(text)?.len())
    }
}

pub fn tag_tokens(sentence: &Sentence, tagger: &dyn Tagger) -> Result<Vec<TaggedToken>, TextError> {
    tagger.tag(&sentence.text)
}

/// Dictionary tagger: greedy longest match, single-character fallback.
#[derive(Debug, Clone, Default)]
pub struct LexiconTagger {
    entries: HashMap<String, PosTag>,
    max_chars: usize,
}

impl LexiconTagger {
    pub fn from_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, PosTag)>,
        S: Into<String>,
    {
        let mut tagger = LexiconTagger::default();
        for (word, tag) in entries {
            tagger.insert(word.into(), tag);
        }
        tagger
    }

    fn insert(&mut self, word: String, tag: PosTag) {
        self.max_chars = self.max_chars.max(word.chars().count());
        self.entries.insert(word, tag);
    }

    /// Parses `<token>\t<TAG>` lines. Blank lines are skipped.
    pub fn parse(source_name: &str, contents: &str) -> Result<Self, TextError> {
        let mut tagger = LexiconTagger::default();
        for (i, line) in contents.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (word, tag) = line
                .split_once('\t')
                .ok_or_else(|| table_err(source_name, line_no, "expected <token>\\t<TAG>"))?;
            if word.is_empty() || word.chars().any(is_punctuation) {
                return Err(table_err(
                    source_name,
                    line_no,
                    "token must be non-empty and free of punctuation",
                ));
            }
            let tag: PosTag = tag
                .trim()
                .parse()
                .map_err(|e: String| table_err(source_name, line_no, e))?;
            if tagger.entries.contains_key(word) {
                return Err(table_err(source_name, line_no, format!("duplicate token {word:?}")));
            }
            tagger.insert(word.to_string(), tag);
        }
        Ok(tagger)
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        Self::parse(&path.display().to_string(), &read_file(path)?)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn tag_run(&self, run: &[char], out: &mut Vec<TaggedToken>) {
        let mut i = 0;
        let mut buf = String::new();
        while i < run.len() {
            let longest = self.max_chars.min(run.len() - i).max(1);
            let mut matched = None;
            for len in (1..=longest).rev() {
                buf.clear();
                buf.extend(&run[i..i + len]);
                if let Some(&tag) = self.entries.get(&buf) {
                    matched = Some((len, tag));
                    break;
                }
            }
            let (len, tag) = matched.unwrap_or((1, PosTag::Other));
            out.push(TaggedToken::new(run[i..i + len].iter().collect::<String>(), tag));
            i += len;
        }
    }
}

impl Tagger for LexiconTagger {
    fn tag(&self, text: &str) -> Result<Vec<TaggedToken>, TextError> {
        if self.entries.is_empty() {
            return Err(TextError::TaggerNotLoaded);
        }
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        for run in chars.split(|&c| is_punctuation(c)) {
            if !run.is_empty() {
                self.tag_run(run, &mut out);
            }
        }
        Ok(out)
    }
}

/// Percentage of tokens tagged ADV or CONJ; 0 for an empty list.
pub fn adverb_conjunction_ratio(tokens: &[TaggedToken]) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    let hits = tokens.iter().filter(|t| t.pos.is_adv_or_conj()).count();
    100.0 * hits as f64 / tokens.len() as f64
}

pub const MAX_FREQUENCY_ENTRIES: usize = 5000;

/// Character → frequency score in [0, 100]. Absent characters score 0.
#[derive(Debug, Clone, Default)]
pub struct FrequencyTable {
    entries: HashMap<char, f64>,
}

impl FrequencyTable {
    pub fn from_scores<I: IntoIterator<Item = (char, f64)>>(scores: I) -> Result<Self, TextError> {
        let mut table = FrequencyTable::default();
        for (i, (c, score)) in scores.into_iter().enumerate() {
            table.insert("<memory>", i + 1, c, score)?;
        }
        Ok(table)
    }

    fn insert(&mut self, source_name: &str, line: usize, c: char, score: f64) -> Result<(), TextError> {
        if !(0.0..=100.0).contains(&score) {
            return Err(table_err(source_name, line, format!("score {score} outside [0, 100]")));
        }
        if self.entries.contains_key(&c) {
            return Err(table_err(source_name, line, format!("duplicate character {c:?}")));
        }
        if self.entries.len() == MAX_FREQUENCY_ENTRIES {
            return Err(table_err(
                source_name,
                line,
                format!("table exceeds {MAX_FREQUENCY_ENTRIES} entries"),
            ));
        }
        self.entries.insert(c, score);
        Ok(())
    }

    /// Parses `<char>\t<score>` lines, score with at most 4 fraction digits.
    pub fn parse(source_name: &str, contents: &str) -> Result<Self, TextError> {
        let mut table = FrequencyTable::default();
        for (i, line) in contents.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (ch, score) = line
                .split_once('\t')
                .ok_or_else(|| table_err(source_name, line_no, "expected <char>\\t<score>"))?;
            let mut chars = ch.chars();
            let c = match (chars.next(), chars.next()) {
                (Some(c), None) => c,
                _ => {
                    return Err(table_err(
                        source_name,
                        line_no,
                        format!("{ch:?} is not a single character"),
                    ))
                }
            };
            let score_str = score.trim();
            if score_str.split_once('.').is_some_and(|(_, frac)| frac.len() > 4) {
                return Err(table_err(source_name, line_no, "score has more than 4 fraction digits"));
            }
            let value: f64 = score_str
                .parse()
                .map_err(|_| table_err(source_name, line_no, format!("invalid score {score_str:?}")))?;
            table.insert(source_name, line_no, c, value)?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        Self::parse(&path.display().to_string(), &read_file(path)?)
    }

    pub fn score(&self, c: char) -> f64 {
        self.entries.get(&c).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Mean frequency score over the CJK characters of `text`; 0 if it has none.
pub fn char_frequency_score(text: &str, table: &FrequencyTable) -> f64 {
    let (sum, n) = text
        .chars()
        .filter(|&c| is_cjk(c))
        .fold((0.0, 0usize), |(sum, n), c| (sum + table.score(c), n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Raw readability indicators of one output text relative to its original.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSet {
    pub r_ac: f64,
    pub r_f: f64,
    /// Length indicator; filled in by [`crate::readability`].
    pub r_t: Option<f64>,
    pub input_len: usize,
    pub output_len: usize,
}

/// Per-sentence indicators averaged over the output's sentences.
///
/// Sentences that yield no tokens (punctuation-only fragments such as a lone
/// closing quote) carry no readability signal and are left out of the means.
pub fn compute_indicators(
    original: &str,
    output: &str,
    table: &FrequencyTable,
    tagger: &dyn Tagger,
) -> Result<IndicatorSet, TextError> {
    let input_len = tagger.count_tokens(original)?;
    output_indicators(input_len, output, table, tagger)
}

/// [`compute_indicators`] with the original's token count precomputed.
pub fn output_indicators(
    input_len: usize,
    output: &str,
    table: &FrequencyTable,
    tagger: &dyn Tagger,
) -> Result<IndicatorSet, TextError> {
    if input_len == 0 {
        return Err(TextError::EmptyOriginal);
    }
    let mut output_len = 0;
    let (mut ac_sum, mut f_sum, mut counted) = (0.0, 0.0, 0usize);
    for sentence in split_sentences(output) {
        let tokens = tag_tokens(&sentence, tagger)?;
        if tokens.is_empty() {
            continue;
        }
        output_len += tokens.len();
        ac_sum += adverb_conjunction_ratio(&tokens);
        f_sum += char_frequency_score(&sentence.text, table);
        counted += 1;
    }
    let mean = |s: f64| if counted == 0 { 0.0 } else { s / counted as f64 };
    Ok(IndicatorSet {
        r_ac: mean(ac_sum),
        r_f: mean(f_sum),
        r_t: None,
        input_len,
        output_len,
    })
}
