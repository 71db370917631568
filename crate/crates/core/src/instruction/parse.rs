use std::collections::BTreeMap;

use super::{BigFive, InstructionError, Malformed, TraitScore, Traits, Triplet};

/// A `<…>` group that did not split into three non-empty fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BadGroup {
    pub text: String,
    pub arity: usize,
}

fn split_once_any<'a>(s: &'a str, seps: &[char]) -> Option<(&'a str, &'a str)> {
    let i = s.find(seps)?;
    let sep_len = s[i..].chars().next().map_or(0, char::len_utf8);
    Some((&s[..i], &s[i + sep_len..]))
}

/// Parses lines of the form `<label>：<score>，<description>`.
///
/// Full-width and ASCII separators are both accepted, a trailing full stop
/// is dropped and lines without a recognised trait label are ignored. All
/// five traits must appear exactly once with scores in 1-5.
pub fn parse_personality_response(raw: &str) -> Result<Traits, InstructionError> {
    let mut found: BTreeMap<BigFive, TraitScore> = BTreeMap::new();
    let mut duplicate = Vec::new();
    let mut invalid = Vec::new();

    for line in raw.lines() {
        let line = line.trim().trim_start_matches(['-', '*', '•']).trim();
        let Some((label, rest)) = split_once_any(line, &['：', ':']) else {
            continue;
        };
        let Some(t) = BigFive::from_label(label) else {
            continue;
        };
        let (score, desc) = split_once_any(rest, &['，', ',']).unwrap_or((rest, ""));
        let desc = desc.trim().trim_end_matches(['。', '.']).trim();
        let entry = match score.trim().parse::<u8>() {
            Ok(s) => TraitScore::new(s, desc),
            Err(_) => {
                invalid.push((t, score.trim().to_string()));
                continue;
            }
        };
        if let Err(m) = entry.validate() {
            invalid.push((t, m));
            continue;
        }
        match found.entry(t) {
            std::collections::btree_map::Entry::Occupied(_) => duplicate.push(t),
            std::collections::btree_map::Entry::Vacant(slot) => {
                slot.insert(entry);
            }
        }
    }

    let missing: Vec<BigFive> = BigFive::ALL
        .into_iter()
        .filter(|t| !found.contains_key(t) && !invalid.iter().any(|(u, _)| u == t))
        .collect();
    if !missing.is_empty() || !duplicate.is_empty() || !invalid.is_empty() {
        return Err(InstructionError::MalformedResponse(Malformed::Personality {
            missing,
            duplicate,
            invalid,
        }));
    }
    let mut take = |t| found.remove(&t).expect("all five present");
    Ok(Traits::from_array(BigFive::ALL.map(&mut take)))
}

/// The response format requested by [`super::personality_prompt`].
pub fn render_personality_response(traits: &Traits) -> String {
    traits
        .iter()
        .map(|(t, s)| format!("{}：{}，{}。\n", t.label(), s.score, s.desc))
        .collect()
}

/// Extracts every `<A, R, B>` group. Text outside groups is ignored; groups
/// that do not have exactly three non-empty fields, and a trailing unclosed
/// group, are all reported together.
pub fn parse_triplet_response(raw: &str) -> Result<Vec<Triplet>, InstructionError> {
    let mut triplets = Vec::new();
    let mut bad = Vec::new();
    let mut rest = raw;
    while let Some(open) = rest.find('<') {
        let after = &rest[open + 1..];
        let (inner, next) = match after.find(['<', '>']) {
            Some(i) if after[i..].starts_with('>') => (&after[..i], &after[i + 1..]),
            Some(i) => (&after[..i], &after[i..]),
            None => (after, ""),
        };
        let closed = rest[open + 1 + inner.len()..].starts_with('>');
        let fields: Vec<&str> = inner.split([',', '，']).map(str::trim).collect();
        let arity = fields.iter().filter(|f| !f.is_empty()).count();
        let group = format!("<{inner}{}", if closed { ">" } else { "" });
        match (closed, fields.as_slice()) {
            (true, [h, r, t]) if arity == 3 => triplets.push(Triplet::new(*h, *r, *t)?),
            _ => bad.push(BadGroup { text: group, arity }),
        }
        rest = next;
    }
    if bad.is_empty() {
        Ok(triplets)
    } else {
        Err(InstructionError::MalformedResponse(Malformed::Triplets { groups: bad }))
    }
}
