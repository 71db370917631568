use super::parse::parse_triplet_response;
use super::{match_characters, BigFive, CharacterProfile, InstructionError, TraitScore, Traits, Triplet};
use crate::corpus::DatasetRecord;

pub const PREAMBLE: &str = "请将以下中国经典名著原文内容改编为适合儿童阅读的版本。你需要依据大五人格理论对角色评估的分数，突出人物的性格特征。并利用实体-关系三元组来构建故事的叙事框架，适当简化或省略一些复杂的叙事情节。";

/// Stands in for an empty character or triplet block.
pub const EMPTY_MARKER: &str = "无";

const CHARACTER_HEADER: &str = "# 人物性格：";
const TRIPLET_HEADER: &str = "# 实体关系三元组：";
const ORIGINAL_HEADER: &str = "# 原文内容：";

#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub profiles: Vec<CharacterProfile>,
    pub triplets: Vec<Triplet>,
    pub original: String,
    pub rendered: String,
}

/// What a block-splitting parser can recover from a rendered instruction.
/// Novel and aliases are not part of the rendering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedInstruction {
    pub characters: Vec<(String, Traits)>,
    pub triplets: Vec<Triplet>,
    pub original: String,
}

fn character_line(p: &CharacterProfile) -> String {
    let clauses: String = p
        .traits
        .iter()
        .map(|(t, s)| format!("{}：{}，{}。", t.label(), s.score, s.desc))
        .collect();
    format!("{}：[{}]", p.name, clauses)
}

/// `<h，r，t>，<h，r，t>。`, or the empty marker.
pub fn render_triplets(triplets: &[Triplet]) -> String {
    if triplets.is_empty() {
        return EMPTY_MARKER.to_string();
    }
    let joined: Vec<String> = triplets.iter().map(Triplet::to_string).collect();
    format!("{}。", joined.join("，"))
}

/// Renders the integrative instruction: preamble, character block, triplet
/// block and original block, in that order. Every profile must be mentioned
/// in the original by name or alias.
pub fn assemble_instruction(
    profiles: &[CharacterProfile],
    triplets: &[Triplet],
    original: &str,
) -> Result<Instruction, InstructionError> {
    if original.trim().is_empty() {
        return Err(InstructionError::EmptyOriginal);
    }
    for p in profiles {
        p.validate()?;
        if p.first_occurrence(original).is_none() {
            return Err(InstructionError::ProfileNotInOriginal { name: p.name.clone() });
        }
    }
    let characters = if profiles.is_empty() {
        EMPTY_MARKER.to_string()
    } else {
        profiles.iter().map(character_line).collect::<Vec<_>>().join("\n")
    };
    let rendered = format!(
        "{PREAMBLE}\n{CHARACTER_HEADER}\n{characters}\n{TRIPLET_HEADER}\n{}\n{ORIGINAL_HEADER}\n{original}",
        render_triplets(triplets)
    );
    Ok(Instruction {
        profiles: profiles.to_vec(),
        triplets: triplets.to_vec(),
        original: original.to_string(),
        rendered,
    })
}

/// The instruction for a dataset record: roster profiles of the record's
/// novel that are mentioned in its original, the given triplets, and the
/// original itself.
pub fn record_instruction(
    record: &DatasetRecord,
    roster: &[CharacterProfile],
    triplets: &[Triplet],
) -> Result<Instruction, InstructionError> {
    let same_novel: Vec<CharacterProfile> = roster.iter().filter(|p| p.novel == record.novel).cloned().collect();
    let profiles: Vec<CharacterProfile> = match_characters(&record.original, &same_novel)
        .into_iter()
        .cloned()
        .collect();
    assemble_instruction(&profiles, triplets, &record.original)
}

fn malformed(m: impl Into<String>) -> InstructionError {
    InstructionError::MalformedInstruction(m.into())
}

fn parse_character_line(line: &str) -> Result<(String, Traits), InstructionError> {
    let (name, rest) = line
        .split_once('：')
        .ok_or_else(|| malformed(format!("character line {line:?} has no name")))?;
    let body = rest
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| malformed(format!("character line {line:?} is not bracketed")))?;
    let clauses: Vec<&str> = body.split_terminator('。').collect();
    if clauses.len() != 5 {
        return Err(malformed(format!(
            "character {name:?} has {} trait clauses",
            clauses.len()
        )));
    }
    let mut entries = Vec::with_capacity(5);
    for (clause, expected) in clauses.iter().zip(BigFive::ALL) {
        let parsed = clause.split_once('：').and_then(|(label, rest)| {
            let (score, desc) = rest.split_once('，')?;
            (BigFive::from_label(label) == Some(expected))
                .then(|| score.parse::<u8>().ok().map(|s| TraitScore::new(s, desc)))
                .flatten()
        });
        entries.push(parsed.ok_or_else(|| malformed(format!("bad trait clause {clause:?}")))?);
    }
    let entries: [TraitScore; 5] = entries.try_into().expect("five clauses");
    Ok((name.to_string(), Traits::from_array(entries)))
}

/// Splits a rendered instruction back into its blocks.
pub fn parse_instruction(rendered: &str) -> Result<ParsedInstruction, InstructionError> {
    let find = |haystack: &str, header: &str| {
        let marker = format!("\n{header}\n");
        haystack
            .find(&marker)
            .map(|i| (i, i + marker.len()))
            .ok_or_else(|| malformed(format!("missing block {header}")))
    };
    let preamble = format!("{PREAMBLE}\n{CHARACTER_HEADER}\n");
    let body = rendered
        .strip_prefix(&preamble)
        .ok_or_else(|| malformed("missing preamble or character block"))?;
    let (chars_end, triplets_start) = find(body, TRIPLET_HEADER)?;
    let (triplets_end, original_start) =
        find(&body[triplets_start..], ORIGINAL_HEADER).map(|(a, b)| (a + triplets_start, b + triplets_start))?;

    let char_block = &body[..chars_end];
    let characters = if char_block == EMPTY_MARKER {
        Vec::new()
    } else {
        char_block.lines().map(parse_character_line).collect::<Result<_, _>>()?
    };
    let triplet_block = &body[triplets_start..triplets_end];
    let triplets = if triplet_block == EMPTY_MARKER {
        Vec::new()
    } else {
        parse_triplet_response(triplet_block)?
    };
    Ok(ParsedInstruction {
        characters,
        triplets,
        original: body[original_start..].to_string(),
    })
}

/// Prompt asking an annotator to score one character on the Big Five traits.
pub fn personality_prompt(novel_title: &str, character: &str) -> String {
    format!(
        "请根据大五人格特质分析角色：开放性、尽责性、外向性、亲和性、神经质。\
         对{novel_title}中{character}的性格进行分析，每个特质分配一个分数（1-5），\
         并为每个分数提供简短的解释（最多 10 个字）。分数越高，表示该特质的存在感越强。请遵循以下格式：\n\
         经验开放性：2，好奇但保守。\n\
         尽责性：1，轻浮不认真。\n\
         外向性：4，社交活跃。\n\
         亲和性：3，有些自私。\n\
         神经质：1，易怒冲动。"
    )
}

/// Prompt asking an annotator for `<A, R, B>` triplets of one fragment.
pub fn triplet_prompt(text: &str) -> String {
    format!(
        "请根据下面文本，抽取故事叙事过程当中的实体和关系，用格式<A, R, B>的形式来进行输出，\
         其中A和B分别是头实体和尾实体，R代表实体之间的关系。输入文本：{text}"
    )
}
