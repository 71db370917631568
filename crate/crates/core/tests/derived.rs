//! Hand-derived example values, each checked against an oracle computed in
//! the test from first principles rather than through the code under test.

use std::collections::HashMap;

use childadapt::corpus::{DatasetRecord, Novel, Split};
use childadapt::decoding::{lookahead_step, rollout, DecodeConfig};
use childadapt::evaluation::{char_bleu, corpus_red_cn, evaluate_run, pearson, EvalSettings};
use childadapt::instruction::{match_characters, CharacterProfile, TraitScore, Traits};
use childadapt::lm::{generate, nucleus, perplexity, LanguageModel, NgramModel, Strategy, TokenId, Vocabulary};
use childadapt::preference::build_pairs;
use childadapt::readability::{gaussian_normalize, ReadabilityConfig, RedCnScore, Scorer};
use childadapt::text::{
    adverb_conjunction_ratio, char_frequency_score, compute_indicators, FrequencyTable, LexiconTagger, PosTag,
    TaggedToken, Tagger,
};

const EPS: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < EPS
}

/// Reference longest-match segmentation over an explicit word list.
fn longest_match(text: &str, words: &[&str]) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let mut len = 1;
        for w in words {
            let wc: Vec<char> = w.chars().collect();
            if chars[i..].starts_with(&wc) && wc.len() > len {
                len = wc.len();
            }
        }
        out.push(chars[i..i + len].iter().collect());
        i += len;
    }
    out
}

#[test]
fn longest_match_tagging() {
    let tagger = LexiconTagger::from_entries([("很快地", PosTag::Adv)]);
    let got = tagger.tag("他很快地跑").unwrap();
    let expected: Vec<TaggedToken> = longest_match("他很快地跑", &["很快地"])
        .into_iter()
        .map(|s| {
            let pos = if s == "很快地" { PosTag::Adv } else { PosTag::Other };
            TaggedToken::new(s, pos)
        })
        .collect();
    assert_eq!(got, expected);
    assert_eq!(got.len(), 3);
}

#[test]
fn adverb_ratio_one_in_twenty() {
    let mut tokens = vec![TaggedToken::new("就", PosTag::Adv)];
    tokens.extend((0..19).map(|_| TaggedToken::new("天", PosTag::Other)));
    assert!(close(adverb_conjunction_ratio(&tokens), 1.0 / 20.0 * 100.0));
}

#[test]
fn frequency_mean_of_two() {
    let table = FrequencyTable::from_scores([('甲', 90.0), ('乙', 80.0)]).unwrap();
    assert!(close(char_frequency_score("甲乙", &table), (90.0 + 80.0) / 2.0));
}

#[test]
fn sentence_ratios_are_averaged() {
    let table = FrequencyTable::from_scores([('天', 50.0)]).unwrap();
    let tagger = LexiconTagger::from_entries([("就", PosTag::Adv)]);
    // 1 of 25 tokens, then 3 of 50 tokens
    let s1 = format!("就{}。", "天".repeat(24));
    let s2 = format!("就就就{}。", "天".repeat(47));
    let ind = compute_indicators(&"天".repeat(100), &(s1 + &s2), &table, &tagger).unwrap();
    let oracle = (100.0 * 1.0 / 25.0 + 100.0 * 3.0 / 50.0) / 2.0;
    assert!(close(ind.r_ac, oracle));
    assert!(close(ind.r_ac, 5.0));
}

#[test]
fn one_sigma_gaussians() {
    let oracle = (-0.5f64).exp();
    assert!((gaussian_normalize(2.5, 5.0, 2.5).unwrap() - 0.606531).abs() < 1e-6);
    assert!(close(gaussian_normalize(2.5, 5.0, 2.5).unwrap(), oracle));
    assert!(close(gaussian_normalize(85.0 + 42.5, 85.0, 42.5).unwrap(), oracle));
}

#[test]
fn weighted_total() {
    let cfg = ReadabilityConfig::default();
    let s = RedCnScore::from_components(0.5, 1.0, 0.4, &cfg);
    assert!(close(s.total, 100.0 * (0.3 * 0.5 + 0.4 * 1.0 + 0.3 * 0.4)));
    assert!(close(s.total, 67.0));
}

#[test]
fn on_target_sentence_at_half_length() {
    let table = FrequencyTable::from_scores([('天', 85.0), ('就', 85.0)]).unwrap();
    let scorer = Scorer::new(
        table,
        LexiconTagger::from_entries([("就", PosTag::Adv)]),
        ReadabilityConfig::default(),
    );
    // 20 tokens with one adverb: r_ac = 5, r_f = 85, output half of a 40-token original
    let output = format!("就{}。", "天".repeat(19));
    let s = scorer.score(&"天".repeat(40), &output).unwrap();
    assert!(close(s.indicators.r_ac, 5.0));
    assert!(close(s.indicators.r_f, 85.0));
    assert!(close(s.score.total, 100.0 * (0.3 + 0.4 + 0.3 * 0.5)));
    assert!(close(s.score.total, 85.0));
}

/// Laplace-smoothed bigram probability computed from raw counts.
fn laplace(count: f64, total: f64, alpha: f64, v: f64) -> f64 {
    (count + alpha) / (total + alpha * v)
}

fn ab_model() -> (NgramModel, TokenId, TokenId) {
    let m = NgramModel::train(&["ab"], 2, 1.0).unwrap();
    let a = m.vocab().id("a").unwrap();
    let b = m.vocab().id("b").unwrap();
    (m, a, b)
}

#[test]
fn ab_bigram_probability() {
    let (m, a, b) = ab_model();
    assert_eq!(m.vocab().len(), 4);
    // after "a": one observed "b" out of one event
    let oracle = laplace(1.0, 1.0, 1.0, 4.0);
    assert!(close(m.probability(&[Vocabulary::BOS, a], b), oracle));
    assert!(close(oracle, 0.4));
    assert!(close(m.next_token_logprobs(&[a])[b.index()].exp(), 0.4));
}

#[test]
fn ab_greedy_starts_with_hand_argmax() {
    let (m, a, _) = ab_model();
    // after BOS only "a" was observed; every other token has zero count
    let vocab: Vec<TokenId> = m.vocab().ids().collect();
    let probs: Vec<f64> = vocab
        .iter()
        .map(|&t| laplace(if t == a { 1.0 } else { 0.0 }, 1.0, 1.0, 4.0))
        .collect();
    let best = vocab[probs
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1).then(y.0.cmp(&x.0)))
        .unwrap()
        .0];
    let out = generate(&m, &[Vocabulary::BOS], 5, &Strategy::Greedy);
    assert_eq!(out[0], best);
    assert_eq!(best, a);
}

#[test]
fn ab_perplexity_on_training_string() {
    let (m, a, b) = ab_model();
    // P(a|BOS) P(b|a) P(EOS|b), each one observed event out of one
    let p = laplace(1.0, 1.0, 1.0, 4.0);
    let oracle = (p * p * p).powf(-1.0 / 3.0);
    let got = perplexity(&m, &[a, b, Vocabulary::EOS]).unwrap();
    assert!(close(got, oracle));
    assert!(close(got, 2.5));
}

#[test]
fn ab_greedy_rollout_chain() {
    let (m, a, b) = ab_model();
    // hand trace: a -> b (0.4 vs 0.2) -> EOS (0.4 vs 0.2), stop at EOS
    let r = rollout(&m, &[Vocabulary::BOS], a, 5, &Strategy::Greedy, 0);
    assert_eq!(r, vec![a, b, Vocabulary::EOS]);
}

#[test]
fn nucleus_keeps_only_the_head() {
    let lp = [0.7f64.ln(), 0.2f64.ln(), 0.1f64.ln()];
    // cumulative masses 0.7, 0.9, 1.0: the first already reaches 0.6
    let kept = nucleus(&lp, 0.6, 1.0);
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].0, TokenId(0));
    assert!(close(kept[0].1, 1.0));
}

/// Four-token model: BOS/EOS plus two characters, fixed bigram table.
struct Toy {
    vocab: Vocabulary,
    rows: Vec<[f64; 4]>,
}

impl LanguageModel for Toy {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_token_logprobs(&self, context: &[TokenId]) -> Vec<f64> {
        let prev = context.last().copied().unwrap_or(Vocabulary::BOS);
        self.rows[prev.index()].iter().map(|p| p.ln()).collect()
    }
}

#[test]
fn large_lambda_picks_best_guided_rollout() {
    let vocab = Vocabulary::from_chars(['甲', '乙']);
    let (jia, yi) = (vocab.id("甲").unwrap(), vocab.id("乙").unwrap());
    let mut rows = vec![[0.25; 4]; 4];
    // greedy would start with 乙; 甲 continues with the frequent 甲
    rows[Vocabulary::BOS.index()] = [0.05, 0.05, 0.6, 0.3];
    rows[jia.index()] = [0.1, 0.05, 0.05, 0.8];
    rows[yi.index()] = [0.1, 0.05, 0.8, 0.05];
    assert_eq!((jia, yi), (TokenId(3), TokenId(2)));
    let model = Toy { vocab, rows };
    let scorer = Scorer::new(
        FrequencyTable::from_scores([('甲', 90.0), ('乙', 10.0)]).unwrap(),
        LexiconTagger::from_entries([("就", PosTag::Adv)]),
        ReadabilityConfig::default(),
    );
    let original = "甲乙甲乙甲乙";
    let cfg = DecodeConfig {
        num_candidates: 4,
        lookahead_n: 2,
        lambda: 1000.0,
        ..DecodeConfig::default()
    };
    let prefix = [Vocabulary::BOS];
    let (chosen, _) = lookahead_step(&model, &prefix, &[], original, &cfg, &scorer).unwrap();

    // enumerate every first token and its greedy second token by hand
    let greedy_after = |t: TokenId| -> TokenId {
        let row = model.rows[t.index()];
        let best = (0..4)
            .max_by(|&x, &y| row[x].total_cmp(&row[y]).then(y.cmp(&x)))
            .unwrap();
        TokenId(best as u32)
    };
    let mut best: Option<(f64, TokenId)> = None;
    for id in 0..4u32 {
        let t = TokenId(id);
        let mut seq = vec![t];
        if t != Vocabulary::EOS {
            seq.push(greedy_after(t));
        }
        let g = scorer.guidance(original, &model.vocab.decode(&seq)).unwrap();
        if best.is_none_or(|(bg, _)| g > bg) {
            best = Some((g, t));
        }
    }
    assert_eq!(chosen, best.unwrap().1);
    assert_eq!(chosen, jia);
    assert_ne!(chosen, model.greedy_next(&prefix));
}

#[test]
fn preference_pairs_hand_enumerated() {
    let scores = [73.0, 69.0, 75.0, 71.0];
    let cands: Vec<(String, f64)> = scores.iter().map(|&s| (format!("t{s}"), s)).collect();
    let got: Vec<(f64, f64)> = build_pairs("r", "p", &cands, 3.0)
        .iter()
        .map(|p| (p.chosen_score, p.rejected_score))
        .collect();
    let mut oracle = Vec::new();
    for i in 0..scores.len() {
        for j in i + 1..scores.len() {
            let (hi, lo) = if scores[i] >= scores[j] {
                (scores[i], scores[j])
            } else {
                (scores[j], scores[i])
            };
            if hi - lo >= 3.0 {
                oracle.push((hi, lo));
            }
        }
    }
    oracle.sort_by(|a, b| (b.0 - b.1).total_cmp(&(a.0 - a.1)));
    assert_eq!(got, oracle);
    assert_eq!(got, vec![(75.0, 69.0), (73.0, 69.0), (75.0, 71.0)]);
}

#[test]
fn preference_pairs_per_record() {
    let records: [(&str, &[f64]); 3] = [
        ("r1", &[80.0, 70.0]),
        ("r2", &[50.0, 51.0, 52.0]),
        ("r3", &[10.0, 20.0, 13.0]),
    ];
    let mut got = Vec::new();
    for (id, scores) in records {
        let cands: Vec<(String, f64)> = scores
            .iter()
            .enumerate()
            .map(|(i, &s)| (format!("{id}-{i}"), s))
            .collect();
        got.extend(
            build_pairs(id, "p", &cands, 3.0)
                .into_iter()
                .map(|p| (p.chosen, p.rejected)),
        );
    }
    // r1: gap 10; r2: largest gap 2, nothing; r3: 20-10 and 20-13, 13-10 = 3 kept
    let expected: Vec<(String, String)> = [("r1-0", "r1-1"), ("r3-1", "r3-0"), ("r3-1", "r3-2"), ("r3-2", "r3-0")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    assert_eq!(got, expected);
}

fn profile(name: &str) -> CharacterProfile {
    let t = || TraitScore::new(3, "平常");
    CharacterProfile {
        novel: Novel::JourneyToTheWest,
        name: name.into(),
        aliases: vec![],
        traits: Traits::from_array([t(), t(), t(), t(), t()]),
    }
}

#[test]
fn matches_follow_text_order() {
    let roster = [profile("唐僧"), profile("悟空")];
    let text = "悟空拜别唐僧。";
    let got: Vec<&str> = match_characters(text, &roster)
        .iter()
        .map(|p| p.name.as_str())
        .collect();
    let mut oracle: Vec<(usize, &str)> = roster
        .iter()
        .map(|p| (text.find(&p.name).unwrap(), p.name.as_str()))
        .collect();
    oracle.sort();
    assert_eq!(got, oracle.into_iter().map(|x| x.1).collect::<Vec<_>>());
}

#[test]
fn unigram_bleu_hand_count() {
    // clipped matches: a, b of three candidate tokens; equal lengths
    let got = char_bleu(&["abc"], &["abd"], 1).unwrap();
    assert!((got - 100.0 * 2.0 / 3.0).abs() < EPS);
    assert!((got - 66.67).abs() < 0.01);
}

fn record(id: &str, original: &str, adapted: &str) -> DatasetRecord {
    DatasetRecord {
        id: id.into(),
        novel: Novel::JourneyToTheWest,
        chapter: 1,
        original: original.into(),
        adapted: adapted.into(),
        split: Split::Test,
    }
}

/// A scorer whose total is 100 × (1 − output/input) in characters.
fn length_only_scorer() -> Scorer {
    let cfg = ReadabilityConfig {
        weight_ac: 0.0,
        weight_f: 0.0,
        weight_t: 1.0,
        ..ReadabilityConfig::default()
    };
    Scorer::new(
        FrequencyTable::default(),
        LexiconTagger::from_entries([("就", PosTag::Adv)]),
        cfg,
    )
}

#[test]
fn corpus_red_cn_mean_of_sixty_and_eighty() {
    let scorer = length_only_scorer();
    let r1 = record("a", &"天".repeat(10), "");
    let r2 = record("b", &"天".repeat(10), "");
    // 4 of 10 tokens kept -> 60, 2 of 10 -> 80
    let outputs = HashMap::from([("a".to_string(), "天".repeat(4)), ("b".to_string(), "天".repeat(2))]);
    let got = corpus_red_cn(&[&r1, &r2], &outputs, &scorer).unwrap();
    assert!(close(got, (60.0 + 80.0) / 2.0));
}

#[test]
fn pearson_closed_form() {
    let (x, y) = ([1.0, 2.0, 3.0], [1.0, 3.0, 2.0]);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (mx, my) = (mean(&x), mean(&y));
    let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>().sqrt();
    let sy: f64 = y.iter().map(|b| (b - my).powi(2)).sum::<f64>().sqrt();
    let got = pearson(&x, &y).unwrap();
    assert!(close(got, cov / (sx * sy)));
    assert!(close(got, 0.5));
}

const GOLDEN_REPORT: &str = include_str!("golden/report_small.json");

#[test]
fn small_run_matches_golden_report() {
    let scorer = length_only_scorer();
    let records = [
        record("r1", "天地人和", "天地"),
        record("r2", "山高水长", "山水"),
        record("r3", "日月星辰", "日月"),
    ];
    let outputs = HashMap::from([
        ("r1".to_string(), "天地".to_string()),
        ("r2".to_string(), "山长".to_string()),
        ("r3".to_string(), "星".to_string()),
    ]);
    let refs: Vec<&DatasetRecord> = records.iter().collect();
    let report = evaluate_run(
        &refs,
        &outputs,
        &scorer,
        EvalSettings::new(Some(Split::Test), scorer.config),
    )
    .unwrap();

    // hand counts: unigram matches 2 + 1 + 0 of c = 5, r = 6 -> BP = exp(1 - 6/5)
    let bp = (1.0f64 - 6.0 / 5.0).exp();
    assert!(close(report.bleu1, 100.0 * bp * 3.0 / 5.0));
    // bigram matches: "天地" only, 1 of 2 candidate bigrams
    assert!(close(report.bleu2, 100.0 * bp * (3.0f64 / 5.0 * 1.0 / 2.0).sqrt()));
    // lengths 2/4, 2/4, 1/4 of the original
    assert!(close(report.red_cn_mean, (50.0 + 50.0 + 75.0) / 3.0));

    let rendered = serde_json::to_string_pretty(&report).unwrap() + "\n";
    assert_eq!(rendered, GOLDEN_REPORT);
}
