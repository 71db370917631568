//! Acceptance criteria, one line per criterion. Runs without the libtest
//! harness so that every criterion reports even when an earlier one fails.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use childadapt::corpus::{DatasetRecord, Split};
use childadapt::decoding::{instruction_prefix, lookahead_decode, lookahead_step, DecodeConfig};
use childadapt::evaluation::{bleu_n, corpus_red_cn};
use childadapt::instruction::{parse_personality_response, parse_triplet_response, InstructionError, Malformed};
use childadapt::lm::{generate, LanguageModel, Strategy as Policy, TokenId, Vocabulary};
use childadapt::preference::{build_pairs, rank_pairs, PreferenceConfig};
use childadapt::readability::{gaussian_normalize, length_indicator, ReadabilityConfig, RedCnScore, Scorer};
use childadapt::resources;
use childadapt::text::{FrequencyTable, LexiconTagger, PosTag};

use common::{data, path, read, run, sources};

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    }};
}

fn c1_metric_constants() -> Outcome {
    let cfg = ReadabilityConfig::default();
    ensure!(
        gaussian_normalize(5.0, cfg.target_ac, cfg.sigma_ac).unwrap() == 1.0,
        "ac peak"
    );
    ensure!(
        gaussian_normalize(85.0, cfg.target_f, cfg.sigma_f).unwrap() == 1.0,
        "f peak"
    );
    let half = (-0.5f64).exp();
    for v in [7.5, 2.5] {
        let g = gaussian_normalize(v, 5.0, 2.5).unwrap();
        ensure!((g - half).abs() < 1e-9, "ac one sigma at {v}: {g}");
    }
    for v in [127.5, 42.5] {
        let g = gaussian_normalize(v, 85.0, 42.5).unwrap();
        ensure!((g - half).abs() < 1e-9, "f one sigma at {v}: {g}");
    }
    ensure!(
        (cfg.weight_ac, cfg.weight_f, cfg.weight_t) == (0.3, 0.4, 0.3),
        "default weights"
    );
    let total = RedCnScore::from_components(0.5, 1.0, 0.4, &cfg).total;
    ensure!((total - 67.0).abs() < 1e-9, "total {total}");
    Ok(())
}

fn c2_length_table() -> Outcome {
    for (input, output, expected) in [(100, 100, 0.0), (100, 0, 1.0), (100, 140, 0.0), (100, 60, 0.4)] {
        let got = length_indicator(input, output).unwrap();
        ensure!(got == expected, "({input},{output}) gave {got}, expected {expected}");
    }
    Ok(())
}

fn c3_lookahead_reductions() -> Outcome {
    let model = resources::fixture_model();
    let scorer = resources::bundled_scorer(ReadabilityConfig::default());
    let vocab = model.vocab();
    let chars: Vec<TokenId> = vocab.ids().filter(|&t| !Vocabulary::is_special(t)).collect();
    let test: Vec<DatasetRecord> = resources::fixture_dataset().split(Split::Test).cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let max_len = 24;

    for prompt in 0..50 {
        let len = rng.random_range(0..30);
        let body: Vec<TokenId> = (0..len).map(|_| chars[rng.random_range(0..chars.len())]).collect();
        let instruction = vocab.decode(&body);
        let original = &test[rng.random_range(0..test.len())].original;
        let l = rng.random_range(1..=8);
        let n = rng.random_range(1..=20);
        let lambda = rng.random_range(0.01..20.0);

        let prefix = instruction_prefix(vocab, &instruction);
        let greedy = generate(&model, &prefix, prefix.len() + max_len, &Policy::Greedy);
        for cfg in [
            DecodeConfig {
                num_candidates: l,
                lookahead_n: n,
                lambda: 0.0,
                max_len,
                ..DecodeConfig::default()
            },
            DecodeConfig {
                num_candidates: 1,
                lookahead_n: n,
                lambda,
                max_len,
                ..DecodeConfig::default()
            },
        ] {
            let out = lookahead_decode(&model, &instruction, original, &cfg, &scorer).map_err(|e| e.to_string())?;
            ensure!(
                out.tokens == greedy,
                "prompt {prompt} (L={}, lambda={}) diverged",
                cfg.num_candidates,
                cfg.lambda
            );

            // the same reduction from a raw context without the response marker
            let mut context = vec![Vocabulary::BOS];
            context.extend(&body);
            let mut generated = Vec::new();
            for _ in 0..8 {
                let (chosen, _) =
                    lookahead_step(&model, &context, &generated, original, &cfg, &scorer).map_err(|e| e.to_string())?;
                let mut full = context.clone();
                full.extend(&generated);
                ensure!(chosen == model.greedy_next(&full), "prompt {prompt}: raw step diverged");
                generated.push(chosen);
                if chosen == Vocabulary::EOS {
                    break;
                }
            }
        }
    }
    Ok(())
}

/// Bigram model over EOS, BOS and a few characters.
struct Toy {
    vocab: Vocabulary,
    rows: Vec<Vec<f64>>,
}

impl LanguageModel for Toy {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn next_token_logprobs(&self, context: &[TokenId]) -> Vec<f64> {
        let prev = context.last().copied().unwrap_or(Vocabulary::BOS);
        self.rows[prev.index()].clone()
    }
}

/// Per-step exhaustive enumeration written directly from the selection rule:
/// every token is a candidate, its rollout is the token plus greedy
/// continuation up to `n` tokens, and the winner maximises
/// `logprob + lambda * G / 100`, ties going to the higher logprob and then
/// the smaller id.
fn oracle_decode(model: &Toy, original: &str, n: usize, lambda: f64, max_len: usize, scorer: &Scorer) -> Vec<TokenId> {
    let text = |ids: &[TokenId]| -> String { ids.iter().filter(|t| t.0 > 1).map(|t| model.vocab.form(*t)).collect() };
    let row = |prev: TokenId| &model.rows[prev.index()];
    let argmax = |r: &Vec<f64>| -> TokenId {
        let mut best = 0;
        for i in 1..r.len() {
            if r[i] > r[best] {
                best = i;
            }
        }
        TokenId(best as u32)
    };
    let mut out: Vec<TokenId> = Vec::new();
    while out.len() < max_len {
        let prev = out.last().copied().unwrap_or(Vocabulary::BOS);
        let lp = row(prev);
        let mut best: Option<(f64, f64, TokenId)> = None;
        for id in 0..model.vocab.len() as u32 {
            let t = TokenId(id);
            let mut seq = out.clone();
            seq.push(t);
            let mut last = t;
            for _ in 1..n {
                if last == Vocabulary::EOS {
                    break;
                }
                last = argmax(row(last));
                seq.push(last);
            }
            let g = scorer.guidance(original, &text(&seq)).unwrap();
            let combined = lp[t.index()] + lambda * g / 100.0;
            let better = match best {
                None => true,
                Some((bc, bl, bt)) => {
                    combined > bc || (combined == bc && (lp[t.index()] > bl || (lp[t.index()] == bl && t < bt)))
                }
            };
            if better {
                best = Some((combined, lp[t.index()], t));
            }
        }
        let chosen = best.unwrap().2;
        out.push(chosen);
        if chosen == Vocabulary::EOS {
            break;
        }
    }
    out
}

fn c4_brute_force_oracle() -> Outcome {
    const ALPHABET: [char; 6] = ['山', '水', '人', '大', '小', '天'];
    let scorer = Scorer::new(
        FrequencyTable::from_scores([('山', 95.0), ('水', 85.0), ('人', 70.0), ('大', 40.0), ('小', 15.0)]).unwrap(),
        LexiconTagger::from_entries([("大", PosTag::Adv), ("小", PosTag::Conj)]),
        ReadabilityConfig::default(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut disagreements_with_greedy = 0;
    for case in 0..20 {
        let chars = rng.random_range(1..=6);
        let vocab = Vocabulary::from_chars(ALPHABET[..chars].iter().copied());
        let v = vocab.len();
        let rows = (0..v)
            .map(|_| {
                let w: Vec<f64> = (0..v).map(|_| rng.random_range(0.01..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.iter().map(|x| (x / s).ln()).collect()
            })
            .collect();
        let model = Toy { vocab, rows };
        let olen = rng.random_range(1..10);
        let original: String = (0..olen).map(|_| ALPHABET[rng.random_range(0..6)]).collect();
        let n = rng.random_range(1..=2);
        let max_len = rng.random_range(1..=4);
        let lambda = rng.random_range(0.0..300.0);
        let cfg = DecodeConfig {
            num_candidates: v,
            lookahead_n: n,
            lambda,
            max_len,
            ..DecodeConfig::default()
        };

        let got = lookahead_decode(&model, "", &original, &cfg, &scorer).map_err(|e| e.to_string())?;
        let expected = oracle_decode(&model, &original, n, lambda, max_len, &scorer);
        ensure!(
            got.tokens == expected,
            "case {case}: {:?} vs oracle {:?}",
            got.tokens,
            expected
        );
        let greedy = generate(&model, &[Vocabulary::BOS], 1 + max_len, &Policy::Greedy);
        disagreements_with_greedy += usize::from(greedy != expected);
    }
    // guard against a vacuous oracle: guidance must matter somewhere
    ensure!(disagreements_with_greedy > 0, "guidance never changed a decode");
    Ok(())
}

fn c5_preference_pairs() -> Outcome {
    let scores = [73.0, 69.0, 75.0, 71.0];
    let cands: Vec<(String, f64)> = scores.iter().map(|s| (format!("候选{s}"), *s)).collect();
    let got: Vec<(f64, f64)> = build_pairs("r", "p", &cands, 3.0)
        .iter()
        .map(|p| (p.chosen_score, p.rejected_score))
        .collect();
    let mut sorted = got.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut want = vec![(75.0, 69.0), (73.0, 69.0), (75.0, 71.0)];
    want.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ensure!(sorted == want, "pairs {got:?}");

    let mut runner = TestRunner::new(Config {
        cases: 1000,
        ..Config::default()
    });
    let strategy = (prop::collection::vec(0.0f64..100.0, 0..8), 0.0f64..20.0, 0.0f64..20.0);
    runner
        .run(&strategy, |(scores, a, b)| {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let low = rank_pairs(&scores, lo);
            let high = rank_pairs(&scores, hi);
            prop_assert!(high.len() <= low.len());
            for p in &high {
                prop_assert!(low.contains(p));
                prop_assert!(scores[p.0] - scores[p.1] >= hi);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn c6_sampling_defaults() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = path(dir.path(), "pairs.jsonl");
    let mut args = vec![
        "build-pairs".to_string(),
        "--dataset".into(),
        data("fixture_dataset.jsonl"),
    ];
    args.extend(["--model".into(), data("fixture.ngram")]);
    args.extend(sources());
    args.extend(["--n", "2", "--max-new-tokens", "16", "--out", &out].map(String::from));
    let r = run(&args);
    ensure!(r.code == 0, "build-pairs failed: {}", r.stderr);
    let cfg = &r.json()["config"];
    ensure!(cfg["k"] == 4, "k {}", cfg["k"]);
    ensure!(cfg["top_p"] == 0.9, "top_p {}", cfg["top_p"]);
    ensure!(cfg["temperature"] == 0.8, "temperature {}", cfg["temperature"]);
    let lib = PreferenceConfig::default();
    ensure!(
        (lib.k, lib.sampling.top_p, lib.sampling.temperature) == (4, 0.9, 0.8),
        "library defaults"
    );
    Ok(())
}

fn c7_bleu() -> Outcome {
    let toks = |s: &str| -> Vec<String> { s.split_whitespace().map(String::from).collect() };
    let same = bleu_n(&[toks("a b c d")], &[toks("a b c d")], 2).unwrap();
    ensure!((same - 100.0).abs() < 1e-9, "identical gave {same}");
    let b1 = bleu_n(&[toks("a b c")], &[toks("a b d")], 1).unwrap();
    ensure!((b1 - 66.67).abs() <= 0.01, "BLEU-1 {b1}");
    let disjoint = bleu_n(&[toks("a b c")], &[toks("x y z")], 2).unwrap();
    ensure!(disjoint == 0.0, "disjoint gave {disjoint}");

    let corpus = prop::collection::vec(
        (
            prop::collection::vec(0u8..8, 0..15),
            prop::collection::vec(0u8..8, 1..15),
        ),
        1..6,
    );
    let perm = Just((0u8..8).collect::<Vec<u8>>()).prop_shuffle();
    let mut runner = TestRunner::new(Config {
        cases: 100,
        ..Config::default()
    });
    runner
        .run(&(corpus, perm), |(pairs, perm)| {
            let (c, r): (Vec<Vec<u8>>, Vec<Vec<u8>>) = pairs.into_iter().unzip();
            let relabel = |xs: &[Vec<u8>]| -> Vec<Vec<u8>> {
                xs.iter()
                    .map(|s| s.iter().map(|&t| perm[t as usize]).collect())
                    .collect()
            };
            for n in 1..=2 {
                let a = bleu_n(&c, &r, n).unwrap();
                let b = bleu_n(&relabel(&c), &relabel(&r), n).unwrap();
                prop_assert!((a - b).abs() < 1e-9);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

const PERSONALITY_BLOCK: &str = " 经验开放性：5，创新冒险。 \n 尽责性：3，随性自由。\n外向性：4，活泼好动。 \n  亲和性：3，慷慨侠义。 \n 神经质：2，冲动易怒。  \n";
const TRIPLET_BLOCK: &str =
    " <妖道, 询问, 和尚>，<和尚, 来自, 唐朝>，<和尚, 奉命, 大唐皇帝>，<和尚, 前往, 西方>，<和尚, 目的, 访求经偈> ... ";

fn c8_parsers() -> Outcome {
    let traits = parse_personality_response(PERSONALITY_BLOCK).map_err(|e| e.to_string())?;
    ensure!(traits.scores() == [5, 3, 4, 3, 2], "scores {:?}", traits.scores());
    let triplets = parse_triplet_response(TRIPLET_BLOCK).map_err(|e| e.to_string())?;
    ensure!(triplets.len() >= 2, "only {} triplets", triplets.len());
    ensure!(
        (
            triplets[0].head.as_str(),
            triplets[0].relation.as_str(),
            triplets[0].tail.as_str()
        ) == ("妖道", "询问", "和尚"),
        "first triplet {:?}",
        triplets[0]
    );

    let missing = PERSONALITY_BLOCK.replace("神经质：2，冲动易怒。", "");
    ensure!(
        matches!(
            parse_personality_response(&missing),
            Err(InstructionError::MalformedResponse(Malformed::Personality { ref missing, .. })) if missing.len() == 1
        ),
        "missing trait not reported"
    );
    let out_of_range = PERSONALITY_BLOCK.replace("外向性：4", "外向性：7");
    ensure!(
        matches!(
            parse_personality_response(&out_of_range),
            Err(InstructionError::MalformedResponse(Malformed::Personality { ref invalid, .. })) if invalid.len() == 1
        ),
        "out-of-range score not reported"
    );
    match parse_triplet_response("<a, b>") {
        Err(InstructionError::MalformedResponse(Malformed::Triplets { groups })) => {
            ensure!(groups.len() == 1 && groups[0].arity == 2, "groups {groups:?}")
        }
        other => return Err(format!("arity-2 group gave {other:?}")),
    }
    Ok(())
}

fn c9_directional_corpus() -> Outcome {
    let dataset = resources::fixture_dataset();
    let scorer = resources::bundled_scorer(ReadabilityConfig::default());
    let records: Vec<&DatasetRecord> = dataset.split(Split::Test).collect();
    ensure!(!records.is_empty(), "no test records");
    let adapted: HashMap<String, String> = records.iter().map(|r| (r.id.clone(), r.adapted.clone())).collect();
    let original: HashMap<String, String> = records.iter().map(|r| (r.id.clone(), r.original.clone())).collect();
    let a = corpus_red_cn(&records, &adapted, &scorer).map_err(|e| e.to_string())?;
    let o = corpus_red_cn(&records, &original, &scorer).map_err(|e| e.to_string())?;
    ensure!(a > o, "adapted {a:.2} <= original {o:.2}");
    println!("      corpus Red-CN: adapted {a:.2}, original {o:.2}");
    Ok(())
}

fn sweep_args(out: &str, extra: &[&str]) -> Vec<String> {
    let mut args = vec!["sweep".to_string(), "--dataset".into(), data("fixture_dataset.jsonl")];
    args.extend(["--model".into(), data("fixture.ngram")]);
    args.extend(sources());
    args.extend(extra.iter().map(|s| s.to_string()));
    args.extend(["--out".into(), out.into()]);
    args
}

struct Row {
    l: usize,
    n: usize,
    lambda: f64,
    wall_ms: f64,
}

fn parse_sweep(csv: &str) -> Result<Vec<Row>, String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().ok_or("empty csv")?.split(',').collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or(format!("no {name} column"))
    };
    let (l, n, lambda, wall) = (col("L")?, col("n")?, col("lambda")?, col("wall_ms")?);
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let num = |i: usize| {
                f.get(i)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or(format!("bad row {line}"))
            };
            Ok(Row {
                l: num(l)? as usize,
                n: num(n)? as usize,
                lambda: num(lambda)?,
                wall_ms: num(wall)?,
            })
        })
        .collect()
}

/// Max wall time over rows with the larger value must reach the min over
/// rows with the smaller one.
fn coarse_monotone(rows: &[Row], key: impl Fn(&Row) -> usize, values: &[usize]) -> Outcome {
    let over = |v: usize| -> Vec<f64> { rows.iter().filter(|r| key(r) == v).map(|r| r.wall_ms).collect() };
    for w in values.windows(2) {
        let min_small = over(w[0]).into_iter().fold(f64::INFINITY, f64::min);
        let max_large = over(w[1]).into_iter().fold(f64::NEG_INFINITY, f64::max);
        ensure!(
            max_large >= min_small,
            "wall time at {} ({max_large} ms) below {} ({min_small} ms)",
            w[1],
            w[0]
        );
    }
    Ok(())
}

fn c10_sweep() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = path(dir.path(), "sweep.csv");
    let r = run(sweep_args(&out, &[]));
    ensure!(r.code == 0, "sweep failed: {}", r.stderr);
    let rows = parse_sweep(&String::from_utf8_lossy(&read(&out)))?;
    ensure!(rows.len() == 9, "{} rows", rows.len());
    for l in [2, 5, 8] {
        ensure!(rows.iter().any(|r| r.l == l), "L={l} missing");
    }
    for n in [10, 20, 50] {
        ensure!(rows.iter().any(|r| r.n == n), "n={n} missing");
    }
    for lambda in [0.5, 1.0, 2.0] {
        ensure!(rows.iter().any(|r| r.lambda == lambda), "lambda={lambda} missing");
    }
    coarse_monotone(&rows, |r| r.l, &[2, 5, 8])?;
    coarse_monotone(&rows, |r| r.n, &[10, 20, 50])?;
    Ok(())
}

/// Runs a subcommand twice, writing to `a/` then `b/`, and compares the
/// named artifacts byte for byte.
fn twice(root: &Path, label: &str, build: impl Fn(&Path) -> Vec<String>, artifacts: &[&str]) -> Outcome {
    let mut contents = Vec::new();
    for side in ["a", "b"] {
        let dir = root.join(label).join(side);
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        let r = run(build(&dir));
        ensure!(r.code == 0, "{label} failed: {}", r.stderr);
        let files: Vec<Vec<u8>> = artifacts.iter().map(|a| read(dir.join(a))).collect();
        contents.push((r.stdout.replace(&dir.display().to_string(), "<dir>"), files));
    }
    ensure!(contents[0].1 == contents[1].1, "{label}: artifacts differ");
    ensure!(contents[0].0 == contents[1].0, "{label}: summaries differ");
    Ok(())
}

fn without_wall_ms(csv: &[u8]) -> String {
    String::from_utf8_lossy(csv)
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

fn c11_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let ds = data("fixture_dataset.jsonl");
    let model = data("fixture.ngram");
    let s = |x: &str| x.to_string();
    let p = |d: &Path, f: &str| path(d, f);

    let original = p(root, "original.txt");
    let adapted = p(root, "adapted.txt");
    let first = resources::fixture_dataset()
        .split(Split::Test)
        .next()
        .cloned()
        .ok_or("no test record")?;
    std::fs::write(&original, &first.original).map_err(|e| e.to_string())?;
    std::fs::write(&adapted, &first.adapted).map_err(|e| e.to_string())?;

    // score has no artifact; its summary is compared
    twice(
        root,
        "score",
        |_| {
            vec![
                s("score"),
                s("--text"),
                adapted.clone(),
                s("--original"),
                original.clone(),
            ]
        },
        &[],
    )?;
    twice(
        root,
        "split",
        |d| vec![s("split"), s("--dataset"), ds.clone(), s("--out"), p(d, "o.jsonl")],
        &["o.jsonl"],
    )?;
    twice(
        root,
        "train-lm",
        |d| vec![s("train-lm"), s("--dataset"), ds.clone(), s("--out"), p(d, "m.ngram")],
        &["m.ngram"],
    )?;
    twice(
        root,
        "build-instruction",
        |d| {
            let mut a = vec![s("build-instruction"), s("--dataset"), ds.clone()];
            a.extend(sources());
            a.extend([s("--split"), s("test"), s("--out"), p(d, "ins.jsonl")]);
            a
        },
        &["ins.jsonl"],
    )?;
    twice(
        root,
        "annotate-personality",
        |d| {
            let fixtures = data("fixtures");
            vec![
                s("annotate"),
                s("personality"),
                s("--fixtures"),
                fixtures,
                s("--novel"),
                s("journey_to_the_west"),
                s("--character"),
                s("孙悟空"),
                s("--out"),
                p(d, "profiles.json"),
            ]
        },
        &["profiles.json"],
    )?;
    twice(
        root,
        "annotate-triplets",
        |d| {
            vec![
                s("annotate"),
                s("triplets"),
                s("--fixtures"),
                data("fixtures"),
                s("--dataset"),
                ds.clone(),
                s("--limit"),
                s("5"),
                s("--out"),
                p(d, "triplets.json"),
            ]
        },
        &["triplets.json"],
    )?;
    twice(
        root,
        "build-pairs",
        |d| {
            let mut a = vec![
                s("build-pairs"),
                s("--dataset"),
                ds.clone(),
                s("--model"),
                model.clone(),
            ];
            a.extend(sources());
            a.extend(["--n", "8", "--max-new-tokens", "32", "--seed", "7", "--out"].map(String::from));
            a.push(p(d, "pairs.jsonl"));
            a
        },
        &["pairs.jsonl"],
    )?;
    twice(
        root,
        "decode-single",
        |d| {
            vec![
                s("decode"),
                s("--model"),
                model.clone(),
                s("--original"),
                original.clone(),
                s("--rollout"),
                s("top-p"),
                s("--max-len"),
                s("40"),
                s("--trace"),
                p(d, "trace.jsonl"),
                s("--out"),
                p(d, "out.txt"),
            ]
        },
        &["trace.jsonl", "out.txt"],
    )?;
    let subset = p(root, "subset.jsonl");
    let lines: Vec<String> = String::from_utf8_lossy(&read(&ds))
        .lines()
        .filter(|l| l.contains("\"split\":\"test\""))
        .take(10)
        .map(String::from)
        .collect();
    std::fs::write(&subset, lines.join("\n") + "\n").map_err(|e| e.to_string())?;
    twice(
        root,
        "decode-batch",
        |d| {
            let mut a = vec![s("decode"), s("--model"), model.clone(), s("--dataset"), subset.clone()];
            a.extend(sources());
            a.extend([s("--max-len"), s("60"), s("--outputs"), p(d, "outputs.jsonl")]);
            a
        },
        &["outputs.jsonl"],
    )?;
    let outputs = p(root, "outputs.jsonl");
    std::fs::copy(root.join("decode-batch/a/outputs.jsonl"), &outputs).map_err(|e| e.to_string())?;
    twice(
        root,
        "evaluate",
        |d| {
            vec![
                s("evaluate"),
                s("--dataset"),
                subset.clone(),
                s("--outputs"),
                outputs.clone(),
                s("--report"),
                p(d, "report.json"),
            ]
        },
        &["report.json"],
    )?;

    // sweep rows carry wall-clock timings, which are compared separately
    let mut csvs = Vec::new();
    for side in ["a", "b"] {
        let out = p(root, &format!("sweep-{side}.csv"));
        let r = run(sweep_args(&out, &["--limit", "20"]));
        ensure!(r.code == 0, "sweep failed: {}", r.stderr);
        csvs.push(without_wall_ms(&read(&out)));
    }
    ensure!(csvs[0] == csvs[1], "sweep: rows differ outside wall_ms");
    Ok(())
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("metric constants", Duration::from_secs(1), c1_metric_constants),
        ("length indicator table", Duration::from_secs(1), c2_length_table),
        ("lookahead reductions", Duration::from_secs(10), c3_lookahead_reductions),
        ("brute-force oracle", Duration::from_secs(60), c4_brute_force_oracle),
        ("preference pairs", Duration::from_secs(10), c5_preference_pairs),
        ("sampling defaults", Duration::from_secs(1), c6_sampling_defaults),
        ("BLEU", Duration::from_secs(10), c7_bleu),
        ("response parsers", Duration::from_secs(1), c8_parsers),
        (
            "directional corpus property",
            Duration::from_secs(10),
            c9_directional_corpus,
        ),
        ("sweep harness", Duration::from_secs(300), c10_sweep),
        ("determinism", Duration::from_secs(120), c11_determinism),
    ];
    // libtest passes its own flags; only a name filter is honoured
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        if filter.as_deref().is_some_and(|f| !name.contains(f)) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let result = result.and_then(|()| {
            if elapsed < budget {
                Ok(())
            } else {
                Err(format!("took {elapsed:.2?}, budget {budget:?}"))
            }
        });
        match result {
            Ok(()) => println!("PASS  criterion {:>2}: {name} ({elapsed:.2?})", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  criterion {:>2}: {name} ({elapsed:.2?}): {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    }
}
