use std::collections::{HashMap, HashSet};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use childadapt::corpus::{make_split, Novel};
use childadapt::decoding::{lookahead_decode, training_text, DecodeConfig, DecodeError, Decoded};
use childadapt::evaluation::{evaluate_run, load_outputs, outputs_to_jsonl, EvalSettings, OutputLine};
use childadapt::instruction::{
    annotate_batch, assemble_instruction, save_triplets, Annotation, AnnotationClient, AnnotationRequest,
    CharacterProfile, InstructionError, RecordTriplets, RetryPolicy,
};
use childadapt::lm::{LanguageModel, NgramModel, SamplingConfig, Strategy};
use childadapt::preference::{build_preference_dataset, write_jsonl, PreferenceConfig};
use childadapt::sweep::{one_factor_grid, run_sweep, to_csv, BASE_POINT};

use crate::args::*;
use crate::common::*;

/// Reads a text argument file, dropping the trailing line break editors add.
fn read_doc(path: &Path) -> Result<String> {
    Ok(read_text(path)?.trim_end_matches(['\n', '\r']).to_string())
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

pub fn score(g: &GlobalArgs, a: &ScoreArgs) -> Result<()> {
    let scorer = scorer(&g.readability)?;
    let text = read_doc(&a.text)?;
    let original = read_doc(&a.original)?;
    let scored = scorer.score(&original, &text)?;
    let s = &scored.score;
    if g.verbose {
        let i = &scored.indicators;
        eprintln!("indicator        raw       normalized");
        eprintln!("adv/conj %   {:>9.4}   {:>9.4}", i.r_ac, s.norm_ac);
        eprintln!("char freq    {:>9.4}   {:>9.4}", i.r_f, s.norm_f);
        eprintln!(
            "length       {:>9}   {:>9.4}",
            format!("{}/{}", i.output_len, i.input_len),
            s.norm_t
        );
        eprintln!("Red-CN       {:>21.4}", s.total);
    }
    emit(json!({
        "command": "score",
        "config": {
            "text": path_str(&a.text),
            "original": path_str(&a.original),
            "readability": readability_echo(&g.readability, &scorer),
        },
        "indicators": scored.indicators,
        "norm_ac": s.norm_ac,
        "norm_f": s.norm_f,
        "norm_t": s.norm_t,
        "total": s.total,
    }));
    Ok(())
}

#[derive(Serialize)]
struct InstructionLine<'a> {
    id: &'a str,
    instruction: String,
}

pub fn build_instruction(a: &BuildInstructionArgs) -> Result<()> {
    let ds = dataset(&a.dataset)?;
    let instructions = Instructions::load(&a.sources)?;
    let records = match &a.id {
        Some(id) => {
            let r = ds
                .get(id)
                .ok_or_else(|| anyhow!("record {id:?} is not in {}", a.dataset.display()))?;
            write_text(&a.out, &instructions.render(r)?)?;
            1
        }
        None => {
            let lines = select(&ds, a.split)
                .into_iter()
                .map(|r| {
                    Ok(InstructionLine {
                        id: &r.id,
                        instruction: instructions.render(r)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            write_text(&a.out, &jsonl(&lines))?;
            lines.len()
        }
    };
    emit(json!({
        "command": "build-instruction",
        "config": {
            "dataset": path_str(&a.dataset),
            "instructions": Instructions::echo(&a.sources),
            "id": a.id,
            "split": if a.id.is_some() { None } else { Some(format!("{:?}", a.split).to_lowercase()) },
            "out": path_str(&a.out),
        },
        "records": records,
    }));
    Ok(())
}

fn client(a: &ClientArgs) -> Result<AnnotationClient> {
    let client = match &a.fixtures {
        Some(dir) => AnnotationClient::fixtures(dir),
        None => AnnotationClient::from_env().map_err(|e| match e {
            InstructionError::NotConfigured(m) => usage(m),
            other => other.into(),
        })?,
    };
    let retry = RetryPolicy {
        max_attempts: a.max_attempts,
        ..RetryPolicy::default()
    };
    Ok(client.with_model(&a.model).with_retry(retry))
}

fn client_echo(a: &ClientArgs) -> serde_json::Value {
    json!({
        "backend": match &a.fixtures {
            Some(dir) => format!("fixtures:{}", dir.display()),
            None => "live".to_string(),
        },
        "model": a.model,
        "max_in_flight": a.max_in_flight,
        "max_attempts": a.max_attempts,
    })
}

#[derive(Debug)]
struct RosterEntry {
    novel: Novel,
    name: String,
    aliases: Vec<String>,
}

/// `<novel>\t<name>[\t<alias>,<alias>…]` per line; blank lines and `#`
/// comments are skipped.
fn parse_roster(source: &str, contents: &str) -> Result<Vec<RosterEntry>> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in contents.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            bail!(
                "{source}:{line_no}: expected 2 or 3 tab-separated fields, found {}",
                fields.len()
            );
        }
        let novel = Novel::from_id(fields[0]).ok_or_else(|| anyhow!("{source}:{line_no}: empty novel id"))?;
        let name = fields[1].trim().to_string();
        if name.is_empty() {
            bail!("{source}:{line_no}: empty character name");
        }
        if !seen.insert((novel.clone(), name.clone())) {
            bail!("{source}:{line_no}: duplicate character {name:?} for novel {novel}");
        }
        let aliases = fields
            .get(2)
            .map(|a| {
                a.split([',', '，'])
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default();
        entries.push(RosterEntry { novel, name, aliases });
    }
    Ok(entries)
}

pub fn annotate(command: &AnnotateCommand) -> Result<()> {
    match command {
        AnnotateCommand::Personality(a) => annotate_personality(a),
        AnnotateCommand::Triplets(a) => annotate_triplets(a),
    }
}

fn annotate_personality(a: &PersonalityArgs) -> Result<()> {
    let roster = match (&a.roster, &a.novel) {
        (Some(path), _) => parse_roster(&path_str(path), &read_text(path)?)?,
        (None, Some(novel)) => {
            let source = a
                .character
                .iter()
                .map(|c| format!("{novel}\t{c}\n"))
                .collect::<String>();
            parse_roster("--character", &source)?
        }
        (None, None) => return Err(usage("give either --roster or --novel with --character")),
    };
    let client = client(&a.client)?;
    let requests: Vec<AnnotationRequest> = roster
        .iter()
        .map(|e| AnnotationRequest::Personality {
            novel_title: e.novel.title().to_string(),
            character: e.name.clone(),
        })
        .collect();
    let results = annotate_batch(&client, &requests, a.client.max_in_flight.into());
    let mut profiles = Vec::with_capacity(roster.len());
    for (entry, result) in roster.into_iter().zip(results) {
        let traits = match result.with_context(|| format!("annotating {} ({})", entry.name, entry.novel))? {
            Annotation::Personality(t) => t,
            Annotation::Triplets(_) => unreachable!("personality request"),
        };
        let profile = CharacterProfile {
            novel: entry.novel,
            name: entry.name,
            aliases: entry.aliases,
            traits,
        };
        profile.validate()?;
        profiles.push(profile);
    }
    let json = serde_json::to_string_pretty(&profiles).expect("profiles serialise") + "\n";
    write_text(&a.out, &json)?;
    emit(json!({
        "command": "annotate personality",
        "config": {
            "client": client_echo(&a.client),
            "roster": a.roster.as_deref().map(path_str),
            "out": path_str(&a.out),
        },
        "profiles": profiles.len(),
    }));
    Ok(())
}

fn annotate_triplets(a: &TripletArgs) -> Result<()> {
    let ds = dataset(&a.dataset)?;
    let mut records = select(&ds, a.split);
    if let Some(limit) = a.limit {
        records.truncate(limit);
    }
    let client = client(&a.client)?;
    let requests: Vec<AnnotationRequest> = records
        .iter()
        .map(|r| AnnotationRequest::Triplets {
            text: r.original.clone(),
        })
        .collect();
    let results = annotate_batch(&client, &requests, a.client.max_in_flight.into());
    let mut entries = Vec::with_capacity(records.len());
    for (record, result) in records.iter().zip(results) {
        let triplets = match result.with_context(|| format!("annotating record {}", record.id))? {
            Annotation::Triplets(t) => t,
            Annotation::Personality(_) => unreachable!("triplet request"),
        };
        entries.push(RecordTriplets {
            record_id: record.id.clone(),
            triplets,
        });
    }
    save_triplets(&entries, &a.out)?;
    let total: usize = entries.iter().map(|e| e.triplets.len()).sum();
    emit(json!({
        "command": "annotate triplets",
        "config": {
            "client": client_echo(&a.client),
            "dataset": path_str(&a.dataset),
            "split": format!("{:?}", a.split).to_lowercase(),
            "limit": a.limit,
            "out": path_str(&a.out),
        },
        "records": entries.len(),
        "triplets": total,
    }));
    Ok(())
}

pub fn build_pairs(g: &GlobalArgs, a: &BuildPairsArgs) -> Result<()> {
    let config = PreferenceConfig {
        n_prompts: a.n as usize,
        k: a.k as usize,
        sampling: SamplingConfig {
            top_p: a.top_p,
            temperature: a.temperature,
            seed: a.seed,
        },
        threshold: a.threshold,
        max_new_tokens: a.max_new_tokens as usize,
    };
    let scorer = scorer(&g.readability)?;
    let echo = json!({
        "dataset": path_str(&a.dataset),
        "model": path_str(&a.model),
        "instructions": Instructions::echo(&a.sources),
        "n": config.n_prompts,
        "k": config.k,
        "top_p": config.sampling.top_p,
        "temperature": config.sampling.temperature,
        "threshold": config.threshold,
        "seed": config.sampling.seed,
        "max_new_tokens": config.max_new_tokens,
        "readability": readability_echo(&g.readability, &scorer),
        "out": path_str(&a.out),
    });
    log::info!("build-pairs config: {echo}");
    let ds = dataset(&a.dataset)?;
    let model = load_model(&a.model)?;
    let instructions = Instructions::load(&a.sources)?;
    let prompts: HashMap<&str, String> = ds
        .records()
        .iter()
        .map(|r| Ok((r.id.as_str(), instructions.render(r)?)))
        .collect::<Result<_>>()?;
    let pairs = build_preference_dataset(ds.records(), &model, &config, &scorer, |r| {
        prompts[r.id.as_str()].clone()
    })?;
    write_jsonl(&pairs, &a.out)?;
    if g.verbose {
        eprintln!("{:<12} {:>8} {:>8} {:>6}", "record", "chosen", "rejected", "gap");
        for p in &pairs {
            eprintln!(
                "{:<12} {:>8.2} {:>8.2} {:>6.2}",
                p.record_id,
                p.chosen_score,
                p.rejected_score,
                p.chosen_score - p.rejected_score
            );
        }
    }
    let records: HashSet<&str> = pairs.iter().map(|p| p.record_id.as_str()).collect();
    emit(json!({
        "command": "build-pairs",
        "config": echo,
        "pairs": pairs.len(),
        "records_with_pairs": records.len(),
    }));
    Ok(())
}

fn decode_config(s: &DecodeSettings, model: &NgramModel) -> Result<DecodeConfig> {
    let rollout = match s.rollout {
        RolloutArg::Greedy => Strategy::Greedy,
        RolloutArg::TopP => Strategy::TopP(SamplingConfig {
            top_p: s.rollout_top_p,
            temperature: s.rollout_temperature,
            seed: s.seed,
        }),
    };
    let config = DecodeConfig {
        num_candidates: s.lookahead_l as usize,
        lookahead_n: s.lookahead_n as usize,
        lambda: s.lambda,
        max_len: s.max_len as usize,
        rollout,
        seed: s.seed,
    };
    validate_decode(&config, model)?;
    Ok(config)
}

fn validate_decode(config: &DecodeConfig, model: &NgramModel) -> Result<()> {
    config.validate(model.vocab().len()).map_err(|e| match e {
        DecodeError::InvalidConfig(m) => usage(m),
        other => other.into(),
    })
}

#[derive(Serialize)]
struct TraceCandidate<'a> {
    token: &'a str,
    logprob: f64,
    guidance: f64,
    combined: f64,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    step: usize,
    candidates: Vec<TraceCandidate<'a>>,
    chosen: &'a str,
}

fn trace_jsonl(decoded: &Decoded, model: &NgramModel) -> String {
    let vocab = model.vocab();
    let lines: Vec<TraceLine> = decoded
        .trace
        .iter()
        .map(|t| TraceLine {
            step: t.step,
            candidates: t
                .candidates
                .iter()
                .map(|c| TraceCandidate {
                    token: vocab.form(c.first_token),
                    logprob: c.logprob,
                    guidance: c.guidance_score,
                    combined: c.combined,
                })
                .collect(),
            chosen: vocab.form(t.chosen),
        })
        .collect();
    jsonl(&lines)
}

pub fn decode(g: &GlobalArgs, a: &DecodeArgs) -> Result<()> {
    let scorer = scorer(&g.readability)?;
    let model = load_model(&a.model)?;
    let config = decode_config(&a.settings, &model)?;
    let mut echo = json!({
        "model": path_str(&a.model),
        "decode": config,
        "readability": readability_echo(&g.readability, &scorer),
    });

    if let (Some(ds_path), Some(outputs)) = (&a.dataset, &a.outputs) {
        let ds = dataset(ds_path)?;
        let instructions = Instructions::load(&a.sources)?;
        let records = select(&ds, a.split);
        let prompts = records
            .iter()
            .map(|r| instructions.render(r))
            .collect::<Result<Vec<_>>>()?;
        let lines = records
            .par_iter()
            .zip(&prompts)
            .map(|(r, ins)| {
                let d = lookahead_decode(&model, ins, &r.original, &config, &scorer)
                    .with_context(|| format!("decoding record {}", r.id))?;
                log::info!("{}: {} tokens", r.id, d.tokens.len());
                Ok(OutputLine {
                    id: r.id.clone(),
                    text: d.text,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        write_text(outputs, &outputs_to_jsonl(&lines))?;
        echo["dataset"] = json!(path_str(ds_path));
        echo["instructions"] = Instructions::echo(&a.sources);
        echo["split"] = json!(format!("{:?}", a.split).to_lowercase());
        echo["outputs"] = json!(path_str(outputs));
        emit(json!({ "command": "decode", "config": echo, "records": lines.len() }));
        return Ok(());
    }

    let original_path = a
        .original
        .as_ref()
        .ok_or_else(|| usage("give --original or --dataset"))?;
    let original = read_doc(original_path)?;
    let instruction = match &a.instruction {
        Some(p) => read_doc(p)?,
        None => assemble_instruction(&[], &[], &original)?.rendered,
    };
    let decoded = lookahead_decode(&model, &instruction, &original, &config, &scorer)?;
    if let Some(path) = &a.trace {
        write_text(path, &trace_jsonl(&decoded, &model))?;
    }
    if let Some(path) = &a.out {
        write_text(path, &decoded.text)?;
    }
    if g.verbose {
        for t in &decoded.trace {
            let chosen = model.vocab().form(t.chosen);
            let row: Vec<String> = t
                .candidates
                .iter()
                .map(|c| format!("{}:{:.3}", model.vocab().form(c.first_token), c.combined))
                .collect();
            eprintln!("{:>4} {chosen}  [{}]", t.step, row.join(" "));
        }
    }
    echo["original"] = json!(path_str(original_path));
    echo["instruction"] = json!(a.instruction.as_deref().map(path_str));
    echo["trace"] = json!(a.trace.as_deref().map(path_str));
    echo["out"] = json!(a.out.as_deref().map(path_str));
    emit(json!({
        "command": "decode",
        "config": echo,
        "text": decoded.text,
        "tokens": decoded.tokens.len(),
        "steps": decoded.trace.len(),
    }));
    Ok(())
}

pub fn evaluate(g: &GlobalArgs, a: &EvaluateArgs) -> Result<()> {
    let scorer = scorer(&g.readability)?;
    let ds = dataset(&a.dataset)?;
    let outputs = load_outputs(&a.outputs)?;
    let records = select(&ds, a.split);
    let report = evaluate_run(
        &records,
        &outputs,
        &scorer,
        EvalSettings::new(a.split.split(), scorer.config),
    )?;
    let json = serde_json::to_string_pretty(&report).expect("report serialises") + "\n";
    write_text(&a.report, &json)?;
    if g.verbose {
        eprintln!(
            "{:<12} {:>8} {:>8} {:>8} {:>9}",
            "id", "BLEU-1", "BLEU-2", "Red-CN", "len ratio"
        );
        for r in &report.per_record {
            eprintln!(
                "{:<12} {:>8.2} {:>8.2} {:>8.2} {:>9.3}",
                r.id, r.bleu1, r.bleu2, r.red_cn, r.len_ratio
            );
        }
        eprintln!(
            "{:<12} {:>8.2} {:>8.2} {:>8.2}",
            "corpus", report.bleu1, report.bleu2, report.red_cn_mean
        );
    }
    emit(json!({
        "command": "evaluate",
        "config": {
            "dataset": path_str(&a.dataset),
            "outputs": path_str(&a.outputs),
            "report": path_str(&a.report),
            "evaluation": report.config,
            "readability": readability_echo(&g.readability, &scorer),
        },
        "records": report.per_record.len(),
        "bleu1": report.bleu1,
        "bleu2": report.bleu2,
        "red_cn_mean": report.red_cn_mean,
    }));
    Ok(())
}

pub fn sweep(g: &GlobalArgs, a: &SweepArgs) -> Result<()> {
    let scorer = scorer(&g.readability)?;
    let model = load_model(&a.model)?;
    let ds = dataset(&a.dataset)?;
    let instructions = Instructions::load(&a.sources)?;
    let mut records = select(&ds, a.split);
    if let Some(limit) = a.limit {
        records.truncate(limit);
    }
    let prompts = records
        .iter()
        .map(|r| instructions.render(r))
        .collect::<Result<Vec<_>>>()?;
    let ls: Vec<usize> = a.l_values.iter().map(|&v| v as usize).collect();
    let ns: Vec<usize> = a.n_values.iter().map(|&v| v as usize).collect();
    let grid = one_factor_grid(BASE_POINT, &ls, &ns, &a.lambda_values);
    let base = DecodeConfig {
        max_len: a.max_len as usize,
        seed: a.seed,
        ..DecodeConfig::default()
    };
    for point in &grid {
        let config = DecodeConfig {
            num_candidates: point.num_candidates,
            lookahead_n: point.lookahead_n,
            lambda: point.lambda,
            ..base
        };
        validate_decode(&config, &model)?;
    }
    let rows = run_sweep(&model, &records, &prompts, &grid, &base, &scorer)?;
    write_text(&a.out, &to_csv(&rows))?;
    if g.verbose {
        eprintln!(
            "{:>3} {:>4} {:>6} {:>8} {:>8} {:>10}",
            "L", "n", "lambda", "BLEU-2", "Red-CN", "wall ms"
        );
        for r in &rows {
            eprintln!(
                "{:>3} {:>4} {:>6} {:>8.2} {:>8.2} {:>10.1}",
                r.point.num_candidates, r.point.lookahead_n, r.point.lambda, r.bleu2, r.red_cn, r.wall_ms
            );
        }
    }
    emit(json!({
        "command": "sweep",
        "config": {
            "dataset": path_str(&a.dataset),
            "model": path_str(&a.model),
            "instructions": Instructions::echo(&a.sources),
            "split": format!("{:?}", a.split).to_lowercase(),
            "limit": a.limit,
            "base": BASE_POINT,
            "l_values": a.l_values,
            "n_values": a.n_values,
            "lambda_values": a.lambda_values,
            "max_len": a.max_len,
            "seed": a.seed,
            "readability": readability_echo(&g.readability, &scorer),
            "out": path_str(&a.out),
        },
        "records": records.len(),
        "rows": rows,
    }));
    Ok(())
}

pub fn train_lm(a: &TrainLmArgs) -> Result<()> {
    if !a.with_instructions && (a.sources.profiles.is_some() || a.sources.triplets.is_some()) {
        return Err(usage("--profiles and --triplets only apply with --with-instructions"));
    }
    let ds = dataset(&a.dataset)?;
    let instructions = Instructions::load(&a.sources)?;
    let corpus = select(&ds, a.split)
        .into_iter()
        .filter(|r| !r.adapted.is_empty())
        .map(|r| {
            let prompt = if a.with_instructions {
                instructions.render(r)?
            } else {
                String::new()
            };
            Ok(training_text(&prompt, &r.adapted))
        })
        .collect::<Result<Vec<_>>>()?;
    let model = NgramModel::train(&corpus, a.order as usize, a.alpha)?;
    model.save(&a.out)?;
    emit(json!({
        "command": "train-lm",
        "config": {
            "dataset": path_str(&a.dataset),
            "split": format!("{:?}", a.split).to_lowercase(),
            "order": a.order,
            "alpha": a.alpha,
            "with_instructions": a.with_instructions,
            "instructions": Instructions::echo(&a.sources),
            "out": path_str(&a.out),
        },
        "records": corpus.len(),
        "vocabulary": model.vocab().len(),
    }));
    Ok(())
}

pub fn split(a: &SplitArgs) -> Result<()> {
    let ds = dataset(&a.dataset)?;
    let out = make_split(&ds, a.test_per_novel, a.seed)?;
    out.save(&a.out)?;
    let per_novel: serde_json::Map<String, serde_json::Value> = out
        .test_counts()
        .into_iter()
        .map(|(novel, n)| (novel.id().to_string(), json!(n)))
        .collect();
    let counts = out.split_counts();
    emit(json!({
        "command": "split",
        "config": {
            "dataset": path_str(&a.dataset),
            "test_per_novel": a.test_per_novel,
            "seed": a.seed,
            "out": path_str(&a.out),
        },
        "records": out.len(),
        "train": counts.get(&childadapt::corpus::Split::Train).copied().unwrap_or(0),
        "test": counts.get(&childadapt::corpus::Split::Test).copied().unwrap_or(0),
        "test_per_novel": per_novel,
    }));
    Ok(())
}
