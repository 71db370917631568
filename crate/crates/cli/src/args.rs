use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use childadapt::corpus::Split;

#[derive(Debug, Parser)]
#[command(
    name = "childadapt",
    version,
    about = "Readability scoring, guided decoding and dataset tooling for child-friendly adaptation of Chinese classics",
    after_help = "Every subcommand prints a JSON summary, including the effective configuration, to stdout.\n\
                  Exit status: 0 on success, 1 on usage errors, 2 on data or validation errors."
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
#[command(next_help_heading = "Global options")]
pub struct GlobalArgs {
    /// Worker threads [default: number of logical cores]
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,

    /// Log progress and print human-readable tables to stderr
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(flatten)]
    pub readability: ReadabilityArgs,
}

/// Readability settings: flags override the config file, which overrides the
/// built-in defaults.
#[derive(Debug, Args)]
#[command(next_help_heading = "Readability options")]
pub struct ReadabilityArgs {
    /// TOML file with readability keys (target_ac, target_f, sigma_ac, sigma_f, weight_ac, weight_f, weight_t)
    #[arg(long, global = true, env = "REDCN_CONFIG", value_name = "FILE")]
    pub readability_config: Option<PathBuf>,

    /// Character-frequency table (`<char>\t<score>` lines) [default: bundled]
    #[arg(long, global = true, value_name = "FILE")]
    pub char_freq: Option<PathBuf>,

    /// Adverb/conjunction lexicon (`<token>\t<TAG>` lines) [default: bundled]
    #[arg(long, global = true, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,

    /// Target adverb/conjunction percentage [default: 5]
    #[arg(long, global = true, value_parser = non_negative)]
    pub target_ac: Option<f64>,

    /// Target character-frequency score [default: 85]
    #[arg(long, global = true, value_parser = non_negative)]
    pub target_f: Option<f64>,

    /// Gaussian width for the adverb/conjunction indicator [default: 2.5]
    #[arg(long, global = true, value_parser = positive)]
    pub sigma_ac: Option<f64>,

    /// Gaussian width for the character-frequency indicator [default: 42.5]
    #[arg(long, global = true, value_parser = positive)]
    pub sigma_f: Option<f64>,

    /// Weight of the adverb/conjunction component [default: 0.3]
    #[arg(long, global = true, value_parser = unit_interval)]
    pub weight_ac: Option<f64>,

    /// Weight of the character-frequency component [default: 0.4]
    #[arg(long, global = true, value_parser = unit_interval)]
    pub weight_f: Option<f64>,

    /// Weight of the length component [default: 0.3]
    #[arg(long, global = true, value_parser = unit_interval)]
    pub weight_t: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score an adapted text against its original with Red-CN
    Score(ScoreArgs),
    /// Render integrative instructions for dataset records
    BuildInstruction(BuildInstructionArgs),
    /// Annotate personalities or triplets through the annotation service
    #[command(subcommand)]
    Annotate(AnnotateCommand),
    /// Sample candidates and build readability preference pairs
    BuildPairs(BuildPairsArgs),
    /// Readability-guided lookahead decoding
    Decode(DecodeArgs),
    /// BLEU-1/2 and corpus Red-CN of model outputs
    Evaluate(EvaluateArgs),
    /// One-factor-at-a-time sweep over L, n and lambda
    Sweep(SweepArgs),
    /// Train the reference character n-gram model
    TrainLm(TrainLmArgs),
    /// Mark a per-novel random sample of records as test data
    Split(SplitArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    All,
}

impl SplitArg {
    pub fn split(self) -> Option<Split> {
        match self {
            SplitArg::Train => Some(Split::Train),
            SplitArg::Test => Some(Split::Test),
            SplitArg::All => None,
        }
    }
}

/// Sources for the character and triplet blocks of an instruction. Absent
/// sources render as empty blocks.
#[derive(Debug, Args)]
pub struct InstructionSources {
    /// Character profiles (profiles.json)
    #[arg(long, value_name = "FILE")]
    pub profiles: Option<PathBuf>,

    /// Per-record narrative triplets (triplets.json)
    #[arg(long, value_name = "FILE")]
    pub triplets: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// File holding the text to score
    #[arg(long, value_name = "FILE")]
    pub text: PathBuf,

    /// File holding the original the text was adapted from
    #[arg(long, value_name = "FILE")]
    pub original: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildInstructionArgs {
    /// Dataset JSONL of {id, novel, chapter, original, adapted, split}
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,

    #[command(flatten)]
    pub sources: InstructionSources,

    /// Render only this record and write the instruction as plain text
    #[arg(long)]
    pub id: Option<String>,

    /// Records to render when no --id is given
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitArg,

    /// Output file: plain text with --id, otherwise JSONL of {id, instruction}
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum AnnotateCommand {
    /// Score characters on the Big Five traits and write profiles.json
    Personality(PersonalityArgs),
    /// Extract entity-relation triplets from dataset originals and write triplets.json
    Triplets(TripletArgs),
}

#[derive(Debug, Args)]
pub struct ClientArgs {
    /// Replay responses from this directory instead of calling ANNOTATE_URL
    #[arg(long, value_name = "DIR")]
    pub fixtures: Option<PathBuf>,

    /// Model name sent with every request
    #[arg(long, default_value = childadapt::instruction::DEFAULT_MODEL)]
    pub model: String,

    /// Maximum concurrent requests
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u16).range(1..))]
    pub max_in_flight: u16,

    /// Attempts per request, including the first
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=20))]
    pub max_attempts: u32,
}

#[derive(Debug, Args)]
pub struct PersonalityArgs {
    #[command(flatten)]
    pub client: ClientArgs,

    /// Roster file, one character per line: `<novel>\t<name>[\t<alias>,<alias>…]`
    #[arg(long, value_name = "FILE", conflicts_with_all = ["novel", "character"])]
    pub roster: Option<PathBuf>,

    /// Novel id (journey_to_the_west, three_kingdoms, water_margin, dream_of_the_red_chamber, or any other identifier)
    #[arg(long, requires = "character")]
    pub novel: Option<String>,

    /// Character to annotate; repeatable
    #[arg(long, requires = "novel")]
    pub character: Vec<String>,

    /// Output profiles.json
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TripletArgs {
    #[command(flatten)]
    pub client: ClientArgs,

    /// Dataset JSONL of {id, novel, chapter, original, adapted, split}
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,

    /// Records to annotate
    #[arg(long, value_enum, default_value = "all")]
    pub split: SplitArg,

    /// Annotate only the first N selected records
    #[arg(long)]
    pub limit: Option<usize>,

    /// Output triplets.json
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildPairsArgs {
    /// Dataset JSONL of {id, novel, chapter, original, adapted, split}
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,

    /// Reference n-gram model file
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,

    #[command(flatten)]
    pub sources: InstructionSources,

    /// Training records to sample without replacement
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,

    /// Candidates sampled per record
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(2..=64))]
    pub k: u64,

    /// Nucleus mass kept when sampling candidates
    #[arg(long, default_value_t = 0.9, value_parser = probability)]
    pub top_p: f64,

    /// Sampling temperature
    #[arg(long, default_value_t = 0.8, value_parser = positive)]
    pub temperature: f64,

    /// Minimum Red-CN gap (0-100 scale) between chosen and rejected
    #[arg(long, default_value_t = 3.0, value_parser = non_negative)]
    pub threshold: f64,

    /// Seed for every random choice
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Token budget per candidate
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u64).range(1..=100_000))]
    pub max_new_tokens: u64,

    /// Output JSONL of {record_id, prompt, chosen, rejected, chosen_score, rejected_score}
    #[arg(long, value_name = "FILE", default_value = "pairs.jsonl")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RolloutArg {
    Greedy,
    TopP,
}

#[derive(Debug, Args)]
pub struct DecodeSettings {
    /// Candidate first tokens per step (L)
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub lookahead_l: u64,

    /// Rollout length per candidate, counting the candidate (n)
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..=10_000))]
    pub lookahead_n: u64,

    /// Weight of readability guidance against log-probability
    #[arg(long, default_value_t = 1.0, value_parser = non_negative)]
    pub lambda: f64,

    /// Maximum generated tokens
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u64).range(0..=100_000))]
    pub max_len: u64,

    /// Policy that extends each candidate
    #[arg(long, value_enum, default_value = "greedy")]
    pub rollout: RolloutArg,

    /// top-p for sampled rollouts
    #[arg(long, default_value_t = 0.9, value_parser = probability)]
    pub rollout_top_p: f64,

    /// Temperature for sampled rollouts
    #[arg(long, default_value_t = 0.8, value_parser = positive)]
    pub rollout_temperature: f64,

    /// Seed for every random choice
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Reference n-gram model file
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,

    #[command(flatten)]
    pub settings: DecodeSettings,

    /// File holding the original text (single-text mode)
    #[arg(
        long,
        value_name = "FILE",
        required_unless_present = "dataset",
        conflicts_with = "dataset"
    )]
    pub original: Option<PathBuf>,

    /// File holding the rendered instruction (single-text mode) [default: the template with empty character and triplet blocks]
    #[arg(long, value_name = "FILE", requires = "original")]
    pub instruction: Option<PathBuf>,

    /// Per-step candidate telemetry as JSONL (single-text mode)
    #[arg(long, value_name = "FILE", requires = "original")]
    pub trace: Option<PathBuf>,

    /// Write the decoded text here (single-text mode)
    #[arg(long, value_name = "FILE", requires = "original")]
    pub out: Option<PathBuf>,

    /// Decode every selected record of this dataset (batch mode)
    #[arg(long, value_name = "FILE", requires = "outputs")]
    pub dataset: Option<PathBuf>,

    #[command(flatten)]
    pub sources: InstructionSources,

    /// Records to use
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,

    /// Batch-mode output JSONL of {id, text}
    #[arg(long, value_name = "FILE", requires = "dataset")]
    pub outputs: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset JSONL of {id, novel, chapter, original, adapted, split}
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,

    /// JSONL of {id, text}
    #[arg(long, value_name = "FILE")]
    pub outputs: PathBuf,

    /// Records to use
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,

    /// Output report with aggregate and per-record metrics
    #[arg(long, value_name = "FILE", default_value = "report.json")]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Dataset JSONL of {id, novel, chapter, original, adapted, split}
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,

    /// Reference n-gram model file
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,

    #[command(flatten)]
    pub sources: InstructionSources,

    /// Records to use
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,

    /// Use only the first N selected records
    #[arg(long)]
    pub limit: Option<usize>,

    /// Values of L, with n and lambda at 20 and 1
    #[arg(long, value_delimiter = ',', default_values_t = [2u64, 5, 8], value_parser = clap::value_parser!(u64).range(1..))]
    pub l_values: Vec<u64>,

    /// Values of n, with L and lambda at 5 and 1
    #[arg(long, value_delimiter = ',', default_values_t = [10u64, 20, 50], value_parser = clap::value_parser!(u64).range(1..=10_000))]
    pub n_values: Vec<u64>,

    /// Values of lambda, with L and n at 5 and 20
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0], value_parser = non_negative)]
    pub lambda_values: Vec<f64>,

    /// Maximum generated tokens per record
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u64).range(0..=100_000))]
    pub max_len: u64,

    /// Seed for every random choice
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// CSV with header `L,n,lambda,bleu2,red_cn,wall_ms`
    #[arg(long, value_name = "FILE", default_value = "sweep.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainLmArgs {
    /// Dataset JSONL of {id, novel, chapter, original, adapted, split}
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,

    /// Records whose adapted text is trained on
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitArg,

    /// n-gram order (context length + 1)
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..=16))]
    pub order: u64,

    /// Additive smoothing constant
    #[arg(long, default_value_t = 0.01, value_parser = positive)]
    pub alpha: f64,

    /// Prepend each record's rendered instruction to its training text
    #[arg(long)]
    pub with_instructions: bool,

    #[command(flatten)]
    pub sources: InstructionSources,

    /// Output model file
    #[arg(long, value_name = "FILE", default_value = "model.ngram")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Dataset JSONL of {id, novel, chapter, original, adapted, split}
    #[arg(long, value_name = "FILE")]
    pub dataset: PathBuf,

    /// Records per novel marked as test
    #[arg(long, default_value_t = 75)]
    pub test_per_novel: usize,

    /// Seed for every random choice
    #[arg(long, default_value_t = 42)]
    pub seed: u64,

    /// Output dataset JSONL
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be > 0, got {v}"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be >= 0, got {v}"))
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must be in [0, 1], got {v}"))
    }
}

fn probability(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 && v <= 1.0 {
        Ok(v)
    } else {
        Err(format!("must be in (0, 1], got {v}"))
    }
}
