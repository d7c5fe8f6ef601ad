use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kwboost::decoder::{BoostMode, DecodeConfig, FinalBoost};
use kwboost::harness::{
    grid_search, make_fixtures, prepare_list, read_fixture_specs, read_manifest, run_decode, run_score, HarnessError,
    Objective, Resources, RunConfig,
};
use kwboost::scoring::ScoringOptions;

/// Keyword boosting for CTC beam search decoding.
#[derive(Debug, Parser)]
#[command(name = "kwboost", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decode a manifest and write one JSON transcript per line.
    Decode {
        #[command(flatten)]
        run: RunArgs,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score transcripts against manifest references.
    Score {
        #[arg(long)]
        hyps: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Biasing list; its raw forms define the biased words.
        #[arg(long)]
        keywords: Option<PathBuf>,
        #[arg(long)]
        case_insensitive: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid-search the boost weight on a development manifest.
    Tune {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated weights.
        #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2,4,8")]
        grid: Vec<f64>,
        #[arg(long, default_value = "b-wer")]
        objective: Objective,
        /// Follow with one per-keyword coordinate-descent sweep.
        #[arg(long)]
        per_target: bool,
        /// Accepted for interface symmetry; tuning is deterministic.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalize a raw keyword list into a mapping TSV.
    PrepareList {
        #[arg(long)]
        keywords: PathBuf,
        /// Keep whitespace-containing keywords as multi-word targets.
        #[arg(long)]
        split_compounds: bool,
        #[arg(long)]
        exceptions: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic logits, a manifest and a vocabulary from a spec.
    MakeFixtures {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    lm: Option<PathBuf>,
    /// Raw keyword list, normalized on load.
    #[arg(long)]
    keywords: Option<PathBuf>,
    /// Prepared mapping TSV instead of a raw list.
    #[arg(long)]
    mapping: Option<PathBuf>,
    #[arg(long)]
    exceptions: Option<PathBuf>,
    /// Boost keywords exactly as written, without normalization.
    #[arg(long)]
    raw_targets: bool,
    /// Reject keywords that contain whitespace.
    #[arg(long)]
    no_split_compounds: bool,
    #[arg(long, default_value = "baseline")]
    mode: BoostMode,
    #[arg(long, default_value_t = 0.0)]
    boost_weight: f64,
    #[arg(long, default_value_t = 50)]
    beam_width: usize,
    #[arg(long, default_value_t = 0.5)]
    lm_weight: f64,
    #[arg(long, default_value_t = 1.5)]
    word_bonus: f64,
    /// Rarity gate, log10 unigram probability.
    #[arg(long, default_value_t = kwboost::bias_trie::DEFAULT_RARITY_THRESHOLD, allow_hyphen_values = true)]
    threshold: f64,
    #[arg(long, default_value_t = -9.21, allow_hyphen_values = true)]
    prune: f64,
    /// Boost a full match once instead of once per word.
    #[arg(long)]
    per_match_boost: bool,
}

impl RunArgs {
    fn into_config(self) -> RunConfig {
        RunConfig {
            manifest: self.manifest,
            vocab: self.vocab,
            lm: self.lm,
            keywords: self.keywords,
            mapping: self.mapping,
            exceptions: self.exceptions,
            raw_targets: self.raw_targets,
            split_compounds: !self.no_split_compounds,
            decode: DecodeConfig {
                beam_width: self.beam_width,
                lm_weight: self.lm_weight,
                word_bonus: self.word_bonus,
                mode: self.mode,
                boost_weight: self.boost_weight,
                rarity_threshold: self.threshold,
                token_prune_log_prob: self.prune,
                final_boost: if self.per_match_boost {
                    FinalBoost::PerMatch
                } else {
                    FinalBoost::PerWord
                },
            },
        }
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), HarnessError> {
    match out {
        Some(path) => std::fs::write(path, contents).map_err(|source| HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => std::io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|source| HarnessError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn run(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Decode { run, out } => {
            let config = run.into_config();
            let mut buf = Vec::new();
            let summary = run_decode(&config, &mut buf)?;
            emit(out.as_deref(), &String::from_utf8(buf).expect("JSON is UTF-8"))?;
            if summary.failures > 0 {
                return Err(HarnessError::Data(format!(
                    "{} of {} utterances failed",
                    summary.failures, summary.utterances
                )));
            }
            Ok(())
        }
        Command::Score {
            hyps,
            manifest,
            keywords,
            case_insensitive,
            out,
        } => {
            let report = run_score(&hyps, &manifest, keywords.as_deref(), ScoringOptions { case_insensitive })?;
            emit(out.as_deref(), &pretty(&report))
        }
        Command::Tune {
            run,
            grid,
            objective,
            per_target,
            seed: _,
            out,
        } => {
            let config = run.into_config();
            let res = Resources::load(&config)?;
            let entries = read_manifest(&config.manifest)?;
            let result = grid_search(&entries, &res, &config.decode, &grid, objective, per_target)?;
            emit(out.as_deref(), &pretty(&result))
        }
        Command::PrepareList {
            keywords,
            split_compounds,
            exceptions,
            out,
        } => {
            let exceptions = exceptions.as_deref().map(read).transpose()?;
            let mapping = prepare_list(&read(&keywords)?, split_compounds, exceptions.as_deref())?;
            for c in mapping.collisions() {
                eprintln!("collision: {:?} -> {} (dropped {})", c.variant.join(" "), c.winner, c.loser);
            }
            emit(out.as_deref(), &mapping.to_tsv())
        }
        Command::MakeFixtures { spec, seed, out } => {
            let specs = read_fixture_specs(&read(&spec)?)?;
            make_fixtures(&specs, seed, &out)?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
