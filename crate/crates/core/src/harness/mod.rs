//! End-to-end pipeline: manifest ingestion, normalize -> decode -> ITN,
//! scoring, boost-weight tuning and fixture generation.

mod fixtures;
mod tune;

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bias_trie::BiasTrie;
use crate::decoder::{decode, DecodeConfig, DecodeError, LogitMatrix, Vocabulary};
use crate::lm::{LmError, NGramLM};
use crate::norm::{
    inverse_normalize, parse_exceptions, parse_keyword_list, KeywordSpec, NormError, NormalizationMapping,
};
use crate::scoring::{biased_wer, ScoreError, ScoreReport, ScoredPair, ScoringOptions};

pub use fixtures::{make_fixtures, read_fixture_specs, FixtureSpec, Segment, FIXTURE_VOCAB_FILE, MANIFEST_FILE};
pub use tune::{grid_search, GridPoint, GridSearchResult, Objective, TargetWeight};

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad flags or missing inputs; exit code 1.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or inconsistent data; exit code 2.
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One manifest line. `logits` is resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub logits: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = read_file(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut entry: ManifestEntry = serde_json::from_str(line)
            .map_err(|e| HarnessError::Data(format!("{}:{}: {e}", path.display(), n + 1)))?;
        if !seen.insert(entry.id.clone()) {
            return Err(HarnessError::Data(format!("{}: duplicate id {:?}", path.display(), entry.id)));
        }
        if entry.logits.is_relative() {
            entry.logits = base.join(&entry.logits);
        }
        entries.push(entry);
    }
    Ok(entries)
}

/// Everything `decode` and `tune` need besides the manifest.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub vocab: PathBuf,
    pub lm: Option<PathBuf>,
    /// Raw keyword list (`raw<TAB>weight?<TAB>priority?`).
    pub keywords: Option<PathBuf>,
    /// Prepared mapping TSV, as written by `prepare-list`.
    pub mapping: Option<PathBuf>,
    pub exceptions: Option<PathBuf>,
    /// Use keywords verbatim instead of normalizing them.
    pub raw_targets: bool,
    /// Accept whitespace in raw keywords as multi-word targets.
    pub split_compounds: bool,
    pub decode: DecodeConfig,
}

impl RunConfig {
    pub fn new(manifest: impl Into<PathBuf>, vocab: impl Into<PathBuf>) -> Self {
        Self {
            manifest: manifest.into(),
            vocab: vocab.into(),
            lm: None,
            keywords: None,
            mapping: None,
            exceptions: None,
            raw_targets: false,
            split_compounds: true,
            decode: DecodeConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.keywords.is_some() && self.mapping.is_some() {
            return Err(HarnessError::Usage("--keywords and --mapping are mutually exclusive".into()));
        }
        if self.decode.mode != crate::decoder::BoostMode::Baseline && self.keywords.is_none() && self.mapping.is_none()
        {
            return Err(HarnessError::Usage(format!("mode {} needs a keyword list", self.decode.mode)));
        }
        let paths = [Some(&self.manifest), Some(&self.vocab), self.lm.as_ref(), self.keywords.as_ref(), self.mapping.as_ref(), self.exceptions.as_ref()];
        for path in paths.into_iter().flatten() {
            if !path.exists() {
                return Err(HarnessError::Usage(format!("{}: no such file", path.display())));
            }
        }
        self.decode.validate().map_err(|e| HarnessError::Usage(e.to_string()))
    }
}

/// Loaded, immutable models shared by every utterance.
#[derive(Debug, Clone)]
pub struct Resources {
    pub vocab: Vocabulary,
    pub lm: Option<NGramLM>,
    pub mapping: Option<NormalizationMapping>,
}

impl Resources {
    pub fn load(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let vocab = Vocabulary::load(&config.vocab)?;
        let lm = config.lm.as_deref().map(NGramLM::load_arpa).transpose()?;
        let mapping = if let Some(path) = &config.mapping {
            Some(NormalizationMapping::from_tsv(&read_file(path)?)?)
        } else if let Some(path) = &config.keywords {
            let specs = parse_keyword_list(&read_file(path)?)?;
            Some(if config.raw_targets {
                NormalizationMapping::verbatim(&specs)?
            } else {
                let exceptions = match &config.exceptions {
                    Some(p) => Some(parse_exceptions(&read_file(p)?)?),
                    None => None,
                };
                build_mapping(&specs, config.split_compounds, exceptions.as_ref())?
            })
        } else {
            None
        };
        Ok(Self { vocab, lm, mapping })
    }

    /// Trie over the mapping with `config`'s weight and threshold.
    pub fn trie(&self, config: &DecodeConfig) -> Option<BiasTrie> {
        self.mapping
            .as_ref()
            .map(|m| BiasTrie::build(m, self.lm.as_ref(), config.rarity_threshold, config.boost_weight))
    }
}

fn build_mapping(
    specs: &[KeywordSpec],
    split_compounds: bool,
    exceptions: Option<&crate::norm::Exceptions>,
) -> Result<NormalizationMapping> {
    if !split_compounds {
        if let Some(spec) = specs.iter().find(|s| s.raw.split_whitespace().count() > 1) {
            return Err(NormError::MultiWord { raw: spec.raw.clone() }.into());
        }
    }
    Ok(NormalizationMapping::build(specs, exceptions)?)
}

/// Normalizes a raw keyword list into a mapping. Without `split_compounds`,
/// keywords containing whitespace are rejected.
pub fn prepare_list(text: &str, split_compounds: bool, exceptions: Option<&str>) -> Result<NormalizationMapping> {
    let specs = parse_keyword_list(text)?;
    let exceptions = exceptions.map(parse_exceptions).transpose()?;
    build_mapping(&specs, split_compounds, exceptions.as_ref())
}

/// A keyword span in the decoded (spoken-form) word sequence, rewritten to
/// `raw` in the output text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSpan {
    pub start: usize,
    pub end: usize,
    pub raw: String,
}

/// One line of a transcripts file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub id: String,
    pub text: String,
    pub matches: Vec<MatchSpan>,
    /// Decoded spoken-form words.
    #[serde(skip)]
    pub words: Vec<String>,
    /// Total score of the top hypothesis.
    #[serde(skip)]
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Ok(Transcript),
    Failed { id: String, error: String },
}

impl Outcome {
    pub fn id(&self) -> &str {
        match self {
            Outcome::Ok(t) => &t.id,
            Outcome::Failed { id, .. } => id,
        }
    }

    pub fn to_json_line(&self) -> String {
        match self {
            Outcome::Ok(t) => serde_json::to_string(t).expect("transcript serializes"),
            Outcome::Failed { id, error } => serde_json::json!({ "id": id, "error": error }).to_string(),
        }
    }
}

fn decode_one(
    entry: &ManifestEntry,
    res: &Resources,
    trie: Option<&BiasTrie>,
    config: &DecodeConfig,
) -> std::result::Result<Transcript, String> {
    let logits = LogitMatrix::load(&entry.logits).map_err(|e| format!("{}: {e}", entry.logits.display()))?;
    let result = decode(&logits, &res.vocab, config, res.lm.as_ref(), trie).map_err(|e| e.to_string())?;
    let total = result.best().map_or(0.0, |h| h.scores.total);
    let (text, matches) = match &res.mapping {
        Some(mapping) => {
            let itn = inverse_normalize(&result.words, mapping);
            let spans = itn
                .replacements
                .iter()
                .map(|r| MatchSpan {
                    start: r.start,
                    end: r.end,
                    raw: r.raw.clone(),
                })
                .collect();
            (itn.text(), spans)
        }
        None => (result.text(), Vec::new()),
    };
    Ok(Transcript {
        id: entry.id.clone(),
        text,
        matches,
        words: result.words,
        total,
    })
}

/// Decodes every utterance in parallel; results come back in manifest order.
pub fn decode_corpus(
    entries: &[ManifestEntry],
    res: &Resources,
    trie: Option<&BiasTrie>,
    config: &DecodeConfig,
) -> Vec<Outcome> {
    entries
        .par_iter()
        .map(|entry| match decode_one(entry, res, trie, config) {
            Ok(t) => Outcome::Ok(t),
            Err(error) => {
                log::error!("{}: {error}", entry.id);
                Outcome::Failed {
                    id: entry.id.clone(),
                    error,
                }
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecodeSummary {
    pub utterances: usize,
    pub failures: usize,
}

/// Runs the full pipeline and writes one JSON line per utterance.
pub fn run_decode(config: &RunConfig, out: &mut impl Write) -> Result<DecodeSummary> {
    let res = Resources::load(config)?;
    let entries = read_manifest(&config.manifest)?;
    let trie = res.trie(&config.decode);
    let outcomes = decode_corpus(&entries, &res, trie.as_ref(), &config.decode);
    let mut summary = DecodeSummary {
        utterances: outcomes.len(),
        failures: 0,
    };
    for outcome in &outcomes {
        if matches!(outcome, Outcome::Failed { .. }) {
            summary.failures += 1;
        }
        writeln!(out, "{}", outcome.to_json_line()).map_err(|source| HarnessError::Io {
            path: PathBuf::from("<output>"),
            source,
        })?;
    }
    Ok(summary)
}

/// Pairs manifest references with hypothesis texts. Utterances without a
/// hypothesis are scored as empty output.
pub fn pair_corpus(entries: &[ManifestEntry], hyps: &HashMap<String, String>) -> Result<Vec<ScoredPair>> {
    entries
        .iter()
        .map(|e| {
            let reference = e
                .reference
                .as_deref()
                .ok_or_else(|| HarnessError::Data(format!("{}: manifest entry has no reference", e.id)))?;
            let hyp = hyps.get(&e.id).map(String::as_str).unwrap_or_else(|| {
                log::warn!("{}: no hypothesis, scoring as empty", e.id);
                ""
            });
            Ok(ScoredPair::from_text(e.id.clone(), reference, hyp))
        })
        .collect()
}

pub fn read_transcripts(path: &Path) -> Result<HashMap<String, String>> {
    #[derive(Deserialize)]
    struct Line {
        id: String,
        text: Option<String>,
    }
    let mut out = HashMap::new();
    for (n, line) in read_file(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(line)
            .map_err(|e| HarnessError::Data(format!("{}:{}: {e}", path.display(), n + 1)))?;
        if let Some(text) = parsed.text {
            out.insert(parsed.id, text);
        }
    }
    Ok(out)
}

/// Raw keyword forms used as the scoring biasing list.
pub fn read_terms(path: &Path) -> Result<Vec<String>> {
    Ok(parse_keyword_list(&read_file(path)?)?.into_iter().map(|s| s.raw).collect())
}

pub fn run_score(
    hyps: &Path,
    manifest: &Path,
    keywords: Option<&Path>,
    options: ScoringOptions,
) -> Result<ScoreReport> {
    let entries = read_manifest(manifest)?;
    let hyps = read_transcripts(hyps)?;
    let terms = keywords.map(read_terms).transpose()?.unwrap_or_default();
    let corpus = pair_corpus(&entries, &hyps)?;
    Ok(biased_wer(&corpus, &terms, options)?)
}
