//! Streaming CTC prefix beam search with LM shallow fusion and keyword boosting.
//!
//! Three boost modes are supported:
//!
//! * [`BoostMode::Baseline`]: no boosting.
//! * [`BoostMode::Default`]: every rare keyword word is boosted when it is
//!   committed, in partials and finals alike.
//! * [`BoostMode::Ngram`]: the same unigram boosts steer partials, but at
//!   finalization they are retracted and replaced by boosts for full keyword
//!   matches only.
//!
//! Acoustic and beam scores are natural logs. LM log10 values are scaled by
//! `ln 10` at fusion time, and boost weights are natural-log units.

mod logits;
mod search;
mod vocab;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use logits::{LogitMatrix, ROW_MASS_TOLERANCE};
pub use search::{decode, DecoderSession};
pub use vocab::{Boundary, Vocabulary};

use crate::bias_trie::{KeywordMatch, DEFAULT_RARITY_THRESHOLD};

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("invalid decoder configuration: {0}")]
    Config(String),
    #[error("boost mode {0} needs a bias trie")]
    MissingTrie(BoostMode),
    #[error("chunk has {got} columns, vocabulary has {expected} tokens")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vocabulary: {0}")]
    Vocabulary(String),
    #[error("logits: {0}")]
    Logits(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoostMode {
    Baseline,
    Default,
    Ngram,
}

impl fmt::Display for BoostMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoostMode::Baseline => "baseline",
            BoostMode::Default => "default",
            BoostMode::Ngram => "ngram",
        })
    }
}

impl FromStr for BoostMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "default" => Ok(Self::Default),
            "ngram" => Ok(Self::Ngram),
            other => Err(format!("unknown boost mode {other:?}")),
        }
    }
}

/// Size of the boost a full keyword match earns at finalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalBoost {
    /// Entry weight times the number of matched words.
    PerWord,
    /// Entry weight once per match.
    PerMatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeConfig {
    pub beam_width: usize,
    /// LM weight (alpha).
    pub lm_weight: f64,
    /// Bonus per committed word (beta).
    pub word_bonus: f64,
    pub mode: BoostMode,
    /// Global boost weight; used when building the trie.
    pub boost_weight: f64,
    /// log10 unigram gate; used when building the trie.
    pub rarity_threshold: f64,
    /// Token extensions below this log-probability are skipped.
    pub token_prune_log_prob: f64,
    pub final_boost: FinalBoost,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            beam_width: 50,
            lm_weight: 0.5,
            word_bonus: 1.5,
            mode: BoostMode::Baseline,
            boost_weight: 0.0,
            rarity_threshold: DEFAULT_RARITY_THRESHOLD,
            // ln(1e-4)
            token_prune_log_prob: -9.21,
            final_boost: FinalBoost::PerWord,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.beam_width == 0 {
            return Err(DecodeError::Config("beam width must be at least 1".into()));
        }
        if !self.lm_weight.is_finite() || !self.word_bonus.is_finite() {
            return Err(DecodeError::Config("LM weight and word bonus must be finite".into()));
        }
        if !(self.boost_weight.is_finite() && self.boost_weight >= 0.0) {
            return Err(DecodeError::Config("boost weight must be finite and non-negative".into()));
        }
        if self.rarity_threshold.is_nan() || self.token_prune_log_prob.is_nan() {
            return Err(DecodeError::Config("thresholds must not be NaN".into()));
        }
        Ok(())
    }
}

/// Score components of one hypothesis. `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ScoreBreakdown {
    pub acoustic: f64,
    pub lm_fused: f64,
    pub word_bonus: f64,
    pub partial_boost: f64,
    pub final_boost: f64,
    pub total: f64,
}

/// One entry of the n-best list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypothesis {
    /// Collapsed token prefix.
    pub tokens: Vec<usize>,
    pub words: Vec<String>,
    pub scores: ScoreBreakdown,
}

/// Best hypothesis after a pushed chunk.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialResult {
    /// Frames consumed so far.
    pub frames: usize,
    /// Committed words plus the word still being spelled.
    pub words: Vec<String>,
    pub scores: ScoreBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeResult {
    pub words: Vec<String>,
    /// Sorted best first.
    pub nbest: Vec<Hypothesis>,
    /// Full keyword matches in the top hypothesis.
    pub matches: Vec<KeywordMatch>,
    /// One entry per pushed chunk.
    pub partials: Vec<PartialResult>,
}

impl DecodeResult {
    pub fn best(&self) -> Option<&Hypothesis> {
        self.nbest.first()
    }

    pub fn text(&self) -> String {
        self.words.join(" ")
    }
}
