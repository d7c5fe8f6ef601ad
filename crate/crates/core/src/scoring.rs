//! Word alignment and WER split into biased (B-WER) and unbiased (U-WER) parts.
//!
//! Substitutions and deletions are charged to the reference word's side of
//! the biasing list, insertions to the hypothesis word's side. Biased words
//! are the written-form keyword words, so a normalized spelling such as
//! `c three p o` never counts as a biased hit for `C3PO`.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScoreError {
    #[error("corpus is empty")]
    EmptyCorpus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Match { reference: usize, hypothesis: usize },
    Substitution { reference: usize, hypothesis: usize },
    Deletion { reference: usize },
    Insertion { hypothesis: usize },
}

impl EditOp {
    pub fn cost(&self) -> usize {
        usize::from(!matches!(self, EditOp::Match { .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Alignment {
    pub ops: Vec<EditOp>,
}

impl Alignment {
    pub fn distance(&self) -> usize {
        self.ops.iter().map(EditOp::cost).sum()
    }
}

/// Minimum edit distance alignment. The backtrace prefers match, then
/// substitution, then deletion, then insertion, so output is deterministic.
pub fn align<S: AsRef<str>>(reference: &[S], hypothesis: &[S]) -> Alignment {
    let (n, m) = (reference.len(), hypothesis.len());
    let width = m + 1;
    let mut d = vec![0usize; (n + 1) * width];
    for (j, cell) in d.iter_mut().take(width).enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        d[i * width] = i;
        for j in 1..=m {
            let same = reference[i - 1].as_ref() == hypothesis[j - 1].as_ref();
            let diag = d[(i - 1) * width + j - 1] + usize::from(!same);
            let del = d[(i - 1) * width + j] + 1;
            let ins = d[i * width + j - 1] + 1;
            d[i * width + j] = diag.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * width + j];
        if i > 0 && j > 0 {
            let diag = d[(i - 1) * width + j - 1];
            if reference[i - 1].as_ref() == hypothesis[j - 1].as_ref() && here == diag {
                ops.push(EditOp::Match {
                    reference: i - 1,
                    hypothesis: j - 1,
                });
                i -= 1;
                j -= 1;
                continue;
            }
            if here == diag + 1 {
                ops.push(EditOp::Substitution {
                    reference: i - 1,
                    hypothesis: j - 1,
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && here == d[(i - 1) * width + j] + 1 {
            ops.push(EditOp::Deletion { reference: i - 1 });
            i -= 1;
        } else {
            ops.push(EditOp::Insertion { hypothesis: j - 1 });
            j -= 1;
        }
    }
    ops.reverse();
    Alignment { ops }
}

/// One reference/hypothesis pair in written form.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub id: String,
    pub reference: Vec<String>,
    pub hypothesis: Vec<String>,
}

impl ScoredPair {
    pub fn from_text(id: impl Into<String>, reference: &str, hypothesis: &str) -> Self {
        Self {
            id: id.into(),
            reference: reference.split_whitespace().map(str::to_string).collect(),
            hypothesis: hypothesis.split_whitespace().map(str::to_string).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ErrorCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl ErrorCounts {
    pub fn total(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    fn add(&mut self, other: &ErrorCounts) {
        self.substitutions += other.substitutions;
        self.deletions += other.deletions;
        self.insertions += other.insertions;
    }
}

fn pct<S: Serializer>(value: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match value {
        Some(v) => s.serialize_some(&((v * 100.0).round() / 100.0)),
        None => s.serialize_none(),
    }
}

/// Word counts, errors and rates for one utterance or a whole corpus.
/// Rates are percentages; `None` when the denominator is zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RateSummary {
    pub ref_words: usize,
    pub biased_ref_words: usize,
    pub unbiased_ref_words: usize,
    pub biased_errors: ErrorCounts,
    pub unbiased_errors: ErrorCounts,
    #[serde(serialize_with = "pct")]
    pub wer: Option<f64>,
    #[serde(serialize_with = "pct")]
    pub u_wer: Option<f64>,
    #[serde(serialize_with = "pct")]
    pub b_wer: Option<f64>,
}

fn rate(errors: usize, words: usize) -> Option<f64> {
    (words > 0).then(|| 100.0 * errors as f64 / words as f64)
}

impl RateSummary {
    fn finish(mut self) -> Self {
        let total = self.biased_errors.total() + self.unbiased_errors.total();
        self.wer = rate(total, self.ref_words);
        self.u_wer = rate(self.unbiased_errors.total(), self.unbiased_ref_words);
        self.b_wer = rate(self.biased_errors.total(), self.biased_ref_words);
        self
    }

    pub fn total_errors(&self) -> usize {
        self.biased_errors.total() + self.unbiased_errors.total()
    }

    fn accumulate(&mut self, other: &RateSummary) {
        self.ref_words += other.ref_words;
        self.biased_ref_words += other.biased_ref_words;
        self.unbiased_ref_words += other.unbiased_ref_words;
        self.biased_errors.add(&other.biased_errors);
        self.unbiased_errors.add(&other.unbiased_errors);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtteranceScore {
    pub id: String,
    #[serde(flatten)]
    pub summary: RateSummary,
    #[serde(skip)]
    pub alignment_errors: usize,
}

/// How often a biasing term occurs in the references and how often every
/// one of its words was matched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeywordStats {
    pub term: String,
    pub occurrences: usize,
    pub hits: usize,
    pub misses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub corpus: RateSummary,
    pub utterances: Vec<UtteranceScore>,
    pub keywords: Vec<KeywordStats>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScoringOptions {
    /// Compare words and biasing terms case-insensitively.
    pub case_insensitive: bool,
}

struct BiasSet {
    words: HashSet<String>,
    case_insensitive: bool,
}

impl BiasSet {
    fn new(terms: &[String], case_insensitive: bool) -> Self {
        let words = terms
            .iter()
            .flat_map(|t| t.split_whitespace())
            .map(|w| fold(w, case_insensitive))
            .collect();
        Self {
            words,
            case_insensitive,
        }
    }

    fn contains(&self, word: &str) -> bool {
        self.words.contains(&fold(word, self.case_insensitive))
    }
}

fn fold(word: &str, case_insensitive: bool) -> String {
    if case_insensitive {
        word.to_lowercase()
    } else {
        word.to_string()
    }
}

fn score_pair(pair: &ScoredPair, bias: &BiasSet, options: ScoringOptions) -> (UtteranceScore, Vec<bool>) {
    let fold_all = |ws: &[String]| -> Vec<String> { ws.iter().map(|w| fold(w, options.case_insensitive)).collect() };
    let (reference, hypothesis) = (fold_all(&pair.reference), fold_all(&pair.hypothesis));
    let alignment = align(&reference, &hypothesis);

    let mut summary = RateSummary {
        ref_words: reference.len(),
        ..Default::default()
    };
    for w in &reference {
        if bias.contains(w) {
            summary.biased_ref_words += 1;
        } else {
            summary.unbiased_ref_words += 1;
        }
    }
    let mut matched = vec![false; reference.len()];
    for op in &alignment.ops {
        match *op {
            EditOp::Match { reference: r, .. } => matched[r] = true,
            EditOp::Substitution { reference: r, .. } => {
                let side = if bias.contains(&reference[r]) {
                    &mut summary.biased_errors
                } else {
                    &mut summary.unbiased_errors
                };
                side.substitutions += 1;
            }
            EditOp::Deletion { reference: r } => {
                let side = if bias.contains(&reference[r]) {
                    &mut summary.biased_errors
                } else {
                    &mut summary.unbiased_errors
                };
                side.deletions += 1;
            }
            EditOp::Insertion { hypothesis: h } => {
                let side = if bias.contains(&hypothesis[h]) {
                    &mut summary.biased_errors
                } else {
                    &mut summary.unbiased_errors
                };
                side.insertions += 1;
            }
        }
    }
    (
        UtteranceScore {
            id: pair.id.clone(),
            summary: summary.finish(),
            alignment_errors: alignment.distance(),
        },
        matched,
    )
}

/// Scores a corpus against a written-form biasing list.
pub fn biased_wer(corpus: &[ScoredPair], terms: &[String], options: ScoringOptions) -> Result<ScoreReport, ScoreError> {
    if corpus.is_empty() {
        return Err(ScoreError::EmptyCorpus);
    }
    let bias = BiasSet::new(terms, options.case_insensitive);
    let scored: Vec<(UtteranceScore, Vec<bool>)> =
        corpus.par_iter().map(|pair| score_pair(pair, &bias, options)).collect();

    let mut corpus_summary = RateSummary::default();
    for (u, _) in &scored {
        corpus_summary.accumulate(&u.summary);
    }

    let mut keywords = Vec::with_capacity(terms.len());
    for term in terms {
        let words: Vec<String> = term.split_whitespace().map(|w| fold(w, options.case_insensitive)).collect();
        if words.is_empty() {
            continue;
        }
        let mut stats = KeywordStats {
            term: term.clone(),
            occurrences: 0,
            hits: 0,
            misses: 0,
        };
        for (pair, (_, matched)) in corpus.iter().zip(&scored) {
            let reference: Vec<String> = pair.reference.iter().map(|w| fold(w, options.case_insensitive)).collect();
            for start in 0..reference.len().saturating_sub(words.len() - 1) {
                if reference[start..start + words.len()] == words[..] {
                    stats.occurrences += 1;
                    if matched[start..start + words.len()].iter().all(|&m| m) {
                        stats.hits += 1;
                    } else {
                        stats.misses += 1;
                    }
                }
            }
        }
        keywords.push(stats);
    }

    Ok(ScoreReport {
        corpus: corpus_summary.finish(),
        utterances: scored.into_iter().map(|(u, _)| u).collect(),
        keywords,
    })
}

/// Relative reduction in percent, `100 * (before - after) / before`.
pub fn relative_reduction(before: f64, after: f64) -> Option<f64> {
    (before != 0.0).then(|| 100.0 * (before - after) / before)
}
