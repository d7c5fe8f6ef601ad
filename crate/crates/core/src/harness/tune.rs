use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{decode_corpus, pair_corpus, HarnessError, ManifestEntry, Outcome, Resources, Result};
use crate::bias_trie::BiasTrie;
use crate::decoder::DecodeConfig;
use crate::norm::{EntryId, NormalizationMapping};
use crate::scoring::{biased_wer, RateSummary, ScoringOptions};

/// What grid search minimizes. The other rate breaks ties, then the
/// smaller weight wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    #[default]
    BWer,
    Wer,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::BWer => "b-wer",
            Objective::Wer => "wer",
        })
    }
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "b-wer" | "bwer" => Ok(Self::BWer),
            "wer" => Ok(Self::Wer),
            other => Err(format!("unknown objective {other:?}")),
        }
    }
}

impl Objective {
    /// Sort key; an undefined rate sorts last.
    fn key(self, rates: &RateSummary) -> (f64, f64) {
        let v = |r: Option<f64>| r.unwrap_or(f64::INFINITY);
        match self {
            Objective::BWer => (v(rates.b_wer), v(rates.wer)),
            Objective::Wer => (v(rates.wer), v(rates.b_wer)),
        }
    }

    fn cmp(self, a: &RateSummary, b: &RateSummary) -> Ordering {
        let (a, b) = (self.key(a), self.key(b));
        a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub weight: f64,
    #[serde(flatten)]
    pub rates: RateSummary,
}

/// Weight chosen for one keyword by the refinement sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetWeight {
    pub raw: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSearchResult {
    pub objective: Objective,
    pub points: Vec<GridPoint>,
    pub selected: f64,
    /// Present when the per-target sweep ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<TargetWeight>>,
    /// Rates after the per-target sweep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refined: Option<RateSummary>,
}

fn evaluate(
    entries: &[ManifestEntry],
    res: &Resources,
    mapping: &NormalizationMapping,
    config: &DecodeConfig,
    terms: &[String],
) -> Result<RateSummary> {
    let trie = BiasTrie::build(mapping, res.lm.as_ref(), config.rarity_threshold, config.boost_weight);
    let res = Resources {
        mapping: Some(mapping.clone()),
        ..res.clone()
    };
    let mut hyps = HashMap::new();
    for outcome in decode_corpus(entries, &res, Some(&trie), config) {
        match outcome {
            Outcome::Ok(t) => {
                hyps.insert(t.id, t.text);
            }
            Outcome::Failed { id, error } => return Err(HarnessError::Data(format!("{id}: {error}"))),
        }
    }
    let corpus = pair_corpus(entries, &hyps)?;
    Ok(biased_wer(&corpus, terms, ScoringOptions::default())?.corpus)
}

/// Decodes the dev set once per grid weight and keeps the best.
///
/// With `per_target`, a single coordinate-descent sweep then tries every
/// grid weight for one keyword at a time while the others stay fixed.
pub fn grid_search(
    entries: &[ManifestEntry],
    res: &Resources,
    base: &DecodeConfig,
    grid: &[f64],
    objective: Objective,
    per_target: bool,
) -> Result<GridSearchResult> {
    let mapping = res
        .mapping
        .as_ref()
        .ok_or_else(|| HarnessError::Usage("grid search needs a keyword list".into()))?;
    if grid.is_empty() {
        return Err(HarnessError::Usage("empty weight grid".into()));
    }
    if grid.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(HarnessError::Usage("grid weights must be finite and non-negative".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let terms: Vec<String> = mapping.entries().iter().map(|e| e.raw.clone()).collect();

    let mut points = Vec::with_capacity(grid.len());
    for &weight in &grid {
        let config = DecodeConfig {
            boost_weight: weight,
            ..base.clone()
        };
        let rates = evaluate(entries, res, mapping, &config, &terms)?;
        log::info!("W={weight}: wer={:?} b_wer={:?}", rates.wer, rates.b_wer);
        points.push(GridPoint { weight, rates });
    }
    // grid is ascending and min_by keeps the first minimum, so ties go to the smaller weight
    let best = points
        .iter()
        .min_by(|a, b| objective.cmp(&a.rates, &b.rates))
        .expect("grid is non-empty");
    let selected = best.weight;

    let (targets, refined) = if per_target {
        let config = DecodeConfig {
            boost_weight: selected,
            ..base.clone()
        };
        let mut current = mapping.clone();
        let mut current_rates = best.rates.clone();
        for id in (0..mapping.len()).map(EntryId) {
            let mut best_here: Option<(f64, RateSummary)> = None;
            for &weight in &grid {
                let trial = current.with_entry_weight(id, Some(weight));
                let rates = evaluate(entries, res, &trial, &config, &terms)?;
                if best_here
                    .as_ref()
                    .is_none_or(|(_, r)| objective.cmp(&rates, r) == Ordering::Less)
                {
                    best_here = Some((weight, rates));
                }
            }
            let (weight, rates) = best_here.expect("grid is non-empty");
            current = current.with_entry_weight(id, Some(weight));
            current_rates = rates;
        }
        let targets = current
            .entries()
            .iter()
            .map(|e| TargetWeight {
                raw: e.raw.clone(),
                weight: e.weight.unwrap_or(selected),
            })
            .collect();
        (Some(targets), Some(current_rates))
    } else {
        (None, None)
    };

    Ok(GridSearchResult {
        objective,
        points,
        selected,
        targets,
        refined,
    })
}
