//! Word-level trie over normalized keyword variants.
//!
//! Finals use [`BiasTrie::find_matches`] for full n-gram matches. Partials use
//! the boostable unigram set, which only holds words the language model
//! considers rare.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::lm::NGramLM;
use crate::norm::{EntryId, NormalizationMapping};

/// Default rarity gate, log10 unigram probability.
pub const DEFAULT_RARITY_THRESHOLD: f64 = -4.0;

#[derive(Debug, Clone, PartialEq)]
struct Terminal {
    entry: EntryId,
    raw: String,
    weight: f64,
    len: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Node {
    children: BTreeMap<String, usize>,
    terminal: Option<Terminal>,
}

/// A full keyword match inside a word sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeywordMatch {
    /// First matched word (inclusive).
    pub start: usize,
    /// One past the last matched word.
    pub end: usize,
    #[serde(skip)]
    pub entry: EntryId,
    pub raw: String,
    /// Entry weight per matched word, natural-log score units.
    pub weight: f64,
}

impl KeywordMatch {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasTrie {
    nodes: Vec<Node>,
    unigrams: BTreeMap<String, f64>,
    terminals: usize,
}

impl Default for BiasTrie {
    fn default() -> Self {
        Self {
            nodes: vec![Node::default()],
            unigrams: BTreeMap::new(),
            terminals: 0,
        }
    }
}

impl BiasTrie {
    /// Builds the trie over every variant in `mapping`.
    ///
    /// A variant word joins the unigram set when its unigram log10
    /// probability is below `rarity_threshold`. Words unknown to the LM, or
    /// all words when no LM is given, count as `-inf` and always pass.
    pub fn build(
        mapping: &NormalizationMapping,
        lm: Option<&NGramLM>,
        rarity_threshold: f64,
        default_weight: f64,
    ) -> Self {
        let mut trie = Self::default();
        for (variant, id) in mapping.variants() {
            let entry = mapping.entry(id);
            let weight = entry.weight.unwrap_or(default_weight);
            let mut node = 0;
            for word in variant {
                node = match trie.nodes[node].children.get(word) {
                    Some(&child) => child,
                    None => {
                        trie.nodes.push(Node::default());
                        let child = trie.nodes.len() - 1;
                        trie.nodes[node].children.insert(word.clone(), child);
                        child
                    }
                };
                let rare = lm.map_or(f64::NEG_INFINITY, |lm| lm.unigram_log10(word)) < rarity_threshold;
                if rare {
                    trie.unigrams
                        .entry(word.clone())
                        .and_modify(|w| *w = w.max(weight))
                        .or_insert(weight);
                }
            }
            trie.nodes[node].terminal = Some(Terminal {
                entry: id,
                raw: entry.raw.clone(),
                weight,
                len: variant.len(),
            });
            trie.terminals += 1;
        }
        trie
    }

    pub fn terminal_count(&self) -> usize {
        self.terminals
    }

    pub fn is_empty(&self) -> bool {
        self.terminals == 0
    }

    /// Boost weight for a committed word, if it is in the unigram set.
    pub fn unigram_weight(&self, word: &str) -> Option<f64> {
        self.unigrams.get(word).copied()
    }

    pub fn unigrams(&self) -> &BTreeMap<String, f64> {
        &self.unigrams
    }

    /// Leftmost-longest, non-overlapping full matches in ascending order.
    pub fn find_matches<S: AsRef<str>>(&self, words: &[S]) -> Vec<KeywordMatch> {
        let mut out = Vec::new();
        let mut start = 0;
        while start < words.len() {
            let mut node = 0;
            let mut best: Option<(usize, &Terminal)> = None;
            for (offset, word) in words[start..].iter().enumerate() {
                match self.nodes[node].children.get(word.as_ref()) {
                    Some(&child) => node = child,
                    None => break,
                }
                if let Some(t) = &self.nodes[node].terminal {
                    best = Some((start + offset + 1, t));
                }
            }
            match best {
                Some((end, t)) => {
                    out.push(KeywordMatch {
                        start,
                        end,
                        entry: t.entry,
                        raw: t.raw.clone(),
                        weight: t.weight,
                    });
                    start = end;
                }
                None => start += 1,
            }
        }
        out
    }

    /// Text dump: one `path<TAB>raw<TAB>weight` line per keyword path in
    /// sorted order, then one `@unigram<TAB>word<TAB>weight` line per
    /// boostable word.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut stack: Vec<(usize, Vec<&str>)> = vec![(0, Vec::new())];
        let mut lines = Vec::new();
        while let Some((node, path)) = stack.pop() {
            if let Some(t) = &self.nodes[node].terminal {
                lines.push(format!("{}\t{}\t{}", path.join(" "), t.raw, t.weight));
            }
            for (word, &child) in self.nodes[node].children.iter().rev() {
                let mut p = path.clone();
                p.push(word);
                stack.push((child, p));
            }
        }
        for line in lines {
            out.push_str(&line);
            out.push('\n');
        }
        for (word, weight) in &self.unigrams {
            let _ = writeln!(out, "@unigram\t{word}\t{weight}");
        }
        out
    }
}
