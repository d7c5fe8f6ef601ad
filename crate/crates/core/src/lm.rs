//! Back-off n-gram language model read from ARPA text.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

/// Log10 probability used for unknown words in fusion scoring by default.
pub const DEFAULT_UNK_LOG10: f64 = -8.0;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("missing \\data\\ section")]
    MissingData,
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("{order}-grams: declared {declared} entries, found {found}")]
    CountMismatch {
        order: usize,
        declared: usize,
        found: usize,
    },
    #[error("missing \\{order}-grams: section")]
    MissingSection { order: usize },
    #[error("line {line}: context of {ngram:?} is not listed at the lower order")]
    MissingContext { line: usize, ngram: String },
    #[error("missing \\end\\ marker")]
    MissingEnd,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    log10_prob: f64,
    log10_backoff: f64,
}

/// Word-level back-off model. Immutable after load.
#[derive(Debug, Clone)]
pub struct NGramLM {
    order: usize,
    vocab: HashMap<String, u32>,
    /// `tables[n - 1]` holds the n-grams, keyed by word ids.
    tables: Vec<HashMap<Vec<u32>, Entry>>,
    unk_log10: f64,
}

impl NGramLM {
    pub fn load_arpa(path: impl AsRef<Path>) -> Result<Self, LmError> {
        let file = std::fs::File::open(path)?;
        Self::read_arpa(std::io::BufReader::new(file))
    }

    pub fn from_arpa_str(text: &str) -> Result<Self, LmError> {
        Self::read_arpa(text.as_bytes())
    }

    pub fn read_arpa(reader: impl BufRead) -> Result<Self, LmError> {
        let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));

        // header
        let mut saw_data = false;
        let mut declared: Vec<usize> = Vec::new();
        let mut pending_section: Option<(usize, usize)> = None;
        for (line_no, line) in lines.by_ref() {
            let line = line?;
            let line = line.trim();
            if !saw_data {
                if line == "\\data\\" {
                    saw_data = true;
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("ngram ") {
                let (n, count) = rest.split_once('=').ok_or_else(|| malformed(line_no, "expected `ngram N=count`"))?;
                let n: usize = n.trim().parse().map_err(|_| malformed(line_no, "bad n-gram order"))?;
                let count: usize = count.trim().parse().map_err(|_| malformed(line_no, "bad n-gram count"))?;
                if n != declared.len() + 1 {
                    return Err(malformed(line_no, "n-gram counts out of order"));
                }
                declared.push(count);
                continue;
            }
            if let Some(n) = section_order(line) {
                pending_section = Some((n, line_no));
                break;
            }
            return Err(malformed(line_no, "unexpected line in \\data\\ section"));
        }
        if !saw_data {
            return Err(LmError::MissingData);
        }
        if declared.is_empty() {
            return Err(LmError::MissingSection { order: 1 });
        }

        let order = declared.len();
        let mut vocab: HashMap<String, u32> = HashMap::new();
        let mut tables: Vec<HashMap<Vec<u32>, Entry>> = vec![HashMap::new(); order];
        let mut found = vec![0usize; order];
        let mut seen_sections: HashSet<usize> = HashSet::new();
        let mut current = pending_section;
        let mut ended = false;

        if let Some((n, line_no)) = current {
            if n != 1 {
                return Err(malformed(line_no, "expected \\1-grams: first"));
            }
            seen_sections.insert(n);
        }

        for (line_no, line) in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line == "\\end\\" {
                ended = true;
                break;
            }
            if let Some(n) = section_order(line) {
                if n == 0 || n > order {
                    return Err(malformed(line_no, "section order not declared in \\data\\"));
                }
                if let Some((prev, _)) = current {
                    if n != prev + 1 {
                        return Err(malformed(line_no, "n-gram sections out of order"));
                    }
                }
                seen_sections.insert(n);
                current = Some((n, line_no));
                continue;
            }
            let Some((n, _)) = current else {
                return Err(malformed(line_no, "entry outside an n-gram section"));
            };
            let mut fields = line.split_whitespace();
            let prob: f64 = fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| malformed(line_no, "bad log10 probability"))?;
            let words: Vec<&str> = fields.by_ref().take(n).collect();
            if words.len() != n {
                return Err(malformed(line_no, "too few words for section order"));
            }
            let backoff: f64 = match fields.next() {
                Some(f) => f.parse().map_err(|_| malformed(line_no, "bad log10 backoff"))?,
                None => 0.0,
            };
            if fields.next().is_some() {
                return Err(malformed(line_no, "trailing fields"));
            }
            if !prob.is_finite() || prob > 0.0 || !backoff.is_finite() {
                return Err(malformed(line_no, "log10 values must be finite and probabilities <= 0"));
            }
            let key: Vec<u32> = if n == 1 {
                let next_id = vocab.len() as u32;
                let id = *vocab.entry(words[0].to_string()).or_insert(next_id);
                vec![id]
            } else {
                let mut key = Vec::with_capacity(n);
                for w in &words {
                    match vocab.get(*w) {
                        Some(&id) => key.push(id),
                        None => {
                            return Err(LmError::MissingContext {
                                line: line_no,
                                ngram: words.join(" "),
                            })
                        }
                    }
                }
                if !tables[n - 2].contains_key(&key[..n - 1]) {
                    return Err(LmError::MissingContext {
                        line: line_no,
                        ngram: words.join(" "),
                    });
                }
                key
            };
            if tables[n - 1]
                .insert(
                    key,
                    Entry {
                        log10_prob: prob,
                        log10_backoff: backoff,
                    },
                )
                .is_some()
            {
                return Err(malformed(line_no, "duplicate n-gram"));
            }
            found[n - 1] += 1;
        }

        if !ended {
            return Err(LmError::MissingEnd);
        }
        for n in 1..=order {
            if !seen_sections.contains(&n) {
                return Err(LmError::MissingSection { order: n });
            }
            if declared[n - 1] != found[n - 1] {
                return Err(LmError::CountMismatch {
                    order: n,
                    declared: declared[n - 1],
                    found: found[n - 1],
                });
            }
        }

        Ok(Self {
            order,
            vocab,
            tables,
            unk_log10: DEFAULT_UNK_LOG10,
        })
    }

    /// Sets the log10 probability returned for unknown words during fusion.
    pub fn with_unk_log10(mut self, floor: f64) -> Self {
        self.unk_log10 = floor;
        self
    }

    pub fn unk_log10(&self) -> f64 {
        self.unk_log10
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.vocab.contains_key(word)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.vocab.keys().map(String::as_str)
    }

    /// Unigram log10 probability for rarity gating; unknown words are `-inf`.
    pub fn unigram_log10(&self, word: &str) -> f64 {
        self.vocab
            .get(word)
            .and_then(|&id| self.tables[0].get(&[id][..]))
            .map(|e| e.log10_prob)
            .unwrap_or(f64::NEG_INFINITY)
    }

    /// Back-off conditional log10 P(word | context).
    ///
    /// Only the last `order - 1` context words are used. Unknown words score
    /// the configured floor at the unigram level.
    pub fn log10_cond<S: AsRef<str>>(&self, word: &str, context: &[S]) -> f64 {
        let keep = context.len().min(self.order - 1);
        let ctx = &context[context.len() - keep..];
        // a context word outside the vocabulary cuts the usable history
        let usable = ctx
            .iter()
            .rposition(|w| !self.vocab.contains_key(w.as_ref()))
            .map_or(0, |p| p + 1);
        let ids: Vec<u32> = ctx[usable..].iter().map(|w| self.vocab[w.as_ref()]).collect();
        let Some(&word_id) = self.vocab.get(word) else {
            return self.backoff_sum(&ids) + self.unk_log10;
        };

        let mut score = 0.0;
        let mut key = ids.clone();
        key.push(word_id);
        for start in 0..=ids.len() {
            let gram = &key[start..];
            if let Some(e) = self.tables[gram.len() - 1].get(gram) {
                return score + e.log10_prob;
            }
            let hist = &ids[start..];
            if !hist.is_empty() {
                if let Some(e) = self.tables[hist.len() - 1].get(hist) {
                    score += e.log10_backoff;
                }
            }
        }
        // word is in the vocabulary, so the unigram lookup above cannot miss
        score + self.unk_log10
    }

    fn backoff_sum(&self, ids: &[u32]) -> f64 {
        (0..ids.len())
            .filter_map(|start| {
                let hist = &ids[start..];
                self.tables[hist.len() - 1].get(hist).map(|e| e.log10_backoff)
            })
            .sum()
    }
}

fn section_order(line: &str) -> Option<usize> {
    line.strip_prefix('\\')?
        .strip_suffix("-grams:")?
        .parse()
        .ok()
}

fn malformed(line: usize, message: &str) -> LmError {
    LmError::Malformed {
        line,
        message: message.to_string(),
    }
}
