use std::cmp::Ordering;
use std::collections::HashMap;
use std::f64::consts::LN_10;
use std::sync::Arc;

use super::vocab::TokenRole;
use super::{
    BoostMode, DecodeConfig, DecodeError, DecodeResult, FinalBoost, Hypothesis, LogitMatrix,
    PartialResult, ScoreBreakdown, Vocabulary,
};
use crate::bias_trie::BiasTrie;
use crate::lm::NGramLM;

const SENTENCE_START: &str = "<s>";
const SENTENCE_END: &str = "</s>";

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// One prefix in the beam. Everything except the two CTC probabilities is a
/// function of `tokens`, so prefixes reached along different paths agree.
#[derive(Debug, Clone)]
struct Beam {
    tokens: Vec<usize>,
    /// Prefix probability of alignments ending in blank.
    log_b: f64,
    /// Prefix probability of alignments ending in the last token.
    log_nb: f64,
    words: Arc<Vec<String>>,
    pending: String,
    lm_fused: f64,
    word_bonus: f64,
    partial_boost: f64,
    final_boost: f64,
}

impl Beam {
    fn root() -> Self {
        Self {
            tokens: Vec::new(),
            log_b: 0.0,
            log_nb: f64::NEG_INFINITY,
            words: Arc::new(Vec::new()),
            pending: String::new(),
            lm_fused: 0.0,
            word_bonus: 0.0,
            partial_boost: 0.0,
            final_boost: 0.0,
        }
    }

    /// Same prefix with no probability mass yet.
    fn empty_copy(&self) -> Self {
        Self {
            log_b: f64::NEG_INFINITY,
            log_nb: f64::NEG_INFINITY,
            ..self.clone()
        }
    }

    fn acoustic(&self) -> f64 {
        log_add(self.log_b, self.log_nb)
    }

    fn scores(&self) -> ScoreBreakdown {
        let acoustic = self.acoustic();
        ScoreBreakdown {
            acoustic,
            lm_fused: self.lm_fused,
            word_bonus: self.word_bonus,
            partial_boost: self.partial_boost,
            final_boost: self.final_boost,
            total: acoustic + self.lm_fused + self.word_bonus + self.partial_boost + self.final_boost,
        }
    }

    fn total(&self) -> f64 {
        self.scores().total
    }

    fn all_words(&self) -> impl Iterator<Item = &str> {
        self.words
            .iter()
            .map(String::as_str)
            .chain((!self.pending.is_empty()).then_some(self.pending.as_str()))
    }

    fn word_count(&self) -> usize {
        self.words.len() + usize::from(!self.pending.is_empty())
    }
}

/// Best first: higher total, then fewer words, then word sequence, then tokens.
fn rank(a: &Beam, b: &Beam) -> Ordering {
    b.total()
        .total_cmp(&a.total())
        .then_with(|| a.word_count().cmp(&b.word_count()))
        .then_with(|| a.all_words().cmp(b.all_words()))
        .then_with(|| a.tokens.cmp(&b.tokens))
}

/// Streaming decoder state for one utterance.
///
/// Sessions borrow the shared, immutable vocabulary, LM and trie, so any
/// number can run concurrently.
#[derive(Debug, Clone)]
pub struct DecoderSession<'a> {
    vocab: &'a Vocabulary,
    config: DecodeConfig,
    lm: Option<&'a NGramLM>,
    trie: Option<&'a BiasTrie>,
    beams: Vec<Beam>,
    frames: usize,
    partials: Vec<PartialResult>,
    lm_has_bos: bool,
}

impl<'a> DecoderSession<'a> {
    pub fn new(
        vocab: &'a Vocabulary,
        config: DecodeConfig,
        lm: Option<&'a NGramLM>,
        trie: Option<&'a BiasTrie>,
    ) -> Result<Self, DecodeError> {
        config.validate()?;
        if config.mode != BoostMode::Baseline && trie.is_none() {
            return Err(DecodeError::MissingTrie(config.mode));
        }
        Ok(Self {
            vocab,
            config,
            lm,
            trie,
            beams: vec![Beam::root()],
            frames: 0,
            partials: Vec::new(),
            lm_has_bos: lm.is_some_and(|lm| lm.contains(SENTENCE_START)),
        })
    }

    pub fn config(&self) -> &DecodeConfig {
        &self.config
    }

    pub fn trie(&self) -> Option<&'a BiasTrie> {
        self.trie
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn partials(&self) -> &[PartialResult] {
        &self.partials
    }

    /// Consumes a chunk of frames and returns the current best partial.
    pub fn push_frames(&mut self, chunk: &LogitMatrix) -> Result<PartialResult, DecodeError> {
        if chunk.vocab_size() != self.vocab.len() {
            return Err(DecodeError::DimensionMismatch {
                expected: self.vocab.len(),
                got: chunk.vocab_size(),
            });
        }
        for t in 0..chunk.frames() {
            self.step(chunk.row(t));
        }
        self.frames += chunk.frames();
        let best = &self.beams[0];
        let partial = PartialResult {
            frames: self.frames,
            words: best.all_words().map(str::to_string).collect(),
            scores: best.scores(),
        };
        self.partials.push(partial.clone());
        Ok(partial)
    }

    fn step(&mut self, row: &[f32]) {
        let blank = self.vocab.blank();
        let blank_lp = row[blank] as f64;
        let floor = self.config.token_prune_log_prob;
        // A one-token extension of beam i can already be in the beam as
        // beam j; index those pairs once so extensions merge into j.
        let index: HashMap<&[usize], usize> = self
            .beams
            .iter()
            .enumerate()
            .map(|(i, b)| (b.tokens.as_slice(), i))
            .collect();
        let existing: HashMap<(usize, usize), usize> = self
            .beams
            .iter()
            .enumerate()
            .filter_map(|(j, b)| {
                let (&last, parent) = b.tokens.split_last()?;
                index.get(parent).map(|&i| ((i, last), j))
            })
            .collect();

        // slots 0..n hold the current prefixes, new children are appended
        let mut next: Vec<Beam> = self.beams.iter().map(Beam::empty_copy).collect();
        for (i, beam) in self.beams.iter().enumerate() {
            let acoustic = beam.acoustic();
            if acoustic == f64::NEG_INFINITY {
                continue;
            }
            let stay = &mut next[i];
            stay.log_b = log_add(stay.log_b, acoustic + blank_lp);
            let last = beam.tokens.last().copied();
            if let Some(last) = last {
                stay.log_nb = log_add(stay.log_nb, beam.log_nb + row[last] as f64);
            }

            for (c, &lp) in row.iter().enumerate() {
                let lp = lp as f64;
                if c == blank || lp < floor {
                    continue;
                }
                // a repeated token only extends across a blank
                let mass = if last == Some(c) { beam.log_b + lp } else { acoustic + lp };
                if mass == f64::NEG_INFINITY {
                    continue;
                }
                let slot = match existing.get(&(i, c)) {
                    Some(&j) => j,
                    None => {
                        next.push(self.extend(beam, c));
                        next.len() - 1
                    }
                };
                next[slot].log_nb = log_add(next[slot].log_nb, mass);
            }
        }

        let mut beams: Vec<Beam> = next.into_iter().filter(|b| b.acoustic() > f64::NEG_INFINITY).collect();
        if beams.is_empty() {
            return;
        }
        let width = self.config.beam_width;
        if beams.len() > width {
            beams.select_nth_unstable_by(width - 1, rank);
            beams.truncate(width);
        }
        beams.sort_by(rank);
        self.beams = beams;
    }

    fn extend(&self, parent: &Beam, token: usize) -> Beam {
        let mut child = parent.empty_copy();
        child.tokens.push(token);
        match self.vocab.role(token) {
            TokenRole::Blank => {}
            TokenRole::Separator => {
                if !child.pending.is_empty() {
                    let word = std::mem::take(&mut child.pending);
                    self.commit(&mut child, word);
                }
            }
            TokenRole::StartWord(text) => {
                if !child.pending.is_empty() {
                    let word = std::mem::take(&mut child.pending);
                    self.commit(&mut child, word);
                }
                child.pending.push_str(text);
            }
            TokenRole::Continue(text) => child.pending.push_str(text),
        }
        child
    }

    fn lm_score(&self, lm: &NGramLM, history: &[String], word: &str) -> f64 {
        let keep = lm.order().saturating_sub(1);
        let recent = &history[history.len().saturating_sub(keep)..];
        let mut ctx: Vec<&str> = Vec::with_capacity(keep + 1);
        if self.lm_has_bos && recent.len() == history.len() {
            ctx.push(SENTENCE_START);
        }
        ctx.extend(recent.iter().map(String::as_str));
        self.config.lm_weight * LN_10 * lm.log10_cond(word, &ctx)
    }

    fn commit(&self, beam: &mut Beam, word: String) {
        if let Some(lm) = self.lm {
            beam.lm_fused += self.lm_score(lm, &beam.words, &word);
        }
        beam.word_bonus += self.config.word_bonus;
        if self.config.mode != BoostMode::Baseline {
            if let Some(w) = self.trie.and_then(|t| t.unigram_weight(&word)) {
                beam.partial_boost += w;
            }
        }
        Arc::make_mut(&mut beam.words).push(word);
    }

    /// Flushes pending words, applies the mode's final rescoring, and re-ranks.
    pub fn finalize(self) -> DecodeResult {
        let mut beams = self.beams.clone();
        for beam in &mut beams {
            if !beam.pending.is_empty() {
                let word = std::mem::take(&mut beam.pending);
                self.commit(beam, word);
            }
            if let Some(lm) = self.lm.filter(|lm| lm.contains(SENTENCE_END)) {
                beam.lm_fused += self.lm_score(lm, &beam.words, SENTENCE_END);
            }
            if self.config.mode == BoostMode::Ngram {
                let trie = self.trie.expect("checked in new");
                beam.partial_boost = 0.0;
                beam.final_boost = trie
                    .find_matches(&beam.words)
                    .iter()
                    .map(|m| match self.config.final_boost {
                        FinalBoost::PerWord => m.weight * m.len() as f64,
                        FinalBoost::PerMatch => m.weight,
                    })
                    .sum();
            }
        }
        beams.sort_by(rank);

        let words: Vec<String> = beams[0].words.as_ref().clone();
        let matches = self.trie.map(|t| t.find_matches(&words)).unwrap_or_default();
        let nbest = beams
            .iter()
            .map(|b| Hypothesis {
                tokens: b.tokens.clone(),
                words: b.words.as_ref().clone(),
                scores: b.scores(),
            })
            .collect();
        DecodeResult {
            words,
            nbest,
            matches,
            partials: self.partials,
        }
    }
}

/// Decodes a whole utterance in one chunk.
pub fn decode(
    logits: &LogitMatrix,
    vocab: &Vocabulary,
    config: &DecodeConfig,
    lm: Option<&NGramLM>,
    trie: Option<&BiasTrie>,
) -> Result<DecodeResult, DecodeError> {
    let mut session = DecoderSession::new(vocab, config.clone(), lm, trie)?;
    session.push_frames(logits)?;
    Ok(session.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::Boundary;
    use crate::norm::{KeywordSpec, NormalizationMapping};

    fn single_char_words() -> Vocabulary {
        let tokens = ["<b>", "▁a", "▁b"].iter().map(|s| s.to_string()).collect();
        Vocabulary::new(tokens, 0, Boundary::Prefix("▁".into())).unwrap()
    }

    fn plain() -> DecodeConfig {
        DecodeConfig {
            word_bonus: 0.0,
            token_prune_log_prob: f64::NEG_INFINITY,
            beam_width: 64,
            ..DecodeConfig::default()
        }
    }

    fn toy_logits() -> LogitMatrix {
        LogitMatrix::from_probabilities(&[
            vec![0.1, 0.8, 0.1],
            vec![0.7, 0.2, 0.1],
            vec![0.1, 0.1, 0.8],
        ])
        .unwrap()
    }

    /// Sum over all 3^3 alignments collapsing to `target`.
    fn path_sum(rows: &[Vec<f64>], target: &[usize]) -> f64 {
        let mut total = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let path = [a, b, c];
                    let mut collapsed = Vec::new();
                    let mut prev = None;
                    for &t in &path {
                        if Some(t) != prev && t != 0 {
                            collapsed.push(t);
                        }
                        prev = Some(t);
                    }
                    if collapsed == target {
                        total += rows[0][a] * rows[1][b] * rows[2][c];
                    }
                }
            }
        }
        total
    }

    #[test]
    fn empty_chunk_gives_empty_partial() {
        let vocab = single_char_words();
        let mut s = DecoderSession::new(&vocab, plain(), None, None).unwrap();
        let p = s.push_frames(&LogitMatrix::empty(3)).unwrap();
        assert!(p.words.is_empty());
        assert_eq!(p.scores.total, 0.0);
    }

    #[test]
    fn toy_partial_matches_path_sum() {
        let vocab = single_char_words();
        let mut s = DecoderSession::new(&vocab, plain(), None, None).unwrap();
        let p = s.push_frames(&toy_logits()).unwrap();
        assert_eq!(p.words, vec!["a", "b"]);
        let rows = vec![vec![0.1, 0.8, 0.1], vec![0.7, 0.2, 0.1], vec![0.1, 0.1, 0.8]];
        let expected = path_sum(&rows, &[1, 2]).ln();
        // f32 storage of the logits limits agreement
        assert!((p.scores.total - expected).abs() < 1e-6, "{} vs {expected}", p.scores.total);
    }

    #[test]
    fn dimension_mismatch() {
        let vocab = single_char_words();
        let mut s = DecoderSession::new(&vocab, plain(), None, None).unwrap();
        let bad = LogitMatrix::from_probabilities(&[vec![0.5, 0.5]]).unwrap();
        assert!(matches!(
            s.push_frames(&bad),
            Err(DecodeError::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn session_preconditions() {
        let vocab = single_char_words();
        let cfg = DecodeConfig {
            mode: BoostMode::Ngram,
            ..plain()
        };
        assert!(matches!(
            DecoderSession::new(&vocab, cfg, None, None),
            Err(DecodeError::MissingTrie(BoostMode::Ngram))
        ));
        let cfg = DecodeConfig {
            beam_width: 0,
            ..plain()
        };
        assert!(DecoderSession::new(&vocab, cfg, None, None).is_err());
        let cfg = DecodeConfig {
            boost_weight: -1.0,
            ..plain()
        };
        assert!(DecoderSession::new(&vocab, cfg, None, None).is_err());
    }

    #[test]
    fn default_boost_adds_weight_per_committed_word() {
        let vocab = single_char_words();
        let mapping = NormalizationMapping::build(&[KeywordSpec::new("b")], None).unwrap();
        let run = |w: f64| {
            let trie = BiasTrie::build(&mapping, None, -4.0, w);
            let cfg = DecodeConfig {
                mode: BoostMode::Default,
                boost_weight: w,
                ..plain()
            };
            decode(&toy_logits(), &vocab, &cfg, None, Some(&trie)).unwrap()
        };
        let (zero, two) = (run(0.0), run(2.0));
        let pick = |r: &DecodeResult| r.nbest.iter().find(|h| h.tokens == [1, 2]).unwrap().scores;
        let (a, b) = (pick(&zero), pick(&two));
        assert!((b.total - a.total - 2.0).abs() < 1e-12);
        assert_eq!(b.partial_boost, 2.0);
        assert_eq!(a.acoustic, b.acoustic);
    }

    #[test]
    fn chunking_does_not_change_finals() {
        let vocab = single_char_words();
        let logits = toy_logits();
        let whole = decode(&logits, &vocab, &plain(), None, None).unwrap();
        let mut s = DecoderSession::new(&vocab, plain(), None, None).unwrap();
        for t in 0..logits.frames() {
            s.push_frames(&logits.slice(t..t + 1)).unwrap();
        }
        let split = s.finalize();
        assert_eq!(split.nbest, whole.nbest);
        assert_eq!(split.words, whole.words);
        assert_eq!(split.partials.len(), 3);
    }

    #[test]
    fn sessions_can_move_between_threads() {
        fn assert_send<T: Send>() {}
        assert_send::<DecoderSession<'static>>();
    }
}
