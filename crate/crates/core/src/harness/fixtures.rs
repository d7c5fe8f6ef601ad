//! Synthetic logit generator standing in for recorded audio.
//!
//! Each spec line describes an utterance as segments of spoken-form text.
//! Every character gets one frame whose most likely token is that character
//! at the segment's confidence, with blank frames in between. A segment may
//! name a confusable alternative: the two strings are aligned character by
//! character and each frame gives the alternative's token (blank for a gap)
//! `alt_confidence`. Leftover mass is spread over the remaining tokens with a
//! seeded RNG.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{write_file, HarnessError, ManifestEntry, Result};
use crate::decoder::{Boundary, LogitMatrix, Vocabulary};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
pub const FIXTURE_VOCAB_FILE: &str = "vocab.txt";

/// Probability of blank on the frames between characters.
const GAP_BLANK: f64 = 0.9;
/// Confidence of the separator frame between segments.
const SEPARATOR_CONFIDENCE: f64 = 0.9;
/// Smallest probability any token receives.
const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Spoken-form words; may be empty when only the alternative is voiced.
    pub text: String,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternative: Option<String>,
    #[serde(default)]
    pub alt_confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub id: String,
    /// Written-form reference copied into the manifest.
    pub reference: String,
    pub segments: Vec<Segment>,
}

pub fn read_fixture_specs(text: &str) -> Result<Vec<FixtureSpec>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| HarnessError::Data(format!("spec line {}: {e}", n + 1))))
        .collect()
}

/// Frame plan: designated (token, probability) pairs per frame.
type Frame = Vec<(usize, f64)>;

fn token_ids(vocab: &Vocabulary, text: &str) -> Result<Vec<usize>> {
    let sep = match vocab.boundary() {
        Boundary::Delimiter(d) => *d,
        Boundary::Prefix(_) => return Err(HarnessError::Data("fixtures need a delimiter vocabulary".into())),
    };
    text.split_whitespace()
        .enumerate()
        .try_fold(Vec::new(), |mut out, (i, word)| {
            if i > 0 {
                out.push(sep);
            }
            for c in word.chars() {
                let id = vocab
                    .id(&c.to_string())
                    .filter(|&id| id != vocab.blank() && id != sep)
                    .ok_or_else(|| HarnessError::Data(format!("character {c:?} is not in the vocabulary")))?;
                out.push(id);
            }
            Ok(out)
        })
}

/// Levenshtein alignment of two token strings; `None` marks a gap.
fn align_chars(a: &[usize], b: &[usize]) -> Vec<(Option<usize>, Option<usize>)> {
    let (n, m) = (a.len(), b.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    let mut out = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]) {
            out.push((Some(a[i - 1]), Some(b[j - 1])));
            i -= 1;
            j -= 1;
        } else if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            out.push((Some(a[i - 1]), None));
            i -= 1;
        } else {
            out.push((None, Some(b[j - 1])));
            j -= 1;
        }
    }
    out.reverse();
    out
}

fn check_prob(p: f64, what: &str, id: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(HarnessError::Data(format!("{id}: {what} {p} outside [0, 1]")))
    }
}

fn plan(spec: &FixtureSpec, vocab: &Vocabulary) -> Result<Vec<Frame>> {
    let blank = vocab.blank();
    let sep = match vocab.boundary() {
        Boundary::Delimiter(d) => *d,
        Boundary::Prefix(_) => unreachable!("checked by token_ids"),
    };
    let mut frames: Vec<Frame> = vec![vec![(blank, GAP_BLANK)]];
    for (k, seg) in spec.segments.iter().enumerate() {
        check_prob(seg.confidence, "confidence", &spec.id)?;
        check_prob(seg.alt_confidence, "alt_confidence", &spec.id)?;
        if seg.confidence + seg.alt_confidence > 1.0 {
            return Err(HarnessError::Data(format!("{}: segment {k} confidences exceed 1", spec.id)));
        }
        if k > 0 {
            frames.push(vec![(sep, SEPARATOR_CONFIDENCE)]);
            frames.push(vec![(blank, GAP_BLANK)]);
        }
        let target = token_ids(vocab, &seg.text)?;
        let pairs = match &seg.alternative {
            Some(alt) => align_chars(&target, &token_ids(vocab, alt)?),
            None => target.iter().map(|&t| (Some(t), None)).collect(),
        };
        for (t, a) in pairs {
            let t = t.unwrap_or(blank);
            let frame = match a {
                None if seg.alternative.is_none() => vec![(t, seg.confidence)],
                a => {
                    let a = a.unwrap_or(blank);
                    if a == t {
                        vec![(t, seg.confidence + seg.alt_confidence)]
                    } else {
                        vec![(t, seg.confidence), (a, seg.alt_confidence)]
                    }
                }
            };
            frames.push(frame);
            frames.push(vec![(blank, GAP_BLANK)]);
        }
    }
    Ok(frames)
}

fn realize(frames: &[Frame], v: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let mut data = Vec::with_capacity(frames.len() * v);
    for frame in frames {
        let mut row = vec![0.0f64; v];
        let mut designated: f64 = frame.iter().map(|&(_, p)| p).sum();
        let others = v - frame.len();
        let min_rest = FLOOR * others as f64;
        let scale = if 1.0 - designated < min_rest {
            (1.0 - min_rest) / designated
        } else {
            1.0
        };
        for &(id, p) in frame {
            row[id] = p * scale;
        }
        designated *= scale;
        let rest = 1.0 - designated;
        if others > 0 {
            let weights: Vec<f64> = (0..v)
                .map(|id| {
                    if frame.iter().any(|&(d, _)| d == id) {
                        0.0
                    } else {
                        rng.gen_range(0.5..1.5)
                    }
                })
                .collect();
            let total: f64 = weights.iter().sum();
            for (id, w) in weights.iter().enumerate() {
                if *w > 0.0 {
                    row[id] = rest * w / total;
                }
            }
        }
        data.extend(row.iter().map(|&p| p.max(FLOOR * 1e-3).ln() as f32));
    }
    data
}

/// Writes `<id>.ctcl` per spec line, a manifest and the vocabulary into
/// `out_dir`. Output is byte-identical for the same specs and seed.
pub fn make_fixtures(specs: &[FixtureSpec], seed: u64, out_dir: &Path) -> Result<Vec<ManifestEntry>> {
    let vocab = Vocabulary::lowercase_chars();
    std::fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = String::new();
    let mut entries = Vec::with_capacity(specs.len());
    for spec in specs {
        if spec.id.is_empty() || spec.id.contains(['/', '\\']) {
            return Err(HarnessError::Data(format!("bad fixture id {:?}", spec.id)));
        }
        let frames = plan(spec, &vocab)?;
        let data = realize(&frames, vocab.len(), &mut rng);
        let logits = LogitMatrix::new(frames.len(), vocab.len(), data)?;
        let file = format!("{}.ctcl", spec.id);
        write_file(&out_dir.join(&file), &logits.to_bytes())?;
        let entry = ManifestEntry {
            id: spec.id.clone(),
            logits: file.into(),
            reference: Some(spec.reference.clone()),
        };
        manifest.push_str(&serde_json::to_string(&entry).expect("entry serializes"));
        manifest.push('\n');
        entries.push(entry);
    }
    write_file(&out_dir.join(MANIFEST_FILE), manifest.as_bytes())?;
    write_file(&out_dir.join(FIXTURE_VOCAB_FILE), vocab.to_file_string().as_bytes())?;
    Ok(entries)
}
