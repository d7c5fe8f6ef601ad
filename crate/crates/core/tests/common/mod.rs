#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use kwboost::decoder::{Boundary, LogitMatrix, Vocabulary};
use kwboost::harness::{make_fixtures, read_fixture_specs, FixtureSpec, Segment};
use kwboost::norm::normalize_keyword;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Bigram LM over the letter words a..d; c and d are rare.
pub const LETTER_LM: &str = "\\data\\
ngram 1=6
ngram 2=3

\\1-grams:
-0.80\t<s>\t-0.30
-0.90\t</s>
-0.50\ta\t-0.20
-0.70\tb\t-0.25
-4.50\tc\t-0.10
-5.00\td\t-0.10

\\2-grams:
-0.30\t<s> a
-0.40\ta b
-1.20\tb c

\\end\\
";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let hi = a.max(b);
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// Log-probability of every label sequence, by enumerating all V^T frame
/// paths and collapsing repeats and blanks.
pub fn exhaustive_ctc(m: &LogitMatrix, blank: usize) -> HashMap<Vec<usize>, f64> {
    let (t, v) = (m.frames(), m.vocab_size());
    let mut out: HashMap<Vec<usize>, f64> = HashMap::new();
    let mut path = vec![0usize; t];
    loop {
        let mut lp = 0.0;
        let mut label = Vec::new();
        let mut prev = None;
        for (frame, &tok) in path.iter().enumerate() {
            lp += m.row(frame)[tok] as f64;
            if tok != blank && prev != Some(tok) {
                label.push(tok);
            }
            prev = Some(tok);
        }
        let e = out.entry(label).or_insert(f64::NEG_INFINITY);
        *e = log_add(*e, lp);
        // next path in lexicographic order
        let mut i = t;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            path[i] += 1;
            if path[i] < v {
                break;
            }
            path[i] = 0;
        }
    }
}

/// Random softmax rows; `sharp` scales the pre-softmax scores.
pub fn random_logits(rng: &mut ChaCha8Rng, frames: usize, vocab: usize, sharp: f64) -> LogitMatrix {
    let rows: Vec<Vec<f64>> = (0..frames)
        .map(|_| {
            let raw: Vec<f64> = (0..vocab).map(|_| rng.gen_range(-1.0..1.0) * sharp).collect();
            let z: f64 = raw.iter().map(|x| x.exp()).sum();
            raw.iter().map(|x| x.exp() / z).collect()
        })
        .collect();
    LogitMatrix::from_probabilities(&rows).expect("valid rows")
}

/// Word-piece vocabulary where every non-blank token starts its own word.
pub fn letter_words(v: usize) -> Vocabulary {
    let mut tokens = vec!["<b>".to_string()];
    tokens.extend((0..v - 1).map(|i| format!("▁{}", (b'a' + i as u8) as char)));
    Vocabulary::new(tokens, 0, Boundary::Prefix("▁".into())).unwrap()
}

/// Delimiter vocabulary: blank, `|`, then letters.
pub fn delimited(v: usize) -> Vocabulary {
    let mut tokens = vec!["<b>".to_string(), "|".to_string()];
    tokens.extend((0..v - 2).map(|i| ((b'a' + i as u8) as char).to_string()));
    Vocabulary::with_delimiter(tokens, 0, "|").unwrap()
}

pub fn load_specs(path: &Path) -> Vec<FixtureSpec> {
    read_fixture_specs(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Generates fixture files for `specs` into a fresh temporary directory.
pub fn generate(specs: &[FixtureSpec], seed: u64) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    make_fixtures(specs, seed, dir.path()).unwrap();
    dir
}

pub const SUITE_KEYWORDS: [&str; 20] = [
    "C3PO", "R2D2", "B52", "MP3", "4K", "A380", "F150", "3D", "5G", "X5", "K9", "G7", "U2", "B12", "P90", "D3",
    "M16", "F35", "T800", "X7",
];

const CARRIERS: [(&str, &str); 5] = [
    ("please play", "now"),
    ("we ordered the", "yesterday"),
    ("show me the", "model"),
    ("is the", "ready"),
    ("they said", "again"),
];

/// Sound-alike word for a spoken keyword word.
fn confusable(word: &str) -> &'static str {
    match word {
        "a" => "ay",
        "b" => "bee",
        "c" => "see",
        "d" => "dee",
        "f" => "eff",
        "g" => "gee",
        "k" => "kay",
        "m" => "em",
        "o" => "oh",
        "p" => "pee",
        "r" => "are",
        "t" => "tee",
        "u" => "you",
        "x" => "ex",
        "zero" => "hero",
        "one" => "won",
        "two" => "too",
        "three" => "tree",
        "four" => "for",
        "five" => "hive",
        "six" => "sticks",
        "seven" => "heaven",
        "eight" => "ate",
        "nine" => "fine",
        "hundred" => "hunted",
        "thousand" => "thou sand",
        other => panic!("no confusable for {other:?}"),
    }
}

/// 100 utterances: each of the 20 alphanumeric keywords in 5 carrier
/// sentences, spoken at 0.35 confidence against a sound-alike at 0.40.
pub fn synthetic_suite() -> Vec<FixtureSpec> {
    let mut specs = Vec::new();
    for (k, raw) in SUITE_KEYWORDS.iter().enumerate() {
        // the letter-by-letter reading is the first variant for every keyword here
        let spoken = normalize_keyword(raw, None).unwrap().remove(0);
        let alternative: Vec<&str> = spoken.iter().map(|w| confusable(w)).collect();
        for (c, (before, after)) in CARRIERS.iter().enumerate() {
            specs.push(FixtureSpec {
                id: format!("s{k:02}_{c}"),
                reference: format!("{before} {raw} {after}"),
                segments: vec![
                    Segment {
                        text: before.to_string(),
                        confidence: 0.9,
                        alternative: None,
                        alt_confidence: 0.0,
                    },
                    Segment {
                        text: spoken.join(" "),
                        confidence: 0.35,
                        alternative: Some(alternative.join(" ")),
                        alt_confidence: 0.40,
                    },
                    Segment {
                        text: after.to_string(),
                        confidence: 0.9,
                        alternative: None,
                        alt_confidence: 0.0,
                    },
                ],
            });
        }
    }
    specs
}
