//! Keyword normalization: written form to spoken-form word sequences, and back.
//!
//! A raw keyword such as `C3PO` or `IBM` is turned into one or more variants,
//! each a sequence of lowercase alphabetic words (`c three p o`). The
//! [`NormalizationMapping`] keeps the pairing so decoded spans can be written
//! back in their original form.

mod mapping;
mod numbers;

use std::collections::HashMap;

use thiserror::Error;

pub use mapping::{
    inverse_normalize, parse_exceptions, parse_keyword_list, Collision, EntryId, ItnOutput,
    KeywordEntry, KeywordSpec, NormalizationMapping, Replacement,
};
pub use numbers::{cardinal_for_run, cardinal_words, digits_to_words, MAX_CARDINAL_DIGITS};

/// A normalized word sequence.
pub type Variant = Vec<String>;

/// Manual overrides: raw keyword -> variants used verbatim.
pub type Exceptions = HashMap<String, Vec<Variant>>;

/// Upper bound on variants produced by the rule chain for one keyword.
pub const MAX_VARIANTS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("keyword is empty")]
    EmptyRaw,
    #[error("keyword {raw:?} normalizes to an empty word sequence")]
    EmptyNormalization { raw: String },
    #[error("keyword {raw:?}: word {word:?} is not lowercase alphabetic")]
    InvalidWord { raw: String, word: String },
    #[error("keyword {raw:?} has no variants")]
    NoVariants { raw: String },
    #[error("duplicate keyword {raw:?}")]
    DuplicateRaw { raw: String },
    #[error("keyword {raw:?} contains whitespace; multi-word targets need compound splitting enabled")]
    MultiWord { raw: String },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Whether `word` belongs to the normalized alphabet.
///
/// ASCII input always lands in `[a-z]+`; other scripts pass through as
/// lowercase alphabetic characters.
pub fn is_normalized_word(word: &str) -> bool {
    !word.is_empty() && word.chars().all(|c| c.is_alphabetic() && !c.is_uppercase())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Letter,
    Digit,
    Symbol,
}

fn classify(c: char) -> Class {
    if c.is_ascii_digit() {
        Class::Digit
    } else if c.is_alphabetic() {
        Class::Letter
    } else {
        Class::Symbol
    }
}

#[derive(Debug, Clone)]
struct Piece {
    class: Class,
    text: String,
    /// Index of the whitespace token the piece came from.
    token: usize,
}

/// Which rule produced the words of one piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    /// Digit run touching letters, read digit by digit.
    DigitsInCompound,
    /// Standalone digit run: cardinal plus digit-by-digit reading.
    StandaloneNumber,
    /// Standalone digit run too long (or zero-led) for a cardinal reading.
    LongNumber,
    /// `&`, `+`, `*`, or `x` between digits.
    SymbolWord,
    /// Punctuation dropped as a separator.
    Eliminated,
    /// Uppercase run of 2-4 letters read letter by letter.
    Initialism,
    /// Ordinary word, lowercased.
    Lowercase,
}

/// One step of the rule chain, for inspection and debugging.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub text: String,
    pub rule: Rule,
    pub alternatives: Vec<Variant>,
}

fn split_pieces(raw: &str) -> Vec<Piece> {
    let mut pieces: Vec<Piece> = Vec::new();
    for (token, word) in raw.split_whitespace().enumerate() {
        let mut current: Option<Piece> = None;
        for c in word.chars() {
            let class = classify(c);
            match current.as_mut() {
                // symbols are kept one per piece so each maps on its own
                Some(p) if p.class == class && class != Class::Symbol => p.text.push(c),
                _ => {
                    if let Some(p) = current.take() {
                        pieces.push(p);
                    }
                    current = Some(Piece {
                        class,
                        text: c.to_string(),
                        token,
                    });
                }
            }
        }
        if let Some(p) = current.take() {
            pieces.push(p);
        }
    }
    pieces
}

/// Splits a letter run at case boundaries: `CamelCase` -> `Camel`, `Case`;
/// `XMLHttp` -> `XML`, `Http`.
fn split_case(run: &str) -> Vec<String> {
    let chars: Vec<char> = run.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..chars.len() {
        let prev = chars[i - 1];
        let cur = chars[i];
        let lower_to_upper = prev.is_lowercase() && cur.is_uppercase();
        let acronym_end = prev.is_uppercase()
            && cur.is_uppercase()
            && chars.get(i + 1).is_some_and(|n| n.is_lowercase());
        if lower_to_upper || acronym_end {
            out.push(chars[start..i].iter().collect());
            start = i;
        }
    }
    out.push(chars[start..].iter().collect());
    out
}

fn is_vowel(c: char) -> bool {
    matches!(c.to_ascii_uppercase(), 'A' | 'E' | 'I' | 'O' | 'U')
}

fn lower(s: &str) -> String {
    s.chars().flat_map(char::to_lowercase).collect()
}

fn symbol_word(c: char) -> Option<&'static str> {
    match c {
        '&' => Some("and"),
        '+' => Some("plus"),
        '*' => Some("star"),
        _ => None,
    }
}

/// Runs the rule chain and reports what each piece turned into.
pub fn normalize_trace(raw: &str) -> Vec<TraceStep> {
    let pieces = split_pieces(raw);
    let token_piece_count = |token: usize| pieces.iter().filter(|p| p.token == token).count();
    let mut steps = Vec::new();

    for (i, piece) in pieces.iter().enumerate() {
        let prev = i.checked_sub(1).and_then(|j| pieces.get(j));
        let next = pieces.get(i + 1);
        match piece.class {
            Class::Digit => {
                let touches_letter = |p: Option<&Piece>| {
                    p.is_some_and(|p| p.token == piece.token && p.class == Class::Letter && !is_by(&pieces, p))
                };
                let digits = digits_to_words(&piece.text);
                if touches_letter(prev) || touches_letter(next) {
                    steps.push(TraceStep {
                        text: piece.text.clone(),
                        rule: Rule::DigitsInCompound,
                        alternatives: vec![digits],
                    });
                } else if let Some(cardinal) = cardinal_for_run(&piece.text) {
                    let alternatives = if cardinal == digits {
                        vec![digits]
                    } else {
                        vec![cardinal, digits]
                    };
                    steps.push(TraceStep {
                        text: piece.text.clone(),
                        rule: Rule::StandaloneNumber,
                        alternatives,
                    });
                } else {
                    steps.push(TraceStep {
                        text: piece.text.clone(),
                        rule: Rule::LongNumber,
                        alternatives: vec![digits],
                    });
                }
            }
            Class::Symbol => {
                let c = piece.text.chars().next().unwrap_or(' ');
                match symbol_word(c) {
                    Some(w) => steps.push(TraceStep {
                        text: piece.text.clone(),
                        rule: Rule::SymbolWord,
                        alternatives: vec![vec![w.to_string()]],
                    }),
                    None => steps.push(TraceStep {
                        text: piece.text.clone(),
                        rule: Rule::Eliminated,
                        alternatives: vec![vec![]],
                    }),
                }
            }
            Class::Letter if is_by(&pieces, piece) => steps.push(TraceStep {
                text: piece.text.clone(),
                rule: Rule::SymbolWord,
                alternatives: vec![vec!["by".to_string()]],
            }),
            Class::Letter => {
                let whole_token = token_piece_count(piece.token) == 1;
                let segments = split_case(&piece.text);
                let single_segment = segments.len() == 1;
                for seg in segments {
                    let n = seg.chars().count();
                    let all_upper = seg.chars().all(|c| c.is_uppercase());
                    if all_upper && (2..=4).contains(&n) {
                        let letters: Variant = seg.chars().map(|c| lower(&c.to_string())).collect();
                        let mut alternatives = vec![letters];
                        if whole_token && single_segment && !seg.chars().all(is_vowel) {
                            alternatives.push(vec![lower(&seg)]);
                        }
                        steps.push(TraceStep {
                            text: seg,
                            rule: Rule::Initialism,
                            alternatives,
                        });
                    } else {
                        steps.push(TraceStep {
                            alternatives: vec![vec![lower(&seg)]],
                            text: seg,
                            rule: Rule::Lowercase,
                        });
                    }
                }
            }
        }
    }
    steps
}

/// `x` sitting between two digit runs reads as "by" (`4x4`).
fn is_by(pieces: &[Piece], piece: &Piece) -> bool {
    if piece.class != Class::Letter || !piece.text.eq_ignore_ascii_case("x") {
        return false;
    }
    let Some(i) = pieces.iter().position(|p| std::ptr::eq(p, piece)) else {
        return false;
    };
    i > 0
        && pieces[i - 1].class == Class::Digit
        && pieces.get(i + 1).is_some_and(|p| p.class == Class::Digit)
}

/// Normalizes a written-form keyword into spoken-form variants.
///
/// An exceptions entry for `raw` (trimmed) wins over the rule chain and is
/// returned verbatim after validation.
pub fn normalize_keyword(raw: &str, exceptions: Option<&Exceptions>) -> Result<Vec<Variant>, NormError> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Err(NormError::EmptyRaw);
    }
    if let Some(variants) = exceptions.and_then(|e| e.get(raw)) {
        if variants.is_empty() {
            return Err(NormError::NoVariants { raw: raw.to_string() });
        }
        for v in variants {
            if v.is_empty() {
                return Err(NormError::EmptyNormalization { raw: raw.to_string() });
            }
            if let Some(w) = v.iter().find(|w| !is_normalized_word(w)) {
                return Err(NormError::InvalidWord {
                    raw: raw.to_string(),
                    word: w.clone(),
                });
            }
        }
        return Ok(dedup(variants.clone()));
    }

    let steps = normalize_trace(raw);
    let mut variants: Vec<Variant> = vec![Vec::new()];
    for step in &steps {
        let mut next = Vec::new();
        for prefix in &variants {
            for alt in &step.alternatives {
                if next.len() >= MAX_VARIANTS {
                    break;
                }
                let mut v = prefix.clone();
                v.extend(alt.iter().cloned());
                next.push(v);
            }
        }
        variants = next;
    }
    let variants = dedup(variants.into_iter().filter(|v| !v.is_empty()).collect());
    if variants.is_empty() {
        return Err(NormError::EmptyNormalization { raw: raw.to_string() });
    }
    Ok(variants)
}

fn dedup(variants: Vec<Variant>) -> Vec<Variant> {
    let mut out: Vec<Variant> = Vec::with_capacity(variants.len());
    for v in variants {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(words: &str) -> Variant {
        words.split_whitespace().map(str::to_string).collect()
    }

    fn norm(raw: &str) -> Vec<Variant> {
        normalize_keyword(raw, None).unwrap()
    }

    #[test]
    fn initialism_with_acronym_fallback() {
        assert_eq!(norm("IBM"), vec![v("i b m"), v("ibm")]);
        assert_eq!(norm("NASA"), vec![v("n a s a"), v("nasa")]);
    }

    #[test]
    fn vowel_only_initialism_has_no_word_reading() {
        assert_eq!(norm("AI"), vec![v("a i")]);
    }

    #[test]
    fn plain_word_is_identity() {
        assert_eq!(norm("hello"), vec![v("hello")]);
    }

    #[test]
    fn alphanumeric_compound() {
        assert_eq!(norm("C3PO"), vec![v("c three p o")]);
        let rules: Vec<Rule> = normalize_trace("C3PO").iter().map(|s| s.rule).collect();
        assert_eq!(rules, vec![Rule::Lowercase, Rule::DigitsInCompound, Rule::Initialism]);
    }

    #[test]
    fn standalone_number_reads_both_ways() {
        assert_eq!(norm("356"), vec![v("three hundred fifty six"), v("three five six")]);
        assert_eq!(norm("123456"), vec![v("one two three four five six")]);
    }

    #[test]
    fn symbols() {
        assert_eq!(norm("R&D"), vec![v("r and d")]);
        assert_eq!(norm("C++"), vec![v("c plus plus")]);
        assert_eq!(norm("4x4"), vec![v("four by four")]);
        assert_eq!(norm("A-1"), vec![v("a one")]);
        assert_eq!(norm("A1"), vec![v("a one")]);
        assert_eq!(norm("X*"), vec![v("x star")]);
    }

    #[test]
    fn camel_case_and_compounds() {
        assert_eq!(norm("CamelCase"), vec![v("camel case")]);
        assert_eq!(norm("X-mAbs"), vec![v("x m abs")]);
        assert_eq!(norm("XMLHttp"), vec![v("x m l http")]);
        assert_eq!(norm("ice cream"), vec![v("ice cream")]);
        assert_eq!(norm("iPhone"), vec![v("i phone")]);
    }

    #[test]
    fn symbols_only_is_rejected() {
        assert_eq!(
            normalize_keyword("--!", None),
            Err(NormError::EmptyNormalization { raw: "--!".into() })
        );
        assert_eq!(normalize_keyword("   ", None), Err(NormError::EmptyRaw));
    }

    #[test]
    fn exceptions_override_rules() {
        let mut ex = Exceptions::new();
        ex.insert("C3PO".into(), vec![v("see three pee oh")]);
        assert_eq!(normalize_keyword("C3PO", Some(&ex)).unwrap(), vec![v("see three pee oh")]);

        ex.insert("Bad".into(), vec![v("Bad")]);
        assert!(matches!(
            normalize_keyword("Bad", Some(&ex)),
            Err(NormError::InvalidWord { .. })
        ));
    }

    #[test]
    fn non_ascii_letters_pass_through() {
        assert_eq!(norm("Café"), vec![v("café")]);
        assert_eq!(norm("naïve™"), vec![v("naïve")]);
    }

    proptest! {
        #[test]
        fn ascii_output_stays_in_alphabet(raw in "[ -~]{1,16}") {
            if let Ok(variants) = normalize_keyword(&raw, None) {
                prop_assert!(!variants.is_empty());
                prop_assert!(variants.len() <= MAX_VARIANTS);
                for variant in &variants {
                    prop_assert!(!variant.is_empty());
                    for w in variant {
                        prop_assert!(!w.is_empty() && w.bytes().all(|b| b.is_ascii_lowercase()), "{w:?}");
                    }
                }
                for (i, a) in variants.iter().enumerate() {
                    prop_assert!(!variants[i + 1..].contains(a));
                }
            }
        }
    }
}
