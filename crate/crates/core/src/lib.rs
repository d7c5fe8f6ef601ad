//! Contextual biasing for CTC beam search decoding.
//!
//! Keywords are normalized to spoken-form n-grams ([`norm`]), indexed in a
//! word trie ([`bias_trie`]), and boosted while decoding ([`decoder`]). Matched
//! spans are written back in their original form, and [`scoring`] splits the
//! word error rate into biased and unbiased parts.

pub mod norm;
pub mod lm;
pub mod bias_trie;
pub mod decoder;
pub mod scoring;
pub mod harness;
