use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use super::{is_normalized_word, normalize_keyword, Exceptions, NormError, Variant};

/// Index of an entry inside a [`NormalizationMapping`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntryId(pub usize);

/// Input row for [`NormalizationMapping::build`].
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordSpec {
    pub raw: String,
    pub weight: Option<f64>,
    pub priority: i32,
}

impl KeywordSpec {
    pub fn new(raw: impl Into<String>) -> Self {
        Self {
            raw: raw.into(),
            weight: None,
            priority: 0,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = Some(weight);
        self
    }

    pub fn with_priority(mut self, priority: i32) -> Self {
        self.priority = priority;
        self
    }
}

/// A written-form keyword with its spoken-form variants.
#[derive(Debug, Clone, PartialEq)]
pub struct KeywordEntry {
    pub raw: String,
    pub variants: Vec<Variant>,
    /// Per-target boost weight; falls back to the global weight when absent.
    pub weight: Option<f64>,
    /// Lower wins when two entries share a variant.
    pub priority: i32,
}

/// A variant claimed by more than one entry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Collision {
    pub variant: Variant,
    pub winner: String,
    pub loser: String,
}

/// Bidirectional raw <-> normalized mapping. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationMapping {
    entries: Vec<KeywordEntry>,
    reverse: HashMap<Variant, EntryId>,
    max_variant_len: usize,
    collisions: Vec<Collision>,
}

impl Default for NormalizationMapping {
    fn default() -> Self {
        Self::from_entries(Vec::new())
    }
}

impl NormalizationMapping {
    /// Normalizes every keyword and indexes the variants.
    pub fn build(specs: &[KeywordSpec], exceptions: Option<&Exceptions>) -> Result<Self, NormError> {
        let mut seen = std::collections::HashSet::new();
        let mut entries = Vec::with_capacity(specs.len());
        for spec in specs {
            let raw = spec.raw.trim();
            if !seen.insert(raw.to_string()) {
                return Err(NormError::DuplicateRaw { raw: raw.to_string() });
            }
            let variants = normalize_keyword(raw, exceptions)?;
            entries.push(KeywordEntry {
                raw: raw.to_string(),
                variants,
                weight: spec.weight,
                priority: spec.priority,
            });
        }
        let mapping = Self::from_entries(entries);
        for c in &mapping.collisions {
            log::warn!(
                "variant {:?} claimed by {:?} and {:?}; keeping {:?}",
                c.variant.join(" "),
                c.winner,
                c.loser,
                c.winner
            );
        }
        Ok(mapping)
    }

    /// Uses each raw keyword as-is, split on whitespace, with no normalization.
    ///
    /// This is the un-normalized target list: words keep digits, symbols and
    /// case, so they can only match a decoder whose alphabet contains them.
    pub fn verbatim(specs: &[KeywordSpec]) -> Result<Self, NormError> {
        let mut seen = std::collections::HashSet::new();
        let mut entries = Vec::with_capacity(specs.len());
        for spec in specs {
            let raw = spec.raw.trim();
            if raw.is_empty() {
                return Err(NormError::EmptyRaw);
            }
            if !seen.insert(raw.to_string()) {
                return Err(NormError::DuplicateRaw { raw: raw.to_string() });
            }
            entries.push(KeywordEntry {
                raw: raw.to_string(),
                variants: vec![raw.split_whitespace().map(str::to_string).collect()],
                weight: spec.weight,
                priority: spec.priority,
            });
        }
        Ok(Self::from_entries(entries))
    }

    /// Indexes prepared entries. Entries are ordered by raw form, so the
    /// result does not depend on input order.
    pub fn from_entries(mut entries: Vec<KeywordEntry>) -> Self {
        entries.sort_by(|a, b| a.raw.cmp(&b.raw));
        let mut claims: BTreeMap<&Variant, Vec<usize>> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            for v in &e.variants {
                claims.entry(v).or_default().push(i);
            }
        }
        let mut reverse = HashMap::with_capacity(claims.len());
        let mut collisions = Vec::new();
        let mut max_variant_len = 0;
        for (variant, owners) in claims {
            let winner = *owners
                .iter()
                .min_by(|&&a, &&b| {
                    let (ea, eb) = (&entries[a], &entries[b]);
                    ea.priority
                        .cmp(&eb.priority)
                        .then_with(|| eb.raw.chars().count().cmp(&ea.raw.chars().count()))
                        .then_with(|| ea.raw.cmp(&eb.raw))
                })
                .expect("at least one owner");
            for &o in owners.iter().filter(|&&o| o != winner) {
                collisions.push(Collision {
                    variant: variant.clone(),
                    winner: entries[winner].raw.clone(),
                    loser: entries[o].raw.clone(),
                });
            }
            max_variant_len = max_variant_len.max(variant.len());
            reverse.insert(variant.clone(), EntryId(winner));
        }
        collisions.sort();
        Self {
            entries,
            reverse,
            max_variant_len,
            collisions,
        }
    }

    pub fn entries(&self) -> &[KeywordEntry] {
        &self.entries
    }

    pub fn entry(&self, id: EntryId) -> &KeywordEntry {
        &self.entries[id.0]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn find_raw(&self, raw: &str) -> Option<EntryId> {
        self.entries
            .binary_search_by(|e| e.raw.as_str().cmp(raw))
            .ok()
            .map(EntryId)
    }

    /// Entry owning `variant` after collision resolution.
    pub fn lookup(&self, variant: &[String]) -> Option<EntryId> {
        self.reverse.get(variant).copied()
    }

    /// Every distinct variant with its owning entry, in sorted order.
    pub fn variants(&self) -> Vec<(&Variant, EntryId)> {
        let mut out: Vec<_> = self.reverse.iter().map(|(v, &id)| (v, id)).collect();
        out.sort();
        out
    }

    pub fn max_variant_len(&self) -> usize {
        self.max_variant_len
    }

    pub fn collisions(&self) -> &[Collision] {
        &self.collisions
    }

    /// Copy of the mapping with one entry's weight replaced.
    pub fn with_entry_weight(&self, id: EntryId, weight: Option<f64>) -> Self {
        let mut out = self.clone();
        out.entries[id.0].weight = weight;
        out
    }

    /// Serializes as TSV: `raw<TAB>variant<TAB>weight<TAB>priority`, one line
    /// per variant. An absent weight is an empty field.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let weight = e.weight.map(|w| w.to_string()).unwrap_or_default();
            for v in &e.variants {
                let _ = writeln!(out, "{}\t{}\t{}\t{}", e.raw, v.join(" "), weight, e.priority);
            }
        }
        out
    }

    /// Parses the format written by [`to_tsv`](Self::to_tsv).
    pub fn from_tsv(text: &str) -> Result<Self, NormError> {
        let mut order: Vec<String> = Vec::new();
        let mut by_raw: HashMap<String, KeywordEntry> = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 {
                return Err(format_error(line_no, "expected raw<TAB>variant"));
            }
            let raw = fields[0].trim();
            if raw.is_empty() {
                return Err(format_error(line_no, "empty raw form"));
            }
            let variant: Variant = fields[1].split_whitespace().map(str::to_string).collect();
            if variant.is_empty() {
                return Err(format_error(line_no, "empty variant"));
            }
            if let Some(w) = variant.iter().find(|w| !is_normalized_word(w)) {
                return Err(NormError::InvalidWord {
                    raw: raw.to_string(),
                    word: w.clone(),
                });
            }
            let weight = parse_weight(fields.get(2).copied(), line_no)?;
            let priority = parse_priority(fields.get(3).copied(), line_no)?;
            match by_raw.get_mut(raw) {
                Some(entry) => {
                    if entry.weight != weight || entry.priority != priority {
                        return Err(format_error(line_no, "weight/priority differ from earlier lines for the same raw form"));
                    }
                    if !entry.variants.contains(&variant) {
                        entry.variants.push(variant);
                    }
                }
                None => {
                    order.push(raw.to_string());
                    by_raw.insert(
                        raw.to_string(),
                        KeywordEntry {
                            raw: raw.to_string(),
                            variants: vec![variant],
                            weight,
                            priority,
                        },
                    );
                }
            }
        }
        let entries = order
            .into_iter()
            .map(|raw| by_raw.remove(&raw).expect("inserted above"))
            .collect();
        Ok(Self::from_entries(entries))
    }
}

fn format_error(line: usize, message: &str) -> NormError {
    NormError::Format {
        line,
        message: message.to_string(),
    }
}

fn parse_weight(field: Option<&str>, line: usize) -> Result<Option<f64>, NormError> {
    match field.map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) => match s.parse::<f64>() {
            Ok(w) if w.is_finite() && w >= 0.0 => Ok(Some(w)),
            _ => Err(format_error(line, &format!("bad weight {s:?}"))),
        },
    }
}

fn parse_priority(field: Option<&str>, line: usize) -> Result<i32, NormError> {
    match field.map(str::trim) {
        None | Some("") => Ok(0),
        Some(s) => s
            .parse::<i32>()
            .map_err(|_| format_error(line, &format!("bad priority {s:?}"))),
    }
}

/// Parses a keyword list: `raw<TAB>weight?<TAB>priority?` per line, `#`
/// comments and blank lines skipped.
pub fn parse_keyword_list(text: &str) -> Result<Vec<KeywordSpec>, NormError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let raw = fields[0].trim();
        if raw.is_empty() {
            return Err(format_error(line_no, "empty keyword"));
        }
        out.push(KeywordSpec {
            raw: raw.to_string(),
            weight: parse_weight(fields.get(1).copied(), line_no)?,
            priority: parse_priority(fields.get(2).copied(), line_no)?,
        });
    }
    Ok(out)
}

/// Parses an exceptions file (mapping TSV shape; only the first two columns
/// are read).
pub fn parse_exceptions(text: &str) -> Result<Exceptions, NormError> {
    let mut out = Exceptions::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 {
            return Err(format_error(line_no, "expected raw<TAB>variant"));
        }
        let variant: Variant = fields[1].split_whitespace().map(str::to_string).collect();
        let variants = out.entry(fields[0].trim().to_string()).or_default();
        if !variants.contains(&variant) {
            variants.push(variant);
        }
    }
    Ok(out)
}

/// One span rewritten by [`inverse_normalize`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replacement {
    /// First word index in the input (inclusive).
    pub start: usize,
    /// End word index in the input (exclusive).
    pub end: usize,
    pub entry: EntryId,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItnOutput {
    pub words: Vec<String>,
    pub replacements: Vec<Replacement>,
}

impl ItnOutput {
    pub fn text(&self) -> String {
        self.words.join(" ")
    }
}

/// Rewrites known variants back to their written form, leftmost-longest and
/// non-overlapping. Other words pass through unchanged.
pub fn inverse_normalize(words: &[String], mapping: &NormalizationMapping) -> ItnOutput {
    let mut out = Vec::with_capacity(words.len());
    let mut replacements = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let longest = mapping.max_variant_len.min(words.len() - i);
        let hit = (1..=longest)
            .rev()
            .find_map(|len| mapping.lookup(&words[i..i + len]).map(|id| (len, id)));
        match hit {
            Some((len, id)) => {
                let raw = mapping.entry(id).raw.clone();
                out.push(raw.clone());
                replacements.push(Replacement {
                    start: i,
                    end: i + len,
                    entry: id,
                    raw,
                });
                i += len;
            }
            None => {
                out.push(words[i].clone());
                i += 1;
            }
        }
    }
    ItnOutput {
        words: out,
        replacements,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(words: &str) -> Variant {
        words.split_whitespace().map(str::to_string).collect()
    }

    fn mapping(raws: &[&str]) -> NormalizationMapping {
        let specs: Vec<_> = raws.iter().map(|r| KeywordSpec::new(*r)).collect();
        NormalizationMapping::build(&specs, None).unwrap()
    }

    #[test]
    fn build_composes_normalizations() {
        let m = mapping(&["AI", "IBM"]);
        let ai = m.find_raw("AI").unwrap();
        let ibm = m.find_raw("IBM").unwrap();
        assert_eq!(m.lookup(&v("a i")), Some(ai));
        assert_eq!(m.lookup(&v("i b m")), Some(ibm));
        assert_eq!(m.lookup(&v("ibm")), Some(ibm));
        assert_eq!(m.variants().len(), 3);
        assert!(m.collisions().is_empty());
    }

    #[test]
    fn empty_mapping() {
        let m = NormalizationMapping::build(&[], None).unwrap();
        assert!(m.is_empty());
        assert!(m.variants().is_empty());
    }

    #[test]
    fn longer_raw_wins_collision() {
        let m = mapping(&["A1", "A-1"]);
        assert_eq!(m.entry(m.lookup(&v("a one")).unwrap()).raw, "A-1");
        assert_eq!(m.collisions().len(), 1);
        assert_eq!(m.collisions()[0].loser, "A1");
    }

    #[test]
    fn priority_beats_length() {
        let specs = [KeywordSpec::new("A1").with_priority(-1), KeywordSpec::new("A-1")];
        let m = NormalizationMapping::build(&specs, None).unwrap();
        assert_eq!(m.entry(m.lookup(&v("a one")).unwrap()).raw, "A1");
    }

    #[test]
    fn duplicate_raw_rejected() {
        let specs = [KeywordSpec::new("AI"), KeywordSpec::new("AI ")];
        assert_eq!(
            NormalizationMapping::build(&specs, None),
            Err(NormError::DuplicateRaw { raw: "AI".into() })
        );
    }

    #[test]
    fn itn_examples() {
        let m = mapping(&["AI"]);
        assert_eq!(inverse_normalize(&v("about a i analytics"), &m).text(), "about AI analytics");

        let empty = NormalizationMapping::default();
        assert_eq!(inverse_normalize(&v("no keywords here"), &empty).text(), "no keywords here");

        let m = mapping(&["C3PO"]);
        let out = inverse_normalize(&v("c three p o today"), &m);
        assert_eq!(out.text(), "C3PO today");
        assert_eq!(out.replacements.len(), 1);
        assert_eq!((out.replacements[0].start, out.replacements[0].end), (0, 4));
    }

    #[test]
    fn itn_prefers_longest() {
        let m = mapping(&["AI", "AIG"]);
        assert_eq!(inverse_normalize(&v("a i g a i"), &m).text(), "AIG AI");
    }

    #[test]
    fn keyword_list_parsing() {
        let specs = parse_keyword_list("# comment\nAI\t2.5\nC3PO\t\t-1\n\nIBM\n").unwrap();
        assert_eq!(
            specs,
            vec![
                KeywordSpec::new("AI").with_weight(2.5),
                KeywordSpec::new("C3PO").with_priority(-1),
                KeywordSpec::new("IBM"),
            ]
        );
        assert!(matches!(
            parse_keyword_list("AI\tabc"),
            Err(NormError::Format { line: 1, .. })
        ));
    }

    #[test]
    fn tsv_save_load_is_byte_stable() {
        let specs = [
            KeywordSpec::new("IBM").with_weight(1.25),
            KeywordSpec::new("356").with_priority(3),
            KeywordSpec::new("C3PO"),
        ];
        let m = NormalizationMapping::build(&specs, None).unwrap();
        let text = m.to_tsv();
        let loaded = NormalizationMapping::from_tsv(&text).unwrap();
        assert_eq!(loaded, m);
        assert_eq!(loaded.to_tsv(), text);
        assert!(text.starts_with("356\tthree hundred fifty six\t\t3\n"));
    }

    fn arb_specs() -> impl Strategy<Value = Vec<KeywordSpec>> {
        let raw = prop_oneof!["[A-Z]{1,4}", "[a-z]{2,6}", "[A-Z][0-9]{1,2}[A-Z]{0,2}", "[0-9]{1,4}"];
        proptest::collection::vec((raw, 0i32..3), 0..8).prop_map(|rows| {
            let mut seen = std::collections::HashSet::new();
            rows.into_iter()
                .filter(|(r, _)| seen.insert(r.clone()))
                .map(|(r, p)| KeywordSpec::new(r).with_priority(p))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn round_trip_for_owned_variants(specs in arb_specs()) {
            let m = NormalizationMapping::build(&specs, None).unwrap();
            for (variant, id) in m.variants() {
                let out = inverse_normalize(variant, &m);
                prop_assert_eq!(out.text(), m.entry(id).raw.clone());
            }
        }

        #[test]
        fn itn_ignores_insertion_order(specs in arb_specs(), words in proptest::collection::vec("[a-z]{1,2}|one|two|three", 0..12)) {
            let forward = NormalizationMapping::build(&specs, None).unwrap();
            let mut rev = specs.clone();
            rev.reverse();
            let backward = NormalizationMapping::build(&rev, None).unwrap();
            prop_assert_eq!(inverse_normalize(&words, &forward), inverse_normalize(&words, &backward));
        }

        #[test]
        fn pass_through_without_matches(words in proptest::collection::vec("[a-z]{3,6}", 0..10)) {
            let m = mapping(&["AI", "C3PO"]);
            let out = inverse_normalize(&words, &m);
            prop_assert_eq!(out.text(), words.join(" "));
            prop_assert!(out.replacements.is_empty());
        }
    }
}
