use std::path::Path;

use super::DecodeError;

/// How token sequences are cut into words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Boundary {
    /// A dedicated separator token (index into the vocabulary).
    Delimiter(usize),
    /// Tokens starting with this marker begin a new word (word-piece style).
    Prefix(String),
}

/// Token inventory of the acoustic model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    blank: usize,
    boundary: Boundary,
}

/// What a single token does to the word being built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TokenRole<'a> {
    Blank,
    /// Ends the current word.
    Separator,
    /// Ends the current word and starts a new one with this text.
    StartWord(&'a str),
    /// Appends text to the current word.
    Continue(&'a str),
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>, blank: usize, boundary: Boundary) -> Result<Self, DecodeError> {
        if blank >= tokens.len() {
            return Err(DecodeError::Vocabulary(format!(
                "blank index {blank} out of range for {} tokens",
                tokens.len()
            )));
        }
        match &boundary {
            Boundary::Delimiter(d) => {
                if *d >= tokens.len() || *d == blank {
                    return Err(DecodeError::Vocabulary(format!("bad delimiter index {d}")));
                }
            }
            Boundary::Prefix(marker) => {
                if marker.is_empty() {
                    return Err(DecodeError::Vocabulary("empty word marker".into()));
                }
            }
        }
        Ok(Self {
            tokens,
            blank,
            boundary,
        })
    }

    /// Delimiter-style vocabulary from token strings; `delimiter` names the
    /// separator token.
    pub fn with_delimiter(tokens: Vec<String>, blank: usize, delimiter: &str) -> Result<Self, DecodeError> {
        let d = tokens
            .iter()
            .position(|t| t == delimiter)
            .ok_or_else(|| DecodeError::Vocabulary(format!("delimiter {delimiter:?} is not a token")))?;
        Self::new(tokens, blank, Boundary::Delimiter(d))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn blank(&self) -> usize {
        self.blank
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == token)
    }

    pub(crate) fn role(&self, id: usize) -> TokenRole<'_> {
        if id == self.blank {
            return TokenRole::Blank;
        }
        let text = self.tokens[id].as_str();
        match &self.boundary {
            Boundary::Delimiter(d) if *d == id => TokenRole::Separator,
            Boundary::Delimiter(_) => TokenRole::Continue(text),
            Boundary::Prefix(marker) => match text.strip_prefix(marker.as_str()) {
                Some(rest) => TokenRole::StartWord(rest),
                None => TokenRole::Continue(text),
            },
        }
    }

    /// Words spelled by a collapsed token sequence.
    pub fn detokenize(&self, ids: &[usize]) -> Vec<String> {
        let mut words = Vec::new();
        let mut current = String::new();
        for &id in ids {
            match self.role(id) {
                TokenRole::Blank => {}
                TokenRole::Separator => {
                    if !current.is_empty() {
                        words.push(std::mem::take(&mut current));
                    }
                }
                TokenRole::StartWord(text) => {
                    if !current.is_empty() {
                        words.push(std::mem::take(&mut current));
                    }
                    current.push_str(text);
                }
                TokenRole::Continue(text) => current.push_str(text),
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
        words
    }

    /// Greedy longest-match spelling of `words`. Returns `None` when a word
    /// cannot be spelled with the available tokens.
    pub fn tokenize<S: AsRef<str>>(&self, words: &[S]) -> Option<Vec<usize>> {
        let mut out = Vec::new();
        for (i, word) in words.iter().enumerate() {
            let word = word.as_ref();
            if word.is_empty() {
                continue;
            }
            match &self.boundary {
                Boundary::Delimiter(d) => {
                    if i > 0 {
                        out.push(*d);
                    }
                    self.spell(word, &mut out, |role| matches!(role, TokenRole::Continue(_)))?;
                }
                Boundary::Prefix(_) => {
                    let (first, len) = self.longest(word, |role| matches!(role, TokenRole::StartWord(_)))?;
                    out.push(first);
                    self.spell(&word[len..], &mut out, |role| matches!(role, TokenRole::Continue(_)))?;
                }
            }
        }
        Some(out)
    }

    fn longest(&self, text: &str, allowed: impl Fn(TokenRole<'_>) -> bool) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize)> = None;
        for id in 0..self.tokens.len() {
            let role = self.role(id);
            if !allowed(role) {
                continue;
            }
            let piece = match role {
                TokenRole::StartWord(t) | TokenRole::Continue(t) => t,
                _ => continue,
            };
            // a bare marker can start a word but never continue one
            if (piece.is_empty() && !matches!(role, TokenRole::StartWord(_))) || !text.starts_with(piece) {
                continue;
            }
            if best.is_none_or(|(_, len)| piece.len() > len) {
                best = Some((id, piece.len()));
            }
        }
        best
    }

    fn spell(&self, mut text: &str, out: &mut Vec<usize>, allowed: impl Fn(TokenRole<'_>) -> bool + Copy) -> Option<()> {
        while !text.is_empty() {
            let (id, len) = self.longest(text, allowed)?;
            out.push(id);
            text = &text[len..];
        }
        Some(())
    }

    /// Parses the vocabulary file format: `#blank=<index>` and
    /// `#boundary=delimiter:<token>` or `#boundary=prefix:<marker>` header
    /// lines, then one token per line.
    pub fn parse(text: &str) -> Result<Self, DecodeError> {
        let mut blank: Option<usize> = None;
        let mut boundary: Option<(String, String)> = None;
        let mut tokens = Vec::new();
        let mut in_header = true;
        for line in text.lines() {
            if in_header {
                if let Some(v) = line.strip_prefix("#blank=") {
                    blank = Some(
                        v.trim()
                            .parse()
                            .map_err(|_| DecodeError::Vocabulary(format!("bad blank index {v:?}")))?,
                    );
                    continue;
                }
                if let Some(v) = line.strip_prefix("#boundary=") {
                    let (kind, arg) = v
                        .split_once(':')
                        .ok_or_else(|| DecodeError::Vocabulary(format!("bad boundary directive {v:?}")))?;
                    boundary = Some((kind.to_string(), arg.to_string()));
                    continue;
                }
                in_header = false;
            }
            tokens.push(line.to_string());
        }
        let blank = blank.ok_or_else(|| DecodeError::Vocabulary("missing #blank= directive".into()))?;
        match boundary {
            Some((kind, arg)) if kind == "delimiter" => Self::with_delimiter(tokens, blank, &arg),
            Some((kind, arg)) if kind == "prefix" => Self::new(tokens, blank, Boundary::Prefix(arg)),
            Some((kind, _)) => Err(DecodeError::Vocabulary(format!("unknown boundary kind {kind:?}"))),
            None => Err(DecodeError::Vocabulary("missing #boundary= directive".into())),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DecodeError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = format!("#blank={}\n", self.blank);
        match &self.boundary {
            Boundary::Delimiter(d) => out.push_str(&format!("#boundary=delimiter:{}\n", self.tokens[*d])),
            Boundary::Prefix(m) => out.push_str(&format!("#boundary=prefix:{m}\n")),
        }
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    /// Character vocabulary used by the bundled fixtures: blank, `|`, `a`-`z`.
    pub fn lowercase_chars() -> Self {
        let mut tokens = vec!["<blank>".to_string(), "|".to_string()];
        tokens.extend(('a'..='z').map(|c| c.to_string()));
        Self::new(tokens, 0, Boundary::Delimiter(1)).expect("static vocabulary")
    }
}
