//! Tweet preprocessing and unigram+bigram sparse features.
//!
//! Preprocessing is deliberately light and largely leaves the tweets
//! intact: lowercasing, whitespace collapsing, and punctuation
//! regularization. The feature inventory is unigrams plus adjacent
//! bigrams, binary presence values by default.
//!
//! Cleaning rules, in the order they apply to each whitespace-separated
//! chunk:
//!
//! - the `@USER` and `URL` placeholders are kept verbatim as single tokens
//!   (never lowercased, never split);
//! - runs of `!` and `?` collapse to their first mark as a standalone
//!   token; two or more dots (or the `…` character) become one `...`
//!   token, a single dot stays `.`;
//! - detachable punctuation (commas, quotes, brackets, dashes, ...)
//!   becomes standalone single-character tokens;
//! - everything else is word material, lowercased but otherwise unchanged.
//!   Asterisks, apostrophes, `#`, `@`, and `_` count as word-internal, so
//!   masked profanity like `f**ck` and hashtags survive as single tokens.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

pub const PLACEHOLDERS: [&str; 2] = ["@USER", "URL"];

/// Separator between the parts of a stored bigram. A space can never occur
/// inside a token, so joined n-grams are unambiguous.
pub const NGRAM_SEP: &str = " ";

fn is_terminal(c: char) -> bool {
    matches!(c, '!' | '?' | '.' | '…')
}

fn is_detachable(c: char) -> bool {
    if is_terminal(c) {
        return false;
    }
    (c.is_ascii_punctuation() && !matches!(c, '*' | '\'' | '#' | '@' | '_'))
        || matches!(
            c,
            '‘' | '“' | '”' | '„' | '«' | '»' | '–' | '—' | '‚' | '¡' | '¿'
        )
}

fn is_word_char(c: char) -> bool {
    !c.is_whitespace() && !is_terminal(c) && !is_detachable(c)
}

/// Placeholder starting at `chars[i]` with a non-word boundary after it.
fn placeholder_at(chars: &[char], i: usize) -> Option<&'static str> {
    for ph in PLACEHOLDERS {
        let len = ph.chars().count();
        if i + len <= chars.len()
            && ph.chars().eq(chars[i..i + len].iter().copied())
            && chars.get(i + len).is_none_or(|&c| !is_word_char(c))
        {
            return Some(ph);
        }
    }
    None
}

/// `clean` with lowercasing switchable. Placeholders are verbatim either way.
pub fn clean_with(text: &str, lowercase: bool) -> String {
    let mut out = String::with_capacity(text.len());
    for chunk in text.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            if !out.is_empty() {
                out.push(' ');
            }
            if let Some(ph) = placeholder_at(&chars, i) {
                out.push_str(ph);
                i += ph.chars().count();
            } else if chars[i] == '.' || chars[i] == '…' {
                let mut dots = 0usize;
                while i < chars.len() && (chars[i] == '.' || chars[i] == '…') {
                    dots += if chars[i] == '…' { 2 } else { 1 };
                    i += 1;
                }
                out.push_str(if dots >= 2 { "..." } else { "." });
            } else if chars[i] == '!' || chars[i] == '?' {
                let mark = chars[i];
                while i < chars.len() && (chars[i] == '!' || chars[i] == '?') {
                    i += 1;
                }
                out.push(mark);
            } else if is_detachable(chars[i]) {
                out.push(chars[i]);
                i += 1;
            } else {
                let start = i;
                while i < chars.len() && is_word_char(chars[i]) {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                if lowercase {
                    out.push_str(&word.to_lowercase());
                } else {
                    out.push_str(&word);
                }
            }
        }
    }
    out
}

/// Basic cleaning and punctuation regularization; total and idempotent.
pub fn clean(text: &str) -> String {
    clean_with(text, true)
}

/// One token: non-empty, no whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token(String);

impl Token {
    /// Panics when the invariant (non-empty, whitespace-free) is violated;
    /// `tokenize` output always satisfies it.
    pub fn new(surface: impl Into<String>) -> Self {
        let surface = surface.into();
        assert!(
            !surface.is_empty() && !surface.chars().any(char::is_whitespace),
            "token must be non-empty and whitespace-free: {surface:?}"
        );
        Token(surface)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Whitespace split of (cleaned) text, order preserved.
pub fn tokenize(text: &str) -> Vec<Token> {
    text.split_whitespace().map(Token::new).collect()
}

/// All unigrams followed by all adjacent bigrams. Duplicates are retained
/// here; vectorization deduplicates.
pub fn extract_ngrams(tokens: &[Token]) -> Vec<String> {
    let mut grams = Vec::with_capacity(tokens.len().saturating_mul(2));
    for t in tokens {
        grams.push(t.as_str().to_string());
    }
    for pair in tokens.windows(2) {
        grams.push(format!("{}{}{}", pair[0], NGRAM_SEP, pair[1]));
    }
    grams
}

/// One vocabulary entry: the n-gram and the number of distinct training
/// documents it occurred in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabTerm {
    pub ngram: String,
    pub df: u32,
}

/// n-gram → dense feature index mapping. Indices are 0..size-1 assigned in
/// lexicographic n-gram order, so fitting is deterministic and independent
/// of document order.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<VocabTerm>,
    index: HashMap<String, usize>,
    min_df: u32,
}

impl Vocabulary {
    pub fn size(&self) -> usize {
        self.terms.len()
    }

    pub fn min_df(&self) -> u32 {
        self.min_df
    }

    pub fn index_of(&self, ngram: &str) -> Option<usize> {
        self.index.get(ngram).copied()
    }

    pub fn terms(&self) -> &[VocabTerm] {
        &self.terms
    }

    fn from_terms(terms: Vec<VocabTerm>, min_df: u32) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.ngram.clone(), i))
            .collect();
        Vocabulary {
            terms,
            index,
            min_df,
        }
    }

    /// `ngram \t index \t df` rows in index order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, t) in self.terms.iter().enumerate() {
            out.push_str(&format!("{}\t{}\t{}\n", t.ngram, i, t.df));
        }
        out
    }

    /// Parses `to_tsv` output; indices must be the line positions.
    pub fn from_tsv_lines<'a>(
        lines: impl Iterator<Item = &'a str>,
        min_df: u32,
    ) -> Result<Self, String> {
        let mut terms = Vec::new();
        for (pos, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(format!("vocabulary line {}: expected 3 fields", pos + 1));
            }
            let idx: usize = fields[1]
                .parse()
                .map_err(|_| format!("bad index {:?}", fields[1]))?;
            if idx != pos {
                return Err(format!(
                    "vocabulary line {}: index {} out of order",
                    pos + 1,
                    idx
                ));
            }
            let df: u32 = fields[2]
                .parse()
                .map_err(|_| format!("bad df {:?}", fields[2]))?;
            terms.push(VocabTerm {
                ngram: fields[0].to_string(),
                df,
            });
        }
        Ok(Vocabulary::from_terms(terms, min_df))
    }
}

/// Keeps exactly the n-grams occurring in at least `min_df` distinct
/// documents. An empty vocabulary is allowed.
pub fn fit_vocabulary(documents: &[Vec<Token>], min_df: u32) -> Vocabulary {
    assert!(min_df >= 1, "min_df must be at least 1");
    let mut df: HashMap<String, u32> = HashMap::new();
    for doc in documents {
        let unique: HashSet<String> = extract_ngrams(doc).into_iter().collect();
        for gram in unique {
            *df.entry(gram).or_insert(0) += 1;
        }
    }
    let mut terms: Vec<VocabTerm> = df
        .into_iter()
        .filter(|&(_, d)| d >= min_df)
        .map(|(ngram, df)| VocabTerm { ngram, df })
        .collect();
    terms.sort_by(|a, b| a.ngram.cmp(&b.ngram));
    Vocabulary::from_terms(terms, min_df)
}

/// Feature value scheme: binary presence (default) or occurrence counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureScheme {
    #[default]
    Presence,
    Counts,
}

impl fmt::Display for FeatureScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureScheme::Presence => write!(f, "presence"),
            FeatureScheme::Counts => write!(f, "counts"),
        }
    }
}

impl std::str::FromStr for FeatureScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "presence" => Ok(FeatureScheme::Presence),
            "counts" => Ok(FeatureScheme::Counts),
            other => Err(format!("unknown feature scheme {other:?}")),
        }
    }
}

/// Sparse document vector: (index, value) pairs with strictly increasing
/// indices, all below `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
    dim: usize,
}

impl SparseVector {
    pub fn new(entries: Vec<(usize, f64)>, dim: usize) -> Self {
        for w in entries.windows(2) {
            assert!(w[0].0 < w[1].0, "indices must be strictly increasing");
        }
        for &(i, v) in &entries {
            assert!(i < dim, "index {i} out of dimension {dim}");
            assert!(v.is_finite(), "value at {i} must be finite");
        }
        SparseVector { entries, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        debug_assert_eq!(dense.len(), self.dim);
        self.entries.iter().map(|&(i, v)| v * dense[i]).sum()
    }
}

/// Encodes a document against a fitted vocabulary. Out-of-vocabulary
/// n-grams are ignored; under `Presence` every stored value is 1.0.
pub fn vectorize(tokens: &[Token], vocab: &Vocabulary, scheme: FeatureScheme) -> SparseVector {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for gram in extract_ngrams(tokens) {
        if let Some(idx) = vocab.index_of(&gram) {
            match scheme {
                FeatureScheme::Presence => {
                    acc.insert(idx, 1.0);
                }
                FeatureScheme::Counts => {
                    *acc.entry(idx).or_insert(0.0) += 1.0;
                }
            }
        }
    }
    SparseVector::new(acc.into_iter().collect(), vocab.size())
}

/// Featurization recipe a trained model carries so prediction repeats it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    pub scheme: FeatureScheme,
    pub lowercase: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            scheme: FeatureScheme::Presence,
            lowercase: true,
        }
    }
}

/// clean → tokenize → vectorize in one step.
pub fn featurize(text: &str, vocab: &Vocabulary, cfg: &FeatureConfig) -> SparseVector {
    let tokens = tokenize(&clean_with(text, cfg.lowercase));
    vectorize(&tokens, vocab, cfg.scheme)
}
