//! Text analysis pipeline: lowercase, split on non-alphanumeric characters,
//! drop stopwords, stem.
//!
//! The stopword list is the fixed English list vendored verbatim in
//! `stopwords_en.txt`; entries containing apostrophes can never match a
//! token (tokens are punctuation-split) and are kept only so the shipped
//! list stays unmodified.

use rust_stemmers::{Algorithm, Stemmer};
use std::collections::HashSet;

const STOPWORDS_EN: &str = include_str!("stopwords_en.txt");

/// The analysis configuration: one fixed English pipeline.
pub struct Analyzer {
    stopwords: HashSet<&'static str>,
    stemmer: Stemmer,
}

impl Analyzer {
    pub fn english() -> Self {
        Analyzer {
            stopwords: STOPWORDS_EN.lines().filter(|l| !l.is_empty()).collect(),
            stemmer: Stemmer::create(Algorithm::English),
        }
    }

    /// Tokenize `text` into stemmed terms. Deterministic; empty input
    /// (or input of only stopwords/punctuation) yields an empty list.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|tok| !tok.is_empty())
            .filter(|tok| !self.stopwords.contains(tok))
            .map(|tok| self.stemmer.stem(tok).into_owned())
            .collect()
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    /// Stem a single already-clean token.
    pub fn stem(&self, token: &str) -> String {
        self.stemmer.stem(token).into_owned()
    }
}

impl Default for Analyzer {
    fn default() -> Self {
        Self::english()
    }
}
