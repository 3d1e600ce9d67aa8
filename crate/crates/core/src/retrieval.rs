//! BM25 scoring and top-k retrieval over the inverted index, plus the
//! tf-idf weights used by the removal action.
//!
//! The idf uses the +1-inside-log form, idf(t) = ln(1 + (N - df + 0.5) /
//! (df + 0.5)), which is non-negative for every df. Query terms carry set
//! semantics: duplicates count once. Ties in retrieval order are broken
//! by ascending doc_id so runs are reproducible.

use crate::error::{Error, Result};
use crate::index::InvertedIndex;
use crate::TermSet;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0) {
            return Err(Error::InvalidConfig(format!("bm25 k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidConfig(format!("bm25 b must be in [0,1], got {}", self.b)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

/// An ordered top-k result list: scores non-increasing, doc ids distinct,
/// length at most k.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    entries: Vec<ScoredDoc>,
    k: usize,
}

impl RankedList {
    pub fn new(entries: Vec<ScoredDoc>, k: usize) -> Self {
        debug_assert!(entries.len() <= k);
        debug_assert!(entries.windows(2).all(|w| w[0].score >= w[1].score));
        debug_assert!({
            let ids: std::collections::HashSet<_> = entries.iter().map(|e| &e.doc_id).collect();
            ids.len() == entries.len()
        });
        RankedList { entries, k }
    }

    pub fn empty(k: usize) -> Self {
        RankedList { entries: Vec::new(), k }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ScoredDoc] {
        &self.entries
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.doc_id.as_str())
    }

    /// The first `k` entries as a new list.
    pub fn truncated(&self, k: usize) -> RankedList {
        RankedList {
            entries: self.entries.iter().take(k).cloned().collect(),
            k,
        }
    }
}

/// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)); non-negative for any df.
pub fn idf(index: &InvertedIndex, term: &str) -> f64 {
    let n = index.doc_count() as f64;
    let df = index.document_frequency(term) as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

fn tf_component(tf: f64, doc_len: f64, avg_len: f64, params: &Bm25Params) -> f64 {
    let norm = if avg_len > 0.0 {
        params.k1 * (1.0 - params.b + params.b * doc_len / avg_len)
    } else {
        params.k1
    };
    tf * (params.k1 + 1.0) / (tf + norm)
}

/// BM25 score of one document for a query term set.
pub fn bm25_score(
    query_terms: &TermSet,
    doc_id: &str,
    index: &InvertedIndex,
    params: &Bm25Params,
) -> Result<f64> {
    let doc_len = index.doc_length(doc_id)? as f64;
    let avg_len = index.avg_doc_length();
    let mut score = 0.0;
    for term in query_terms {
        let tf = index.term_frequency(term, doc_id)? as f64;
        if tf > 0.0 {
            score += idf(index, term) * tf_component(tf, doc_len, avg_len, params);
        }
    }
    Ok(score)
}

/// Top-k documents by BM25, ties broken by ascending doc_id. Only
/// documents matching at least one query term appear; the empty query
/// retrieves nothing.
pub fn retrieve_topk(
    query_terms: &TermSet,
    index: &InvertedIndex,
    params: &Bm25Params,
    k: usize,
) -> RankedList {
    if k == 0 || query_terms.is_empty() {
        return RankedList::empty(k);
    }
    let avg_len = index.avg_doc_length();
    let mut acc: HashMap<u32, f64> = HashMap::new();
    for term in query_terms {
        let Some(postings) = index.postings(term) else {
            continue;
        };
        let term_idf = idf(index, term);
        for p in postings {
            let doc_len = index.length_of(p.doc) as f64;
            let contribution = term_idf * tf_component(p.tf as f64, doc_len, avg_len, params);
            *acc.entry(p.doc).or_insert(0.0) += contribution;
        }
    }
    let mut scored: Vec<(u32, f64)> = acc.into_iter().collect();
    scored.sort_by(|a, b| {
        b.1.total_cmp(&a.1)
            .then_with(|| index.doc_id_of(a.0).cmp(index.doc_id_of(b.0)))
    });
    scored.truncate(k);
    let entries = scored
        .into_iter()
        .map(|(doc, score)| ScoredDoc {
            doc_id: index.doc_id_of(doc).to_string(),
            score,
        })
        .collect();
    RankedList::new(entries, k)
}

/// Aggregate tf-idf of `term` over a document set: (total tf) * idf.
/// A term missing from the index weighs 0 (an out-of-vocabulary state
/// term), as does an empty doc set.
pub fn tfidf_weight<S: AsRef<str>>(
    term: &str,
    doc_set: &[S],
    index: &InvertedIndex,
) -> Result<f64> {
    if index.document_frequency(term) == 0 {
        return Ok(0.0);
    }
    let mut total_tf = 0u64;
    for doc_id in doc_set {
        total_tf += index.term_frequency(term, doc_id.as_ref())? as u64;
    }
    Ok(total_tf as f64 * idf(index, term))
}
