//! RM3 relevance-model term weights over a candidate vocabulary.
//!
//! Serves two roles: the sampling distribution for the search's add
//! action (lambda = 1, a pure relevance model), and the model-agnostic
//! RM3 query-expansion baseline (lambda interpolates with the query's
//! maximum-likelihood model).
//!
//! The document posterior P(Q|D) is a softmax over the BM25 scores of the
//! feedback documents for the original query; when every score is zero
//! (e.g. the empty query) this degrades to a uniform posterior.

use crate::error::{Error, Result};
use crate::index::InvertedIndex;
use crate::retrieval::{bm25_score, retrieve_topk, Bm25Params, RankedList};
use crate::TermSet;
use std::collections::BTreeMap;
use std::collections::BTreeSet;

/// A normalized probability distribution over terms.
#[derive(Debug, Clone)]
pub struct TermDistribution {
    weights: BTreeMap<String, f64>,
    pub source_docs: Vec<String>,
}

impl TermDistribution {
    /// Term weights in lexicographic term order; they sum to 1 when the
    /// distribution is nonempty.
    pub fn weights(&self) -> &BTreeMap<String, f64> {
        &self.weights
    }

    #[cfg(test)]
    pub(crate) fn from_weights_for_tests(
        weights: BTreeMap<String, f64>,
        source_docs: Vec<String>,
    ) -> Self {
        TermDistribution { weights, source_docs }
    }

    pub fn weight(&self, term: &str) -> f64 {
        self.weights.get(term).copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Terms ordered by descending weight, ties lexicographic.
    pub fn terms_by_weight(&self) -> Vec<(&str, f64)> {
        let mut ranked: Vec<(&str, f64)> =
            self.weights.iter().map(|(t, &w)| (t.as_str(), w)).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked
    }
}

/// Default RM3 settings for the expansion baseline.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Rm3Config {
    pub lambda: f64,
    pub expansion_terms: usize,
}

impl Default for Rm3Config {
    fn default() -> Self {
        Rm3Config {
            lambda: 0.5,
            expansion_terms: 10,
        }
    }
}

/// RM3 weights restricted to `candidate_vocab` and renormalized.
///
/// RM1: w(t) = sum_D P(t|D) * P(Q|D) with P(t|D) the maximum-likelihood
/// tf(t,D)/|D|. RM3: (1-lambda) * P_mle(t|Q) + lambda * w(t)/sum(w).
/// If the restricted weights are all zero, the distribution falls back
/// to uniform over the candidate vocabulary.
pub fn rm3_weights(
    query_terms: &TermSet,
    feedback_list: &RankedList,
    index: &InvertedIndex,
    lambda: f64,
    candidate_vocab: &BTreeSet<String>,
) -> Result<TermDistribution> {
    if feedback_list.is_empty() {
        return Err(Error::EmptyFeedback);
    }
    let source_docs: Vec<String> = feedback_list.doc_ids().map(str::to_string).collect();

    // P(Q|D): softmax over BM25 scores of the feedback documents.
    let mut scores = Vec::with_capacity(source_docs.len());
    for doc_id in &source_docs {
        scores.push(bm25_score(query_terms, doc_id, index, &Bm25Params::default())?);
    }
    let max_score = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max_score).exp()).collect();
    let exp_sum: f64 = exps.iter().sum();
    let posteriors: Vec<f64> = exps.iter().map(|e| e / exp_sum).collect();

    // RM1 over all feedback-document terms.
    let mut rm1: BTreeMap<String, f64> = BTreeMap::new();
    for (doc_id, &posterior) in source_docs.iter().zip(&posteriors) {
        let doc_len = index.doc_length(doc_id)? as f64;
        if doc_len == 0.0 {
            continue;
        }
        for (term, &tf) in index.doc_terms(doc_id)? {
            *rm1.entry(term.clone()).or_insert(0.0) += (tf as f64 / doc_len) * posterior;
        }
    }
    let rm1_total: f64 = rm1.values().sum();

    let query_mle = if query_terms.is_empty() {
        0.0
    } else {
        1.0 / query_terms.len() as f64
    };

    let mut weights: BTreeMap<String, f64> = BTreeMap::new();
    for term in candidate_vocab {
        let feedback_part = if rm1_total > 0.0 {
            rm1.get(term).copied().unwrap_or(0.0) / rm1_total
        } else {
            0.0
        };
        let query_part = if query_terms.contains(term) { query_mle } else { 0.0 };
        weights.insert(term.clone(), (1.0 - lambda) * query_part + lambda * feedback_part);
    }

    let total: f64 = weights.values().sum();
    if total > 0.0 {
        for w in weights.values_mut() {
            *w /= total;
        }
    } else {
        let uniform = 1.0 / candidate_vocab.len().max(1) as f64;
        for w in weights.values_mut() {
            *w = uniform;
        }
    }
    Ok(TermDistribution { weights, source_docs })
}

/// Expansion: the original query terms plus the `n_terms` heaviest terms
/// of the distribution (ties lexicographic).
pub fn expand_query_rm3(
    query_terms: &TermSet,
    dist: &TermDistribution,
    n_terms: usize,
) -> TermSet {
    debug_assert!(n_terms >= 1);
    let mut expanded = query_terms.clone();
    for (term, _) in dist.terms_by_weight().into_iter().take(n_terms) {
        expanded.insert(term.to_string());
    }
    expanded
}

/// The model-agnostic RM3 baseline: feed back BM25's own top documents
/// for the query and expand. Returns the original query unchanged when
/// nothing is retrievable.
pub fn rm3_baseline_query(
    query_terms: &TermSet,
    index: &InvertedIndex,
    params: &Bm25Params,
    cfg: &Rm3Config,
    feedback_depth: usize,
) -> Result<TermSet> {
    let feedback = retrieve_topk(query_terms, index, params, feedback_depth);
    if feedback.is_empty() {
        return Ok(query_terms.clone());
    }
    let docs: Vec<String> = feedback.doc_ids().map(str::to_string).collect();
    let vocab = index.vocabulary_of(&docs)?;
    let dist = rm3_weights(query_terms, &feedback, index, cfg.lambda, &vocab)?;
    Ok(expand_query_rm3(query_terms, &dist, cfg.expansion_terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Analyzer;
    use approx::assert_abs_diff_eq;

    fn terms(words: &[&str]) -> TermSet {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn vocab(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn index_of(docs: &[(&str, &str)]) -> InvertedIndex {
        InvertedIndex::build(
            docs.iter().map(|(id, t)| (id.to_string(), t.to_string())),
            &Analyzer::english(),
        )
        .unwrap()
    }

    fn ranked(ids: &[&str], k: usize) -> RankedList {
        let n = ids.len();
        crate::retrieval::RankedList::new(
            ids.iter()
                .enumerate()
                .map(|(i, id)| crate::retrieval::ScoredDoc {
                    doc_id: id.to_string(),
                    score: (n - i) as f64,
                })
                .collect(),
            k,
        )
    }

    #[test]
    fn empty_feedback_is_an_error() {
        let idx = index_of(&[("d1", "cat")]);
        let err = rm3_weights(
            &terms(&["cat"]),
            &RankedList::empty(10),
            &idx,
            0.5,
            &vocab(&["cat"]),
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyFeedback));
    }

    #[test]
    fn single_doc_lambda_one_collapses_to_doc_mle() {
        let idx = index_of(&[("d1", "cat cat dog")]);
        let dist = rm3_weights(
            &terms(&["cat"]),
            &ranked(&["d1"], 10),
            &idx,
            1.0,
            &vocab(&["cat", "dog"]),
        )
        .unwrap();
        assert_abs_diff_eq!(dist.weight("cat"), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dist.weight("dog"), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn lambda_zero_is_query_mle() {
        let idx = index_of(&[("d1", "cat dog"), ("d2", "dog bird")]);
        let dist = rm3_weights(
            &terms(&["cat", "dog"]),
            &ranked(&["d1", "d2"], 10),
            &idx,
            0.0,
            &vocab(&["cat", "dog", "bird"]),
        )
        .unwrap();
        assert_abs_diff_eq!(dist.weight("cat"), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(dist.weight("dog"), 0.5, epsilon = 1e-12);
        assert_eq!(dist.weight("bird"), 0.0);
    }

    #[test]
    fn two_doc_hand_mixture() {
        // d1 = "cat", d2 = "cat cat"; empty query makes P(Q|D) uniform.
        let idx = index_of(&[("d1", "cat"), ("d2", "cat cat")]);
        let dist = rm3_weights(
            &TermSet::new(),
            &ranked(&["d1", "d2"], 10),
            &idx,
            1.0,
            &vocab(&["cat"]),
        )
        .unwrap();
        assert_abs_diff_eq!(dist.weight("cat"), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn all_zero_falls_back_to_uniform() {
        // Query off-vocabulary and lambda 0: nothing gets query mass.
        let idx = index_of(&[("d1", "cat dog")]);
        let dist = rm3_weights(
            &terms(&["bird"]),
            &ranked(&["d1"], 10),
            &idx,
            0.0,
            &vocab(&["cat", "dog"]),
        )
        .unwrap();
        assert_abs_diff_eq!(dist.weight("cat"), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(dist.weight("dog"), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn weights_sum_to_one() {
        let idx = index_of(&[("d1", "cat dog bird"), ("d2", "dog fish"), ("d3", "cat cat")]);
        let dist = rm3_weights(
            &terms(&["cat"]),
            &ranked(&["d1", "d2", "d3"], 10),
            &idx,
            0.5,
            &vocab(&["cat", "dog", "bird", "fish"]),
        )
        .unwrap();
        let sum: f64 = dist.weights().values().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-9);
        assert!(dist.weights().values().all(|&w| w >= 0.0));
    }

    #[test]
    fn expansion_is_superset_and_saturates() {
        let idx = index_of(&[("d1", "cat dog bird")]);
        let q = terms(&["fish"]);
        let dist = rm3_weights(&q, &ranked(&["d1"], 10), &idx, 1.0, &vocab(&["cat", "dog", "bird"]))
            .unwrap();
        let expanded = expand_query_rm3(&q, &dist, 100);
        assert!(expanded.is_superset(&q));
        assert_eq!(expanded, terms(&["fish", "cat", "dog", "bird"]));
    }

    #[test]
    fn uniform_ties_break_lexicographically() {
        let idx = index_of(&[("d1", "delta alpha charlie bravo")]);
        let q = TermSet::new();
        let dist = rm3_weights(
            &q,
            &ranked(&["d1"], 10),
            &idx,
            1.0,
            &vocab(&["delta", "alpha", "charli", "bravo"]),
        )
        .unwrap();
        let expanded = expand_query_rm3(&q, &dist, 3);
        assert_eq!(expanded, terms(&["alpha", "bravo", "charli"]));
    }

    #[test]
    fn raising_lambda_never_helps_terms_outside_feedback() {
        // "fish" is a query term in no feedback doc.
        let idx = index_of(&[("d1", "cat dog"), ("d2", "cat"), ("f", "fish")]);
        let q = terms(&["fish", "cat"]);
        let cv = vocab(&["cat", "dog", "fish"]);
        let fb = ranked(&["d1", "d2"], 10);
        let mut last = f64::INFINITY;
        for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let dist = rm3_weights(&q, &fb, &idx, lambda, &cv).unwrap();
            let w = dist.weight("fish");
            assert!(w <= last + 1e-12, "lambda {lambda}: {w} > {last}");
            last = w;
        }
    }
}
