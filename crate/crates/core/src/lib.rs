//! Equivalent-query explanations for black-box rankers.
//!
//! Given a black box's top-k list for a query, search the space of term
//! sets for one that, executed on BM25, reproduces that list as closely
//! as possible under a rank overlap measure. The crate bundles the full
//! sparse stack needed to run and validate that search: analysis and
//! inverted indexing, BM25, RM3 feedback, overlap metrics, black-box
//! adapters, the best-first and greedy searches, IR evaluation, and a
//! synthetic benchmark generator.

pub mod analysis;
pub mod blackbox;
pub mod error;
pub mod evaluation;
pub mod explainer;
pub mod index;
pub mod overlap;
pub mod retrieval;
pub mod rm3;
pub mod synth;

use std::collections::BTreeSet;

/// A query state's terms: a sorted set of stemmed terms.
pub type TermSet = BTreeSet<String>;

pub use analysis::Analyzer;
pub use blackbox::{
    hashed_embedding_ranker, hidden_query_oracle, load_run, write_run, BlackBoxRanker,
    HashedEmbeddingRanker, HiddenOracleSet, HiddenQueryOracle, RunFile,
};
pub use error::{Error, Result};
pub use evaluation::{average_precision, build_report, load_qrels, ndcg_at_k, EvalReport, Qrels};
pub use explainer::{
    bfs_explain, evaluate_state, generate_children, greedy_explain, ExplanationResult,
    QueryState, SearchConfig, SearchMethod, Termination,
};
pub use index::{Document, InvertedIndex};
pub use overlap::{fidelity, jaccard_at_k, rbo_at_k, FidelityScore, OverlapMetric};
pub use retrieval::{bm25_score, retrieve_topk, tfidf_weight, Bm25Params, RankedList, ScoredDoc};
pub use rm3::{expand_query_rm3, rm3_baseline_query, rm3_weights, Rm3Config, TermDistribution};
