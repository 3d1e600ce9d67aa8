//! Search for an equivalent query: best-first exploration (and a greedy
//! baseline) over term-set states, maximizing the overlap between BM25's
//! top-k for the state and the black box's top-k for the original query.
//!
//! States are term sets drawn from the candidate vocabulary, the distinct
//! terms of the black box's top-k documents. The root is the empty query.
//! A state expands into up to `branching` children by choosing add or
//! remove uniformly at random; added terms are sampled from the RM3
//! relevance model of the target list, removed terms with probability
//! inversely proportional to their tf-idf over the target documents, so
//! informative terms tend to stay. A term set is never generated or
//! evaluated twice. Both searches track the best state ever seen and
//! return it.
//!
//! The candidate vocabulary and the RM3 distribution are computed once
//! from the black box's list for the original query and stay fixed for
//! the whole search.

use crate::blackbox::{stable_hash64, BlackBoxRanker};
use crate::error::{Error, Result};
use crate::index::InvertedIndex;
use crate::overlap::{fidelity, jaccard_at_k, rbo_at_k, FidelityScore, OverlapMetric};
use crate::retrieval::{retrieve_topk, tfidf_weight, Bm25Params, RankedList};
use crate::rm3::{rm3_weights, TermDistribution};
use crate::TermSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BinaryHeap, BTreeSet, HashMap, HashSet};

const REMOVAL_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    Bfs,
    Greedy,
}

impl std::fmt::Display for SearchMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SearchMethod::Bfs => write!(f, "bfs"),
            SearchMethod::Greedy => write!(f, "greedy"),
        }
    }
}

/// How a state was reached from its parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Root,
    Add(String),
    Remove(String),
}

/// A node in the search tree: a term set with its cached overlap value.
/// `score` is NaN until the search loop evaluates the state.
#[derive(Debug, Clone)]
pub struct QueryState {
    pub terms: TermSet,
    pub depth: usize,
    pub score: f64,
    pub parent_action: Action,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Locality of the explanation: depth of the lists being matched.
    pub k: usize,
    /// Maximum children generated per expansion.
    pub branching: usize,
    /// Maximum tree depth (edges from the root) expanded by best-first.
    pub max_depth: usize,
    /// Unique-state budget for the greedy baseline.
    pub greedy_max_states: usize,
    /// RBO persistence.
    pub rbo_p: f64,
    pub seed: u64,
    /// Which overlap measure is the objective.
    pub omega: OverlapMetric,
    /// Optional hard cap on unique states evaluated by best-first; a
    /// safety valve, unlimited by default.
    pub max_states: Option<usize>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            k: 10,
            branching: 30,
            max_depth: 10,
            greedy_max_states: 1000,
            rbo_p: 0.9,
            seed: 42,
            omega: OverlapMetric::Rbo,
            max_states: None,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.branching == 0 || self.max_depth == 0 || self.greedy_max_states == 0
        {
            return Err(Error::InvalidConfig(
                "k, branching, max_depth and greedy_max_states must be positive".into(),
            ));
        }
        if !(self.rbo_p > 0.0 && self.rbo_p < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rbo_p must be in (0,1), got {}",
                self.rbo_p
            )));
        }
        if self.max_states == Some(0) {
            return Err(Error::InvalidConfig("max_states must be positive when set".into()));
        }
        Ok(())
    }

    /// Per-query RNG seed, independent of the order queries are run in.
    pub fn seed_for_query(&self, qid: &str) -> u64 {
        splitmix64(self.seed ^ stable_hash64(qid))
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    DepthLimit,
    FrontierExhausted,
    GoalReached,
    StateBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplanationResult {
    /// The equivalent query: the best term set discovered.
    pub equivalent_query: Vec<String>,
    pub fidelity: FidelityScore,
    pub states_evaluated: usize,
    /// (state index, objective) each time the incumbent improved.
    pub best_score_trace: Vec<(usize, f64)>,
    pub terminated_by: Termination,
}

/// One JSONL record of an explanation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub qid: String,
    pub equivalent_query: Vec<String>,
    pub jaccard: f64,
    pub rbo: f64,
    pub states_evaluated: usize,
    pub terminated_by: Termination,
    pub trace: Vec<(usize, f64)>,
}

impl ExplanationResult {
    pub fn to_record(&self, qid: &str) -> ExplanationRecord {
        ExplanationRecord {
            qid: qid.to_string(),
            equivalent_query: self.equivalent_query.clone(),
            jaccard: self.fidelity.jaccard,
            rbo: self.fidelity.rbo,
            states_evaluated: self.states_evaluated,
            terminated_by: self.terminated_by,
            trace: self.best_score_trace.clone(),
        }
    }
}

/// The objective: overlap between BM25's list for the state and the
/// target list. The empty state retrieves nothing and scores 0.
pub fn evaluate_state(
    state_terms: &TermSet,
    target_list: &RankedList,
    index: &InvertedIndex,
    bm25: &Bm25Params,
    cfg: &SearchConfig,
) -> f64 {
    let approx = retrieve_topk(state_terms, index, bm25, cfg.k);
    match cfg.omega {
        OverlapMetric::Rbo => rbo_at_k(&approx, target_list, cfg.k, cfg.rbo_p),
        OverlapMetric::Jaccard => jaccard_at_k(&approx, target_list, cfg.k),
    }
}

/// Sample up to `branching` child states for `state`. Children whose term
/// set was generated before anywhere in the search (`seen`) are discarded;
/// after 10 * branching sampling attempts the (possibly shorter) batch is
/// returned. Child scores are left NaN for the caller to evaluate.
pub fn generate_children(
    state: &QueryState,
    candidate_vocab: &BTreeSet<String>,
    rm3_dist: &TermDistribution,
    index: &InvertedIndex,
    cfg: &SearchConfig,
    rng: &mut ChaCha8Rng,
    seen: &mut HashSet<TermSet>,
) -> Result<Vec<QueryState>> {
    if candidate_vocab.is_empty() {
        return Err(Error::EmptyCandidateVocabulary);
    }
    // Add weights: the RM3 distribution restricted to terms not in the
    // state. Remove weights: 1 / (tfidf + eps) over the state's terms.
    let addable: Vec<(&str, f64)> = rm3_dist
        .weights()
        .iter()
        .filter(|(t, _)| !state.terms.contains(*t))
        .map(|(t, &w)| (t.as_str(), w))
        .collect();
    let removable: Vec<(&str, f64)> = state
        .terms
        .iter()
        .map(|t| {
            tfidf_weight(t, &rm3_dist.source_docs, index)
                .map(|w| (t.as_str(), 1.0 / (w + REMOVAL_EPSILON)))
        })
        .collect::<Result<_>>()?;

    let can_add = !addable.is_empty();
    let can_remove = !removable.is_empty();

    let mut children = Vec::new();
    let mut attempts = 0;
    let max_attempts = 10 * cfg.branching;
    while children.len() < cfg.branching && attempts < max_attempts {
        attempts += 1;
        let do_remove = match (can_add, can_remove) {
            (true, true) => rng.gen_bool(0.5),
            (false, true) => true,
            (true, false) => false,
            (false, false) => break,
        };
        let (action, child_terms) = if do_remove {
            let term = weighted_choice(&removable, rng);
            let mut terms = state.terms.clone();
            terms.remove(term);
            (Action::Remove(term.to_string()), terms)
        } else {
            let term = weighted_choice(&addable, rng);
            let mut terms = state.terms.clone();
            terms.insert(term.to_string());
            (Action::Add(term.to_string()), terms)
        };
        if seen.insert(child_terms.clone()) {
            children.push(QueryState {
                terms: child_terms,
                depth: state.depth + 1,
                score: f64::NAN,
                parent_action: action,
            });
        }
    }
    Ok(children)
}

/// Deterministic weighted sampling over (item, weight) pairs listed in a
/// fixed order. Zero total weight degrades to uniform.
fn weighted_choice<'a>(items: &[(&'a str, f64)], rng: &mut ChaCha8Rng) -> &'a str {
    debug_assert!(!items.is_empty());
    let total: f64 = items.iter().map(|(_, w)| w.max(0.0)).sum();
    if total <= 0.0 {
        let i = rng.gen_range(0..items.len());
        return items[i].0;
    }
    let mut draw = rng.gen_range(0.0..total);
    for (item, w) in items {
        let w = w.max(0.0);
        if draw < w {
            return item;
        }
        draw -= w;
    }
    items.last().unwrap().0
}

/// Shared search machinery: target resolution, memoized evaluation,
/// incumbent tracking.
struct Search<'a> {
    index: &'a InvertedIndex,
    bm25: &'a Bm25Params,
    cfg: &'a SearchConfig,
    target: RankedList,
    candidate_vocab: BTreeSet<String>,
    rm3_dist: TermDistribution,
    rng: ChaCha8Rng,
    seen: HashSet<TermSet>,
    memo: HashMap<TermSet, f64>,
    evaluated: usize,
    best_terms: TermSet,
    best_score: f64,
    trace: Vec<(usize, f64)>,
}

impl<'a> Search<'a> {
    fn new(
        qid: &str,
        query_terms: &TermSet,
        blackbox: &dyn BlackBoxRanker,
        index: &'a InvertedIndex,
        bm25: &'a Bm25Params,
        cfg: &'a SearchConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        bm25.validate()?;
        let target = blackbox.rank(qid, query_terms, index)?.truncated(cfg.k);
        if target.is_empty() {
            return Err(Error::EmptyTargetList(qid.to_string()));
        }
        let missing: Vec<String> = target
            .doc_ids()
            .filter(|d| !index.contains_doc(d))
            .map(str::to_string)
            .collect();
        if !missing.is_empty() {
            return Err(Error::TargetDocsMissing {
                qid: qid.to_string(),
                missing,
            });
        }
        let target_docs: Vec<String> = target.doc_ids().map(str::to_string).collect();
        let candidate_vocab = index.vocabulary_of(&target_docs)?;
        if candidate_vocab.is_empty() {
            return Err(Error::EmptyCandidateVocabulary);
        }
        // Pure relevance model (lambda = 1) over the target list: the add
        // action should favor terms of the documents being mimicked.
        let rm3_dist = rm3_weights(query_terms, &target, index, 1.0, &candidate_vocab)?;
        Ok(Search {
            index,
            bm25,
            cfg,
            target,
            candidate_vocab,
            rm3_dist,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed_for_query(qid)),
            seen: HashSet::new(),
            memo: HashMap::new(),
            evaluated: 0,
            best_terms: TermSet::new(),
            best_score: f64::NEG_INFINITY,
            trace: Vec::new(),
        })
    }

    fn evaluate(&mut self, terms: &TermSet) -> f64 {
        if let Some(&score) = self.memo.get(terms) {
            return score;
        }
        let score = evaluate_state(terms, &self.target, self.index, self.bm25, self.cfg);
        self.memo.insert(terms.clone(), score);
        self.evaluated += 1;
        if score > self.best_score {
            self.best_score = score;
            self.best_terms = terms.clone();
            self.trace.push((self.evaluated - 1, score));
        }
        score
    }

    fn over_budget(&self, budget: Option<usize>) -> bool {
        budget.is_some_and(|cap| self.evaluated >= cap)
    }

    fn finish(self, terminated_by: Termination) -> ExplanationResult {
        let approx = retrieve_topk(&self.best_terms, self.index, self.bm25, self.cfg.k);
        let fidelity = fidelity(&approx, &self.target, self.cfg.k, self.cfg.rbo_p);
        ExplanationResult {
            equivalent_query: self.best_terms.iter().cloned().collect(),
            fidelity,
            states_evaluated: self.evaluated,
            best_score_trace: self.trace,
            terminated_by,
        }
    }
}

/// Frontier ordering: higher score first, then shallower depth, then
/// lexicographically smaller term set, so runs are fully deterministic.
struct FrontierEntry {
    score: f64,
    depth: usize,
    terms: TermSet,
}

impl PartialEq for FrontierEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for FrontierEntry {}
impl PartialOrd for FrontierEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for FrontierEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.depth.cmp(&self.depth))
            .then_with(|| other.terms.cmp(&self.terms))
    }
}

/// Best-first search from the empty query. Pops the unexplored state with
/// the best objective, expands it if it is above the depth limit, and
/// keeps the best state ever evaluated. Terminates when the frontier is
/// empty, when no frontier state may still be expanded, when the
/// objective reaches 1, or when the optional state budget runs out.
pub fn bfs_explain(
    qid: &str,
    query_terms: &TermSet,
    blackbox: &dyn BlackBoxRanker,
    index: &InvertedIndex,
    bm25: &Bm25Params,
    cfg: &SearchConfig,
) -> Result<ExplanationResult> {
    let mut search = Search::new(qid, query_terms, blackbox, index, bm25, cfg)?;

    let root = QueryState {
        terms: TermSet::new(),
        depth: 0,
        score: f64::NAN,
        parent_action: Action::Root,
    };
    search.seen.insert(root.terms.clone());
    let root_score = search.evaluate(&root.terms);

    let mut frontier: BinaryHeap<FrontierEntry> = BinaryHeap::new();
    let mut expandable = 0usize;
    frontier.push(FrontierEntry {
        score: root_score,
        depth: 0,
        terms: root.terms.clone(),
    });
    if root.depth < cfg.max_depth {
        expandable += 1;
    }

    loop {
        if frontier.is_empty() {
            return Ok(search.finish(Termination::FrontierExhausted));
        }
        if expandable == 0 {
            return Ok(search.finish(Termination::DepthLimit));
        }
        let entry = frontier.pop().expect("frontier nonempty");
        if entry.depth >= cfg.max_depth {
            continue;
        }
        expandable -= 1;

        let state = QueryState {
            terms: entry.terms,
            depth: entry.depth,
            score: entry.score,
            parent_action: Action::Root,
        };
        let children = generate_children(
            &state,
            &search.candidate_vocab,
            &search.rm3_dist,
            search.index,
            cfg,
            &mut search.rng,
            &mut search.seen,
        )?;
        for child in children {
            let score = search.evaluate(&child.terms);
            if score == 1.0 {
                return Ok(search.finish(Termination::GoalReached));
            }
            if search.over_budget(cfg.max_states) {
                return Ok(search.finish(Termination::StateBudget));
            }
            if child.depth < cfg.max_depth {
                expandable += 1;
            }
            frontier.push(FrontierEntry {
                score,
                depth: child.depth,
                terms: child.terms,
            });
        }
    }
}

/// Greedy baseline: expand only the current state and always move to its
/// best child, even when that child is worse; the incumbent is tracked
/// separately. Stops at the unique-state budget or when a state yields no
/// new children.
pub fn greedy_explain(
    qid: &str,
    query_terms: &TermSet,
    blackbox: &dyn BlackBoxRanker,
    index: &InvertedIndex,
    bm25: &Bm25Params,
    cfg: &SearchConfig,
) -> Result<ExplanationResult> {
    let mut search = Search::new(qid, query_terms, blackbox, index, bm25, cfg)?;

    let mut current = QueryState {
        terms: TermSet::new(),
        depth: 0,
        score: f64::NAN,
        parent_action: Action::Root,
    };
    search.seen.insert(current.terms.clone());
    current.score = search.evaluate(&current.terms);
    if search.over_budget(Some(cfg.greedy_max_states)) {
        return Ok(search.finish(Termination::StateBudget));
    }

    loop {
        let children = generate_children(
            &current,
            &search.candidate_vocab,
            &search.rm3_dist,
            search.index,
            cfg,
            &mut search.rng,
            &mut search.seen,
        )?;
        if children.is_empty() {
            return Ok(search.finish(Termination::FrontierExhausted));
        }
        let mut best_child: Option<QueryState> = None;
        for mut child in children {
            child.score = search.evaluate(&child.terms);
            if child.score == 1.0 {
                return Ok(search.finish(Termination::GoalReached));
            }
            let better = match &best_child {
                None => true,
                Some(b) => match child.score.total_cmp(&b.score) {
                    std::cmp::Ordering::Greater => true,
                    std::cmp::Ordering::Equal => child.terms < b.terms,
                    std::cmp::Ordering::Less => false,
                },
            };
            if better {
                best_child = Some(child);
            }
            if search.over_budget(Some(cfg.greedy_max_states)) {
                return Ok(search.finish(Termination::StateBudget));
            }
        }
        current = best_child.expect("children nonempty");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::Analyzer;
    use crate::blackbox::hidden_query_oracle;
    use crate::rm3::rm3_weights;

    fn terms(words: &[&str]) -> TermSet {
        words.iter().map(|s| s.to_string()).collect()
    }

    /// A small corpus with correlated terms so rankings are non-trivial.
    fn toy_index() -> InvertedIndex {
        let docs = vec![
            ("d01", "solar panel energi grid"),
            ("d02", "solar energi farm sun"),
            ("d03", "panel roof solar instal"),
            ("d04", "wind turbin energi grid"),
            ("d05", "wind farm turbin blade"),
            ("d06", "coal plant energi smoke"),
            ("d07", "river dam hydro energi"),
            ("d08", "sun light roof heat"),
            ("d09", "grid power line energi"),
            ("d10", "battery store energi solar"),
            ("d11", "blade steel turbin"),
            ("d12", "smoke air coal"),
            ("d13", "light lamp power"),
            ("d14", "dam concret river"),
            ("d15", "heat pump power"),
        ];
        InvertedIndex::build(
            docs.into_iter().map(|(id, t)| (id.to_string(), t.to_string())),
            &Analyzer::english(),
        )
        .unwrap()
    }

    #[test]
    fn evaluate_state_basics() {
        let idx = toy_index();
        let cfg = SearchConfig::default();
        let bm25 = Bm25Params::default();
        let oracle = hidden_query_oracle(terms(&["solar", "energi"]), &idx, bm25, 10).unwrap();
        let target = oracle.rank("q", &TermSet::new(), &idx).unwrap();
        // The hidden terms are a goal state.
        let s = evaluate_state(&terms(&["solar", "energi"]), &target, &idx, &bm25, &cfg);
        assert_eq!(s, 1.0);
        // The empty state scores 0.
        assert_eq!(evaluate_state(&TermSet::new(), &target, &idx, &bm25, &cfg), 0.0);
        // Any state is within [0,1].
        let s2 = evaluate_state(&terms(&["wind"]), &target, &idx, &bm25, &cfg);
        assert!((0.0..=1.0).contains(&s2));
    }

    #[test]
    fn children_of_root_are_single_term_additions() {
        let idx = toy_index();
        let cfg = SearchConfig::default();
        let bm25 = Bm25Params::default();
        let target = retrieve_topk(&terms(&["solar"]), &idx, &bm25, 10);
        let docs: Vec<String> = target.doc_ids().map(str::to_string).collect();
        let vocab = idx.vocabulary_of(&docs).unwrap();
        let dist = rm3_weights(&terms(&["solar"]), &target, &idx, 1.0, &vocab).unwrap();
        let root = QueryState {
            terms: TermSet::new(),
            depth: 0,
            score: 0.0,
            parent_action: Action::Root,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = HashSet::new();
        seen.insert(TermSet::new());
        let children =
            generate_children(&root, &vocab, &dist, &idx, &cfg, &mut rng, &mut seen).unwrap();
        assert!(!children.is_empty());
        for c in &children {
            assert_eq!(c.terms.len(), 1);
            assert_eq!(c.depth, 1);
            assert!(matches!(c.parent_action, Action::Add(_)));
            assert!(c.terms.iter().all(|t| vocab.contains(t)));
        }
    }

    #[test]
    fn exhausted_vocab_leaves_only_removals() {
        let analyzer = Analyzer::english();
        let idx = InvertedIndex::build(
            vec![("d1".to_string(), "cat".to_string())],
            &analyzer,
        )
        .unwrap();
        let cfg = SearchConfig::default();
        let bm25 = Bm25Params::default();
        let target = retrieve_topk(&terms(&["cat"]), &idx, &bm25, 10);
        let vocab = idx.vocabulary_of(&["d1"]).unwrap();
        let dist = rm3_weights(&terms(&["cat"]), &target, &idx, 1.0, &vocab).unwrap();
        let state = QueryState {
            terms: terms(&["cat"]),
            depth: 1,
            score: 1.0,
            parent_action: Action::Add("cat".into()),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // Fresh seen set: the empty set has not been generated yet.
        let mut seen = HashSet::new();
        seen.insert(state.terms.clone());
        let children =
            generate_children(&state, &vocab, &dist, &idx, &cfg, &mut rng, &mut seen).unwrap();
        assert_eq!(children.len(), 1);
        assert!(children[0].terms.is_empty());
        assert!(matches!(children[0].parent_action, Action::Remove(_)));
    }

    #[test]
    fn point_mass_distribution_collapses_add_children() {
        let idx = toy_index();
        let cfg = SearchConfig::default();
        let bm25 = Bm25Params::default();
        let target = retrieve_topk(&terms(&["solar"]), &idx, &bm25, 10);
        let docs: Vec<String> = target.doc_ids().map(str::to_string).collect();
        let vocab = idx.vocabulary_of(&docs).unwrap();
        // Point mass on one term.
        let mut weights = std::collections::BTreeMap::new();
        for t in &vocab {
            weights.insert(t.clone(), 0.0);
        }
        weights.insert("sun".to_string(), 1.0);
        let dist = TermDistribution::from_weights_for_tests(weights, docs);
        let root = QueryState {
            terms: TermSet::new(),
            depth: 0,
            score: 0.0,
            parent_action: Action::Root,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut seen = HashSet::new();
        seen.insert(TermSet::new());
        let children =
            generate_children(&root, &vocab, &dist, &idx, &cfg, &mut rng, &mut seen).unwrap();
        assert_eq!(children.len(), 1);
        assert_eq!(children[0].terms, terms(&["sun"]));
    }

    #[test]
    fn empty_vocab_is_an_error() {
        let idx = toy_index();
        let cfg = SearchConfig::default();
        let root = QueryState {
            terms: TermSet::new(),
            depth: 0,
            score: 0.0,
            parent_action: Action::Root,
        };
        let dist = TermDistribution::from_weights_for_tests(
            std::collections::BTreeMap::new(),
            Vec::new(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = HashSet::new();
        let err = generate_children(
            &root,
            &BTreeSet::new(),
            &dist,
            &idx,
            &cfg,
            &mut rng,
            &mut seen,
        )
        .unwrap_err();
        assert!(matches!(err, Error::EmptyCandidateVocabulary));
    }

    #[test]
    fn bfs_recovers_hidden_query() {
        let idx = toy_index();
        let cfg = SearchConfig::default();
        let bm25 = Bm25Params::default();
        let hidden = terms(&["solar", "grid"]);
        let oracle = hidden_query_oracle(hidden.clone(), &idx, bm25, cfg.k).unwrap();
        let result =
            bfs_explain("q1", &terms(&["power"]), &oracle, &idx, &bm25, &cfg).unwrap();
        assert_eq!(result.fidelity.rbo, 1.0);
        assert_eq!(result.terminated_by, Termination::GoalReached);

        // Independent check that a goal state exists within the candidate
        // vocabulary: exhaustive search over subsets of size <= 2.
        let target = oracle.rank("q1", &TermSet::new(), &idx).unwrap();
        let docs: Vec<String> = target.doc_ids().map(str::to_string).collect();
        let vocab: Vec<String> = idx.vocabulary_of(&docs).unwrap().into_iter().collect();
        let mut goal_found = false;
        for i in 0..vocab.len() {
            for j in i..vocab.len() {
                let mut state = TermSet::new();
                state.insert(vocab[i].clone());
                state.insert(vocab[j].clone());
                if evaluate_state(&state, &target, &idx, &bm25, &cfg) == 1.0 {
                    goal_found = true;
                }
            }
        }
        assert!(goal_found);
    }

    #[test]
    fn self_approximation_reaches_one() {
        // theta = phi: the black box is BM25 itself on the original query.
        let idx = toy_index();
        let cfg = SearchConfig::default();
        let bm25 = Bm25Params::default();
        let q = terms(&["wind", "turbin"]);
        let oracle = hidden_query_oracle(q.clone(), &idx, bm25, cfg.k).unwrap();
        let bfs = bfs_explain("q", &q, &oracle, &idx, &bm25, &cfg).unwrap();
        assert_eq!(bfs.fidelity.rbo, 1.0);
        let greedy = greedy_explain("q", &q, &oracle, &idx, &bm25, &cfg).unwrap();
        assert_eq!(greedy.fidelity.rbo, 1.0);
    }

    #[test]
    fn fixed_seed_runs_are_identical() {
        let idx = toy_index();
        let cfg = SearchConfig {
            max_states: Some(200),
            ..SearchConfig::default()
        };
        let bm25 = Bm25Params::default();
        let ranker = crate::blackbox::hashed_embedding_ranker(16, 5, &idx, cfg.k).unwrap();
        let q = terms(&["solar", "power"]);
        let a = bfs_explain("q9", &q, &ranker, &idx, &bm25, &cfg).unwrap();
        let b = bfs_explain("q9", &q, &ranker, &idx, &bm25, &cfg).unwrap();
        assert_eq!(a, b);
        let ga = greedy_explain("q9", &q, &ranker, &idx, &bm25, &cfg).unwrap();
        let gb = greedy_explain("q9", &q, &ranker, &idx, &bm25, &cfg).unwrap();
        assert_eq!(ga, gb);
    }

    #[test]
    fn trace_is_monotone_and_consistent() {
        let idx = toy_index();
        let cfg = SearchConfig {
            max_states: Some(300),
            ..SearchConfig::default()
        };
        let bm25 = Bm25Params::default();
        let ranker = crate::blackbox::hashed_embedding_ranker(16, 11, &idx, cfg.k).unwrap();
        let q = terms(&["energi"]);
        let result = bfs_explain("q3", &q, &ranker, &idx, &bm25, &cfg).unwrap();
        assert!(result
            .best_score_trace
            .windows(2)
            .all(|w| w[0].1 <= w[1].1 && w[0].0 < w[1].0));
        // Stored fidelity equals a recomputation from the equivalent query.
        let target = ranker.rank("q3", &q, &idx).unwrap().truncated(cfg.k);
        let eq: TermSet = result.equivalent_query.iter().cloned().collect();
        let recomputed = evaluate_state(&eq, &target, &idx, &bm25, &cfg);
        assert_eq!(recomputed, result.fidelity.rbo);
    }

    #[test]
    fn greedy_respects_budget() {
        let idx = toy_index();
        let cfg = SearchConfig {
            greedy_max_states: 50,
            ..SearchConfig::default()
        };
        let bm25 = Bm25Params::default();
        let ranker = crate::blackbox::hashed_embedding_ranker(16, 2, &idx, cfg.k).unwrap();
        let result =
            greedy_explain("q5", &terms(&["solar"]), &ranker, &idx, &bm25, &cfg).unwrap();
        assert!(result.states_evaluated <= 50);
    }

    #[test]
    fn empty_target_is_an_error() {
        let idx = toy_index();
        let cfg = SearchConfig::default();
        let bm25 = Bm25Params::default();
        let run = crate::blackbox::RunFile::from_lists(
            [("q1".to_string(), RankedList::empty(10))].into_iter().collect(),
        );
        let err = bfs_explain("q1", &terms(&["solar"]), &run, &idx, &bm25, &cfg).unwrap_err();
        assert!(matches!(err, Error::EmptyTargetList(_)));
    }

    #[test]
    fn target_docs_outside_corpus_are_an_error() {
        let idx = toy_index();
        let cfg = SearchConfig::default();
        let bm25 = Bm25Params::default();
        let list = RankedList::new(
            vec![
                crate::retrieval::ScoredDoc { doc_id: "d01".into(), score: 2.0 },
                crate::retrieval::ScoredDoc { doc_id: "ghost".into(), score: 1.0 },
            ],
            10,
        );
        let run = crate::blackbox::RunFile::from_lists(
            [("q1".to_string(), list)].into_iter().collect(),
        );
        let err = bfs_explain("q1", &terms(&["solar"]), &run, &idx, &bm25, &cfg).unwrap_err();
        match err {
            Error::TargetDocsMissing { missing, .. } => assert_eq!(missing, vec!["ghost"]),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn states_stay_inside_candidate_vocabulary() {
        let idx = toy_index();
        let cfg = SearchConfig {
            max_states: Some(400),
            ..SearchConfig::default()
        };
        let bm25 = Bm25Params::default();
        let ranker = crate::blackbox::hashed_embedding_ranker(16, 21, &idx, cfg.k).unwrap();
        // Query term "coal" may fall outside the target's vocabulary; the
        // equivalent query must still be a subset of it.
        let q = terms(&["coal", "solar"]);
        let result = bfs_explain("q8", &q, &ranker, &idx, &bm25, &cfg).unwrap();
        let target = ranker.rank("q8", &q, &idx).unwrap().truncated(cfg.k);
        let docs: Vec<String> = target.doc_ids().map(str::to_string).collect();
        let vocab = idx.vocabulary_of(&docs).unwrap();
        for t in &result.equivalent_query {
            assert!(vocab.contains(t), "term {t} escaped the candidate vocabulary");
        }
    }
}
