//! Sources of the black-box ranking being explained: TREC run files for
//! external systems, plus two built-in synthetic rankers.
//!
//! The hidden-query oracle is secretly BM25 run with a fixed expanded
//! query, so a goal state with overlap 1 is guaranteed to exist and be
//! known. The hashed-embedding ranker scores by cosine over pseudo-random
//! term vectors, giving a genuinely non-term-matching ranking for
//! exercising fidelity < 1.

use crate::error::{Error, Result};
use crate::index::InvertedIndex;
use crate::retrieval::{idf, retrieve_topk, Bm25Params, RankedList, ScoredDoc};
use crate::TermSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// A deterministic source of top-k lists. Run files rank by qid and
/// ignore the query terms; the synthetic rankers ignore the qid.
pub trait BlackBoxRanker: Send + Sync {
    fn rank(&self, qid: &str, query_terms: &TermSet, index: &InvertedIndex) -> Result<RankedList>;
}

/// Parsed TREC run: qid -> ranked list.
#[derive(Debug, Clone)]
pub struct RunFile {
    runs: BTreeMap<String, RankedList>,
}

impl RunFile {
    pub fn get(&self, qid: &str) -> Option<&RankedList> {
        self.runs.get(qid)
    }

    pub fn qids(&self) -> impl Iterator<Item = &str> {
        self.runs.keys().map(|s| s.as_str())
    }

    pub fn runs(&self) -> &BTreeMap<String, RankedList> {
        &self.runs
    }

    pub fn from_lists(runs: BTreeMap<String, RankedList>) -> Self {
        RunFile { runs }
    }
}

impl BlackBoxRanker for RunFile {
    fn rank(&self, qid: &str, _query_terms: &TermSet, _index: &InvertedIndex) -> Result<RankedList> {
        self.runs
            .get(qid)
            .cloned()
            .ok_or_else(|| Error::UnknownQueryId(qid.to_string()))
    }
}

/// Load a TREC 6-column run file (`qid Q0 docid rank score tag`,
/// whitespace separated), truncating each query's list to `max_k`.
/// Ranks must be contiguous from 1 per qid and scores non-increasing.
pub fn load_run(path: impl AsRef<Path>, max_k: usize) -> Result<RunFile> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let display = path.display().to_string();

    let mut per_qid: BTreeMap<String, Vec<(usize, String, f64)>> = BTreeMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let malformed = |reason: String| Error::MalformedLine {
            path: display.clone(),
            line: lineno + 1,
            reason,
        };
        if fields.len() != 6 {
            return Err(malformed(format!("expected 6 fields, found {}", fields.len())));
        }
        let qid = fields[0].to_string();
        let doc_id = fields[2].to_string();
        let rank: usize = fields[3]
            .parse()
            .map_err(|_| malformed(format!("bad rank {:?}", fields[3])))?;
        let score: f64 = fields[4]
            .parse()
            .map_err(|_| malformed(format!("bad score {:?}", fields[4])))?;
        if !seen.insert((qid.clone(), doc_id.clone())) {
            return Err(Error::DuplicateEntry { qid, doc_id });
        }
        per_qid.entry(qid).or_default().push((rank, doc_id, score));
    }

    let mut runs = BTreeMap::new();
    for (qid, mut rows) in per_qid {
        rows.sort_by_key(|(rank, _, _)| *rank);
        for (i, (rank, _, _)) in rows.iter().enumerate() {
            if *rank != i + 1 {
                return Err(Error::NonContiguousRanks {
                    qid,
                    expected: i + 1,
                    found: *rank,
                });
            }
        }
        for pair in rows.windows(2) {
            if pair[1].2 > pair[0].2 {
                return Err(Error::InvalidConfig(format!(
                    "run {display}: query {qid} has increasing scores at rank {}",
                    pair[1].0
                )));
            }
        }
        rows.truncate(max_k);
        let entries = rows
            .into_iter()
            .map(|(_, doc_id, score)| ScoredDoc { doc_id, score })
            .collect();
        runs.insert(qid, RankedList::new(entries, max_k));
    }
    Ok(RunFile { runs })
}

/// Write ranked lists in TREC 6-column format.
pub fn write_run<W: Write>(
    mut w: W,
    runs: &BTreeMap<String, RankedList>,
    tag: &str,
) -> std::io::Result<()> {
    for (qid, list) in runs {
        for (i, entry) in list.entries().iter().enumerate() {
            writeln!(w, "{qid} Q0 {} {} {:.6} {tag}", entry.doc_id, i + 1, entry.score)?;
        }
    }
    Ok(())
}

/// A black box that is secretly BM25 with a fixed hidden query. Its
/// output ignores whatever query it is asked about.
#[derive(Debug, Clone)]
pub struct HiddenQueryOracle {
    hidden_terms: TermSet,
    params: Bm25Params,
    k: usize,
}

pub fn hidden_query_oracle(
    hidden_terms: TermSet,
    index: &InvertedIndex,
    params: Bm25Params,
    k: usize,
) -> Result<HiddenQueryOracle> {
    if hidden_terms.is_empty() {
        return Err(Error::InvalidConfig("hidden query must be nonempty".into()));
    }
    for term in &hidden_terms {
        if index.document_frequency(term) == 0 {
            return Err(Error::InvalidConfig(format!(
                "hidden query term {term:?} is not in the index vocabulary"
            )));
        }
    }
    Ok(HiddenQueryOracle { hidden_terms, params, k })
}

impl HiddenQueryOracle {
    pub fn hidden_terms(&self) -> &TermSet {
        &self.hidden_terms
    }
}

impl BlackBoxRanker for HiddenQueryOracle {
    fn rank(&self, _qid: &str, _query_terms: &TermSet, index: &InvertedIndex) -> Result<RankedList> {
        Ok(retrieve_topk(&self.hidden_terms, index, &self.params, self.k))
    }
}

/// A set of hidden-query oracles keyed by qid, for driving a whole topic
/// file against per-topic hidden queries.
#[derive(Debug, Clone)]
pub struct HiddenOracleSet {
    queries: BTreeMap<String, TermSet>,
    params: Bm25Params,
    k: usize,
}

impl HiddenOracleSet {
    pub fn new(queries: BTreeMap<String, TermSet>, params: Bm25Params, k: usize) -> Self {
        HiddenOracleSet { queries, params, k }
    }

    /// Load `{"qid": ["term", ...], ...}` from JSON, validating terms
    /// against the index vocabulary.
    pub fn load(path: impl AsRef<Path>, index: &InvertedIndex, params: Bm25Params, k: usize) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_reader(BufReader::new(file))?;
        let mut queries = BTreeMap::new();
        for (qid, terms) in raw {
            let set: TermSet = terms.into_iter().collect();
            hidden_query_oracle(set.clone(), index, params, k)?;
            queries.insert(qid, set);
        }
        Ok(HiddenOracleSet { queries, params, k })
    }

    pub fn hidden_terms(&self, qid: &str) -> Option<&TermSet> {
        self.queries.get(qid)
    }
}

impl BlackBoxRanker for HiddenOracleSet {
    fn rank(&self, qid: &str, _query_terms: &TermSet, index: &InvertedIndex) -> Result<RankedList> {
        let hidden = self
            .queries
            .get(qid)
            .ok_or_else(|| Error::UnknownQueryId(qid.to_string()))?;
        Ok(retrieve_topk(hidden, index, &self.params, self.k))
    }
}

/// Cosine ranker over deterministic pseudo-random unit term vectors.
/// Document vectors are idf-weighted means of their term vectors.
#[derive(Debug, Clone)]
pub struct HashedEmbeddingRanker {
    dim: usize,
    seed: u64,
    k: usize,
    // Unit doc vectors aligned with internal doc ids; None for documents
    // with no weighted terms (never retrievable).
    doc_vectors: Vec<Option<Vec<f64>>>,
}

pub fn hashed_embedding_ranker(
    dim: usize,
    seed: u64,
    index: &InvertedIndex,
    k: usize,
) -> Result<HashedEmbeddingRanker> {
    if dim < 8 {
        return Err(Error::InvalidConfig(format!(
            "embedding dimension must be at least 8, got {dim}"
        )));
    }
    let mut doc_vectors = Vec::with_capacity(index.doc_count());
    for internal in 0..index.doc_count() as u32 {
        let doc_id = index.doc_id_of(internal);
        let freqs = index.doc_terms(doc_id)?;
        let mut vec = vec![0.0; dim];
        let mut weight_total = 0.0;
        for (term, &tf) in freqs {
            let w = tf as f64 * idf(index, term);
            if w <= 0.0 {
                continue;
            }
            let tv = term_vector(term, seed, dim);
            for (acc, x) in vec.iter_mut().zip(&tv) {
                *acc += w * x;
            }
            weight_total += w;
        }
        doc_vectors.push(normalize(vec).filter(|_| weight_total > 0.0));
    }
    Ok(HashedEmbeddingRanker { dim, seed, k, doc_vectors })
}

impl HashedEmbeddingRanker {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Unit vector for a query term set (idf-weighted mean), if nonzero.
    pub fn query_vector(&self, query_terms: &TermSet, index: &InvertedIndex) -> Option<Vec<f64>> {
        let mut vec = vec![0.0; self.dim];
        let mut weight_total = 0.0;
        for term in query_terms {
            let w = idf(index, term);
            if w <= 0.0 {
                continue;
            }
            let tv = term_vector(term, self.seed, self.dim);
            for (acc, x) in vec.iter_mut().zip(&tv) {
                *acc += w * x;
            }
            weight_total += w;
        }
        normalize(vec).filter(|_| weight_total > 0.0)
    }

    /// Cosine between a query and one document, mostly for verifying the
    /// ranking against direct computation in tests.
    pub fn cosine(&self, query_terms: &TermSet, doc_id: &str, index: &InvertedIndex) -> Result<f64> {
        let internal = index
            .internal_id(doc_id)
            .ok_or_else(|| Error::UnknownDocId(doc_id.to_string()))?;
        let Some(q) = self.query_vector(query_terms, index) else {
            return Ok(0.0);
        };
        Ok(match &self.doc_vectors[internal as usize] {
            Some(d) => dot(&q, d),
            None => 0.0,
        })
    }
}

impl BlackBoxRanker for HashedEmbeddingRanker {
    fn rank(&self, _qid: &str, query_terms: &TermSet, index: &InvertedIndex) -> Result<RankedList> {
        let Some(query_vec) = self.query_vector(query_terms, index) else {
            return Ok(RankedList::empty(self.k));
        };
        let mut scored: Vec<(u32, f64)> = self
            .doc_vectors
            .iter()
            .enumerate()
            .filter_map(|(i, dv)| dv.as_ref().map(|d| (i as u32, dot(&query_vec, d))))
            .collect();
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| index.doc_id_of(a.0).cmp(index.doc_id_of(b.0)))
        });
        scored.truncate(self.k);
        let entries = scored
            .into_iter()
            .map(|(doc, score)| ScoredDoc {
                doc_id: index.doc_id_of(doc).to_string(),
                score,
            })
            .collect();
        Ok(RankedList::new(entries, self.k))
    }
}

/// FNV-1a; a stable hash so seeded vectors never depend on the platform
/// or std's hasher.
pub fn stable_hash64(s: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in s.as_bytes() {
        hash ^= *byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn term_vector(term: &str, seed: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(stable_hash64(term) ^ seed);
    let raw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    normalize(raw).unwrap_or_else(|| {
        let mut v = vec![0.0; dim];
        v[0] = 1.0;
        v
    })
}

fn normalize(v: Vec<f64>) -> Option<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        Some(v.into_iter().map(|x| x / norm).collect())
    } else {
        None
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
