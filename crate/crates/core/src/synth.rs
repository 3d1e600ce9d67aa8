//! Seeded synthetic benchmarks: a clustered pseudo-word corpus plus
//! topics whose black box is either a hidden-query oracle or the
//! hashed-embedding ranker, with graded qrels derived from the black
//! box's own top-k.
//!
//! Every generated word is a fixed point of the analysis pipeline
//! (stemming it changes nothing, and it is not a stopword), so raw text,
//! index vocabulary and query terms line up exactly. Documents draw most
//! tokens from one topical cluster and the rest from a shared background
//! pool, which gives the rankers non-trivial structure to disagree over.

use crate::analysis::Analyzer;
use crate::blackbox::{hashed_embedding_ranker, BlackBoxRanker, HiddenOracleSet};
use crate::error::{Error, Result};
use crate::evaluation::Qrels;
use crate::index::InvertedIndex;
use crate::overlap::rbo_at_k;
use crate::retrieval::{retrieve_topk, Bm25Params, RankedList};
use crate::TermSet;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum SynthRanker {
    /// Per-topic hidden BM25 queries; goal states exist by construction.
    Hidden,
    /// The hashed-embedding cosine ranker.
    Hashed { dim: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub num_docs: usize,
    pub num_topics: usize,
    pub vocab_size: usize,
    pub num_clusters: usize,
    pub doc_len: (usize, usize),
    pub k: usize,
    pub ranker: SynthRanker,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            num_docs: 1000,
            num_topics: 25,
            vocab_size: 1200,
            num_clusters: 25,
            doc_len: (25, 50),
            k: 10,
            ranker: SynthRanker::Hidden,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthTopic {
    pub qid: String,
    pub query_text: String,
    pub query_terms: TermSet,
}

pub struct SynthBench {
    pub config: SynthConfig,
    pub corpus: Vec<(String, String)>,
    pub index: InvertedIndex,
    pub topics: Vec<SynthTopic>,
    /// Per-topic hidden queries when the ranker is the oracle.
    pub hidden_queries: Option<BTreeMap<String, TermSet>>,
    pub qrels: Vec<(String, String, u32)>,
}

impl SynthBench {
    /// Reconstruct the benchmark's black box over an index.
    pub fn make_ranker(&self, index: &InvertedIndex) -> Result<Box<dyn BlackBoxRanker>> {
        make_ranker(&self.config, self.hidden_queries.as_ref(), index)
    }

    pub fn qrels(&self) -> Qrels {
        let mut qrels = Qrels::default();
        for (qid, doc, grade) in &self.qrels {
            qrels.insert(qid, doc, *grade).expect("generator emits unique pairs");
        }
        qrels
    }
}

pub fn make_ranker(
    config: &SynthConfig,
    hidden_queries: Option<&BTreeMap<String, TermSet>>,
    index: &InvertedIndex,
) -> Result<Box<dyn BlackBoxRanker>> {
    match config.ranker {
        SynthRanker::Hidden => {
            let queries = hidden_queries
                .ok_or_else(|| Error::InvalidConfig("hidden ranker needs hidden queries".into()))?;
            Ok(Box::new(HiddenOracleSet::new(
                queries.clone(),
                Bm25Params::default(),
                config.k,
            )))
        }
        SynthRanker::Hashed { dim, seed } => {
            Ok(Box::new(hashed_embedding_ranker(dim, seed, index, config.k)?))
        }
    }
}

/// Grade bands over the black box's top-k: ranks 1-2 get 3, 3-5 get 2,
/// the rest get 1.
pub fn banded_qrels(qid: &str, target: &RankedList) -> Vec<(String, String, u32)> {
    target
        .doc_ids()
        .enumerate()
        .map(|(i, doc)| {
            let grade = match i {
                0 | 1 => 3,
                2..=4 => 2,
                _ => 1,
            };
            (qid.to_string(), doc.to_string(), grade)
        })
        .collect()
}

pub fn generate(config: &SynthConfig) -> Result<SynthBench> {
    if config.num_clusters == 0 || config.vocab_size < 8 * config.num_clusters {
        return Err(Error::InvalidConfig(
            "vocab_size must be at least 8 terms per cluster".into(),
        ));
    }
    if config.doc_len.0 == 0 || config.doc_len.0 > config.doc_len.1 {
        return Err(Error::InvalidConfig("bad doc_len range".into()));
    }
    let analyzer = Analyzer::english();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let vocab = make_vocabulary(config.vocab_size, &analyzer, &mut rng);

    // A shared background pool plus per-cluster pools.
    let background_size = (config.vocab_size / 6).max(1);
    let background: Vec<String> = vocab[..background_size].to_vec();
    let cluster_words: Vec<Vec<String>> = vocab[background_size..]
        .chunks((config.vocab_size - background_size) / config.num_clusters)
        .take(config.num_clusters)
        .map(|c| c.to_vec())
        .collect();

    let mut corpus = Vec::with_capacity(config.num_docs);
    for i in 0..config.num_docs {
        let cluster = &cluster_words[i % config.num_clusters];
        let len = rng.gen_range(config.doc_len.0..=config.doc_len.1);
        let mut tokens = Vec::with_capacity(len);
        for _ in 0..len {
            // Cluster terms uniformly, background with a mild skew; a
            // near-universal cluster term would retrieve nothing specific
            // and make its topics degenerate.
            if rng.gen_bool(0.7) {
                tokens.push(cluster.choose(&mut rng).expect("cluster nonempty").clone());
            } else {
                tokens.push(skewed_choice(&background, &mut rng).clone());
            }
        }
        corpus.push((format!("D{i:05}"), tokens.join(" ")));
    }
    let index = InvertedIndex::build(corpus.iter().cloned(), &analyzer)?;

    let mut topics = Vec::with_capacity(config.num_topics);
    let mut hidden_queries: BTreeMap<String, TermSet> = BTreeMap::new();
    let mut qrels = Vec::new();

    for t in 0..config.num_topics {
        let qid = format!("Q{:03}", t + 1);
        let cluster = &cluster_words[t % config.num_clusters];
        let eligible: Vec<&String> = cluster
            .iter()
            .filter(|w| {
                let df = index.document_frequency(w);
                df >= 3 && df <= config.num_docs / 4
            })
            .collect();
        if eligible.len() < 4 {
            return Err(Error::InvalidConfig(format!(
                "cluster {} has too few retrievable terms; adjust the generator config",
                t % config.num_clusters
            )));
        }

        match config.ranker {
            SynthRanker::Hidden => {
                let (visible, hidden, target) =
                    sample_hidden_topic(&eligible, &index, config, &mut rng)?;
                qrels.extend(banded_qrels(&qid, &target));
                topics.push(SynthTopic {
                    qid: qid.clone(),
                    query_text: visible.iter().cloned().collect::<Vec<_>>().join(" "),
                    query_terms: visible,
                });
                hidden_queries.insert(qid, hidden);
            }
            SynthRanker::Hashed { dim, seed } => {
                let ranker = hashed_embedding_ranker(dim, seed, &index, config.k)?;
                let n_query = rng.gen_range(2..=3);
                let query: TermSet = sample_distinct(&eligible, n_query, &mut rng);
                let target = ranker.rank(&qid, &query, &index)?;
                if target.len() < config.k {
                    return Err(Error::InvalidConfig(
                        "hashed ranker returned a short list; corpus too small for k".into(),
                    ));
                }
                qrels.extend(banded_qrels(&qid, &target));
                topics.push(SynthTopic {
                    qid,
                    query_text: query.iter().cloned().collect::<Vec<_>>().join(" "),
                    query_terms: query,
                });
            }
        }
    }

    Ok(SynthBench {
        config: *config,
        corpus,
        index,
        topics,
        hidden_queries: match config.ranker {
            SynthRanker::Hidden => Some(hidden_queries),
            SynthRanker::Hashed { .. } => None,
        },
        qrels,
    })
}

/// Sample a hidden-oracle topic: 1-2 visible query terms extended by 1-2
/// hidden expansion terms, accepted only if the oracle's full top-k is
/// retrievable, every hidden term occurs in it (the goal state lies
/// inside the candidate vocabulary), and the visible query alone does
/// not already reproduce the list.
fn sample_hidden_topic(
    eligible: &[&String],
    index: &InvertedIndex,
    config: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(TermSet, TermSet, RankedList)> {
    let params = Bm25Params::default();
    for _ in 0..500 {
        let n_visible = rng.gen_range(1..=2);
        let n_extra = rng.gen_range(1..=2);
        let picked: TermSet = sample_distinct(eligible, n_visible + n_extra, rng);
        if picked.len() < n_visible + n_extra {
            continue;
        }
        let mut iter = picked.iter().cloned();
        let visible: TermSet = iter.by_ref().take(n_visible).collect();
        let hidden: TermSet = picked.clone();
        let target = retrieve_topk(&hidden, index, &params, config.k);
        if target.len() < config.k {
            continue;
        }
        let docs: Vec<String> = target.doc_ids().map(str::to_string).collect();
        let vocab = index.vocabulary_of(&docs)?;
        if !hidden.iter().all(|t| vocab.contains(t)) {
            continue;
        }
        let visible_list = retrieve_topk(&visible, index, &params, config.k);
        if rbo_at_k(&visible_list, &target, config.k, 0.9) > 0.999 {
            continue;
        }
        return Ok((visible, hidden, target));
    }
    Err(Error::InvalidConfig(
        "could not sample a valid hidden topic; adjust the generator config".into(),
    ))
}

fn sample_distinct(pool: &[&String], n: usize, rng: &mut ChaCha8Rng) -> TermSet {
    let mut set = TermSet::new();
    let mut attempts = 0;
    while set.len() < n && attempts < 50 * n {
        attempts += 1;
        set.insert((*pool.choose(rng).expect("pool nonempty")).clone());
    }
    set
}

/// Weighted pick with weights 1/sqrt(rank+1) over the pool order, a
/// light skew so term frequencies vary without starving any term.
fn skewed_choice<'a>(pool: &'a [String], rng: &mut ChaCha8Rng) -> &'a String {
    let total: f64 = (0..pool.len()).map(|r| 1.0 / ((r + 1) as f64).sqrt()).sum();
    let mut draw = rng.gen_range(0.0..total);
    for (r, word) in pool.iter().enumerate() {
        let w = 1.0 / ((r + 1) as f64).sqrt();
        if draw < w {
            return word;
        }
        draw -= w;
    }
    pool.last().expect("pool nonempty")
}

/// Pronounceable pseudo-words that survive the analyzer unchanged.
fn make_vocabulary(size: usize, analyzer: &Analyzer, rng: &mut ChaCha8Rng) -> Vec<String> {
    const ONSETS: &[&str] = &[
        "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "t", "v", "z", "br", "dr", "gr", "kl",
        "pr", "tr", "st",
    ];
    const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
    const CODAS: &[&str] = &["", "k", "l", "m", "n", "r", "t"];
    let mut vocab = Vec::with_capacity(size);
    let mut seen = std::collections::HashSet::new();
    while vocab.len() < size {
        let syllables = rng.gen_range(2..=3);
        let mut word = String::new();
        for _ in 0..syllables {
            word.push_str(ONSETS.choose(rng).unwrap());
            word.push_str(VOWELS.choose(rng).unwrap());
        }
        word.push_str(CODAS.choose(rng).unwrap());
        if word.len() < 4 || !seen.insert(word.clone()) {
            continue;
        }
        // Keep only analyzer fixed points.
        if analyzer.tokenize(&word) == vec![word.clone()] {
            vocab.push(word);
        }
    }
    vocab
}

pub fn write_corpus_jsonl(path: impl AsRef<Path>, corpus: &[(String, String)]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (doc_id, text) in corpus {
        let line = serde_json::json!({ "doc_id": doc_id, "text": text });
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn write_topics_tsv(path: impl AsRef<Path>, topics: &[SynthTopic]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for topic in topics {
        writeln!(w, "{}\t{}", topic.qid, topic.query_text)?;
    }
    Ok(())
}

pub fn write_hidden_json(
    path: impl AsRef<Path>,
    hidden: &BTreeMap<String, TermSet>,
) -> Result<()> {
    let as_lists: BTreeMap<&String, Vec<&String>> = hidden
        .iter()
        .map(|(qid, terms)| (qid, terms.iter().collect()))
        .collect();
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &as_lists)?;
    writeln!(w)?;
    Ok(())
}

pub fn write_qrels(path: impl AsRef<Path>, qrels: &[(String, String, u32)]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (qid, doc, grade) in qrels {
        writeln!(w, "{qid} 0 {doc} {grade}")?;
    }
    Ok(())
}
