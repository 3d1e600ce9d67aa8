//! IR effectiveness metrics (MAP with binarized relevance, nDCG@k), TREC
//! qrels loading, per-query reporting, and small significance-test
//! helpers.
//!
//! MAP binarizes graded judgments at `binarize_at` (2 by default, the
//! TREC-DL convention) with the denominator counting all relevant
//! documents in the qrels, retrieved or not. nDCG uses the linear gain
//! grade / log2(rank+1). Queries without relevant (resp. judged)
//! documents are excluded from the corresponding mean with a warning
//! rather than zero-filled.

use crate::blackbox::BlackBoxRanker;
use crate::error::{Error, Result};
use crate::explainer::{ExplanationRecord, SearchConfig};
use crate::index::InvertedIndex;
use crate::overlap::fidelity;
use crate::retrieval::{retrieve_topk, Bm25Params, RankedList};
use crate::rm3::{rm3_baseline_query, Rm3Config};
use crate::TermSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Graded relevance judgments: qid -> doc_id -> grade.
#[derive(Debug, Clone, Default)]
pub struct Qrels {
    grades: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn grade(&self, qid: &str, doc_id: &str) -> u32 {
        self.grades
            .get(qid)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn judged(&self, qid: &str) -> Option<&BTreeMap<String, u32>> {
        self.grades.get(qid)
    }

    pub fn insert(&mut self, qid: &str, doc_id: &str, grade: u32) -> Result<()> {
        let per_query = self.grades.entry(qid.to_string()).or_default();
        if per_query.insert(doc_id.to_string(), grade).is_some() {
            return Err(Error::DuplicateEntry {
                qid: qid.to_string(),
                doc_id: doc_id.to_string(),
            });
        }
        Ok(())
    }

    pub fn relevant_count(&self, qid: &str, binarize_at: u32) -> usize {
        self.grades
            .get(qid)
            .map_or(0, |m| m.values().filter(|&&g| g >= binarize_at).count())
    }
}

/// Load TREC qrels: `qid 0 docid grade`, whitespace separated.
pub fn load_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut qrels = Qrels::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::MalformedLine {
            path: path.display().to_string(),
            line: lineno + 1,
            reason,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(malformed(format!("expected 4 fields, found {}", fields.len())));
        }
        let grade: u32 = fields[3]
            .parse()
            .map_err(|_| malformed(format!("bad grade {:?}", fields[3])))?;
        qrels.insert(fields[0], fields[2], grade)?;
    }
    Ok(qrels)
}

/// Average precision over the full ranked list, relevance binarized at
/// `binarize_at`. `None` when the query has no relevant documents (it is
/// excluded from MAP, matching trec_eval).
pub fn average_precision(
    ranked: &RankedList,
    qrels: &Qrels,
    qid: &str,
    binarize_at: u32,
) -> Option<f64> {
    let total_relevant = qrels.relevant_count(qid, binarize_at);
    if total_relevant == 0 {
        log::warn!("query {qid}: no documents with grade >= {binarize_at}; excluded from MAP");
        return None;
    }
    let mut hits = 0usize;
    let mut precision_sum = 0.0;
    for (i, doc_id) in ranked.doc_ids().enumerate() {
        if qrels.grade(qid, doc_id) >= binarize_at {
            hits += 1;
            precision_sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(precision_sum / total_relevant as f64)
}

/// nDCG at cutoff k with linear gain. `None` when the query has no judged
/// document with a positive grade (zero ideal DCG).
pub fn ndcg_at_k(ranked: &RankedList, qrels: &Qrels, qid: &str, k: usize) -> Option<f64> {
    let mut ideal: Vec<u32> = qrels
        .judged(qid)
        .map(|m| m.values().copied().filter(|&g| g > 0).collect())
        .unwrap_or_default();
    if ideal.is_empty() {
        log::warn!("query {qid}: no positively judged documents; excluded from nDCG");
        return None;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| g as f64 / ((i + 2) as f64).log2())
        .sum();
    let dcg: f64 = ranked
        .doc_ids()
        .take(k)
        .enumerate()
        .map(|(i, doc_id)| qrels.grade(qid, doc_id) as f64 / ((i + 2) as f64).log2())
        .sum();
    Some(dcg / idcg)
}

/// Per-query metrics of one system.
#[derive(Debug, Clone, Serialize)]
pub struct SystemRow {
    pub jaccard: Option<f64>,
    pub rbo: Option<f64>,
    pub map: Option<f64>,
    pub ndcg10: Option<f64>,
}

/// Metric means of one system over the evaluated query set.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SystemMeans {
    pub jaccard: Option<f64>,
    pub rbo: Option<f64>,
    pub map: Option<f64>,
    pub ndcg10: Option<f64>,
}

/// One row of the approximation report.
#[derive(Debug, Clone, Serialize)]
pub struct QueryRow {
    pub qid: String,
    pub equivalent_query: Vec<String>,
    pub jaccard: f64,
    pub rbo: f64,
    pub map: Option<f64>,
    pub ndcg10: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReferenceSystem {
    pub per_query: BTreeMap<String, SystemRow>,
    pub mean: SystemMeans,
}

/// The full evaluation report: approximation rows sorted by RBO
/// descending plus means, with reference systems alongside.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub method: String,
    pub k: usize,
    /// Approximation rows, sorted by rbo descending.
    pub rows: Vec<QueryRow>,
    pub mean: SystemMeans,
    /// BM25 on the original query.
    pub bm25: ReferenceSystem,
    /// RM3-expanded BM25 (model-agnostic baseline).
    pub rm3: ReferenceSystem,
    /// The black box's own list.
    pub blackbox: ReferenceSystem,
    /// Topics present in the inputs but lacking an explanation; excluded
    /// from all means.
    pub missing_explanations: Vec<String>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let kept: Vec<f64> = values.flatten().collect();
    if kept.is_empty() {
        None
    } else {
        Some(kept.iter().sum::<f64>() / kept.len() as f64)
    }
}

fn csv_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl EvalReport {
    /// CSV with one row per query plus a MEAN row; rbo non-increasing.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "qid,jaccard,rbo,map,ndcg10,equivalent_query")?;
        for row in &self.rows {
            writeln!(
                w,
                "{},{:.6},{:.6},{},{},{}",
                row.qid,
                row.jaccard,
                row.rbo,
                csv_cell(row.map),
                csv_cell(row.ndcg10),
                row.equivalent_query.join(" ")
            )?;
        }
        writeln!(
            w,
            "MEAN,{},{},{},{},",
            csv_cell(self.mean.jaccard),
            csv_cell(self.mean.rbo),
            csv_cell(self.mean.map),
            csv_cell(self.mean.ndcg10)
        )?;
        Ok(())
    }
}

/// Everything `build_report` consumes, keyed consistently by qid.
pub struct ReportInputs<'a> {
    /// qid -> original query terms.
    pub queries: &'a BTreeMap<String, TermSet>,
    /// qid -> the black box's (truncated) top-k list.
    pub blackbox_lists: &'a BTreeMap<String, RankedList>,
    /// qid -> the explanation produced for that query.
    pub explanations: &'a BTreeMap<String, ExplanationRecord>,
    pub index: &'a InvertedIndex,
    pub qrels: Option<&'a Qrels>,
    pub bm25: &'a Bm25Params,
    pub cfg: &'a SearchConfig,
    pub rm3: &'a Rm3Config,
    /// Retrieval depth for MAP runs.
    pub metric_depth: usize,
    pub method: String,
}

/// Assemble the per-query report: the approximation (BM25 on the
/// equivalent query) next to BM25(Q), RM3-expanded BM25 and the black
/// box itself.
pub fn build_report(inputs: &ReportInputs<'_>) -> Result<EvalReport> {
    let ReportInputs {
        queries,
        blackbox_lists,
        explanations,
        index,
        qrels,
        bm25,
        cfg,
        rm3,
        metric_depth,
        method,
    } = inputs;

    let binarize_at = 2;
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    let mut bm25_rows = BTreeMap::new();
    let mut rm3_rows = BTreeMap::new();
    let mut blackbox_rows = BTreeMap::new();

    for (qid, query_terms) in queries.iter() {
        let target = blackbox_lists
            .get(qid)
            .ok_or_else(|| Error::UnknownQueryId(qid.clone()))?;

        let ir = |list: &RankedList| -> (Option<f64>, Option<f64>) {
            match qrels {
                Some(qrels) => (
                    average_precision(list, qrels, qid, binarize_at),
                    ndcg_at_k(list, qrels, qid, 10),
                ),
                None => (None, None),
            }
        };

        // Reference: BM25 on the original query.
        let bm25_run = retrieve_topk(query_terms, index, bm25, *metric_depth);
        let bm25_fid = fidelity(&bm25_run.truncated(cfg.k), target, cfg.k, cfg.rbo_p);
        let (bm25_map, bm25_ndcg) = ir(&bm25_run);
        bm25_rows.insert(
            qid.clone(),
            SystemRow {
                jaccard: Some(bm25_fid.jaccard),
                rbo: Some(bm25_fid.rbo),
                map: bm25_map,
                ndcg10: bm25_ndcg,
            },
        );

        // Reference: RM3-expanded BM25.
        let expanded = rm3_baseline_query(query_terms, index, bm25, rm3, cfg.k)?;
        let rm3_run = retrieve_topk(&expanded, index, bm25, *metric_depth);
        let rm3_fid = fidelity(&rm3_run.truncated(cfg.k), target, cfg.k, cfg.rbo_p);
        let (rm3_map, rm3_ndcg) = ir(&rm3_run);
        rm3_rows.insert(
            qid.clone(),
            SystemRow {
                jaccard: Some(rm3_fid.jaccard),
                rbo: Some(rm3_fid.rbo),
                map: rm3_map,
                ndcg10: rm3_ndcg,
            },
        );

        // Reference: the black box's own list.
        let (bb_map, bb_ndcg) = ir(target);
        blackbox_rows.insert(
            qid.clone(),
            SystemRow {
                jaccard: Some(1.0),
                rbo: Some(1.0),
                map: bb_map,
                ndcg10: bb_ndcg,
            },
        );

        // The approximation.
        match explanations.get(qid) {
            Some(explanation) => {
                let equivalent: TermSet = explanation.equivalent_query.iter().cloned().collect();
                let approx_run = retrieve_topk(&equivalent, index, bm25, *metric_depth);
                let (map, ndcg10) = ir(&approx_run);
                rows.push(QueryRow {
                    qid: qid.clone(),
                    equivalent_query: explanation.equivalent_query.clone(),
                    jaccard: explanation.jaccard,
                    rbo: explanation.rbo,
                    map,
                    ndcg10,
                });
            }
            None => {
                log::warn!("query {qid}: no explanation; excluded from means");
                missing.push(qid.clone());
            }
        }
    }

    rows.sort_by(|a, b| b.rbo.total_cmp(&a.rbo).then_with(|| a.qid.cmp(&b.qid)));
    let mean = SystemMeans {
        jaccard: mean_of(rows.iter().map(|r| Some(r.jaccard))),
        rbo: mean_of(rows.iter().map(|r| Some(r.rbo))),
        map: mean_of(rows.iter().map(|r| r.map)),
        ndcg10: mean_of(rows.iter().map(|r| r.ndcg10)),
    };

    let summarize = |per_query: BTreeMap<String, SystemRow>| {
        let mean = SystemMeans {
            jaccard: mean_of(per_query.values().map(|r| r.jaccard)),
            rbo: mean_of(per_query.values().map(|r| r.rbo)),
            map: mean_of(per_query.values().map(|r| r.map)),
            ndcg10: mean_of(per_query.values().map(|r| r.ndcg10)),
        };
        ReferenceSystem { per_query, mean }
    };

    Ok(EvalReport {
        method: method.clone(),
        k: cfg.k,
        rows,
        mean,
        bm25: summarize(bm25_rows),
        rm3: summarize(rm3_rows),
        blackbox: summarize(blackbox_rows),
        missing_explanations: missing,
    })
}

/// Resolve each topic's black-box list once, truncated to k.
pub fn collect_blackbox_lists(
    topics: &[(String, TermSet)],
    blackbox: &dyn BlackBoxRanker,
    index: &InvertedIndex,
    k: usize,
) -> Result<BTreeMap<String, RankedList>> {
    let mut lists = BTreeMap::new();
    for (qid, terms) in topics {
        let list = blackbox.rank(qid, terms, index)?.truncated(k);
        lists.insert(qid.clone(), list);
    }
    Ok(lists)
}

/// Result of a one-sided paired sign test for "a beats b".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
    /// P(X >= wins_a) under Binomial(wins_a + wins_b, 1/2).
    pub p_value: f64,
}

/// Paired sign test; ties are discarded.
pub fn paired_sign_test(a: &[f64], b: &[f64]) -> SignTest {
    assert_eq!(a.len(), b.len(), "sign test needs paired samples");
    let mut wins_a = 0;
    let mut wins_b = 0;
    let mut ties = 0;
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).expect("metric values must not be NaN") {
            std::cmp::Ordering::Greater => wins_a += 1,
            std::cmp::Ordering::Less => wins_b += 1,
            std::cmp::Ordering::Equal => ties += 1,
        }
    }
    let n = wins_a + wins_b;
    SignTest {
        wins_a,
        wins_b,
        ties,
        p_value: binomial_upper_tail(n, wins_a),
    }
}

/// P(X >= s) for X ~ Binomial(n, 1/2), exact in log space.
fn binomial_upper_tail(n: usize, s: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let ln_half_n = n as f64 * 0.5f64.ln();
    let mut ln_choose = 0.0; // ln C(n, 0)
    let mut tail = 0.0;
    for i in 0..=n {
        if i >= s {
            tail += (ln_choose + ln_half_n).exp();
        }
        // C(n, i+1) = C(n, i) * (n - i) / (i + 1)
        ln_choose += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
    }
    tail.min(1.0)
}

/// Two-sided paired permutation test on the mean difference, by random
/// sign flips. Returns the p-value.
pub fn paired_permutation_test(a: &[f64], b: &[f64], iterations: usize, seed: u64) -> f64 {
    assert_eq!(a.len(), b.len(), "permutation test needs paired samples");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if diffs.is_empty() {
        return 1.0;
    }
    let observed = diffs.iter().sum::<f64>().abs() / diffs.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut at_least_as_extreme = 0usize;
    for _ in 0..iterations {
        let flipped: f64 = diffs
            .iter()
            .map(|d| if rng.gen_bool(0.5) { *d } else { -*d })
            .sum::<f64>()
            / diffs.len() as f64;
        if flipped.abs() >= observed - 1e-15 {
            at_least_as_extreme += 1;
        }
    }
    (at_least_as_extreme + 1) as f64 / (iterations + 1) as f64
}
