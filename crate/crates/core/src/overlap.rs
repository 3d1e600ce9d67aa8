//! Overlap between two top-k ranked lists: set-based Jaccard and a
//! normalized, truncated rank-biased overlap.
//!
//! RBO here is the truncated form
//!
//! ```text
//! RBO(a, b) = sum_{d=1..D} p^(d-1) * A_d  /  sum_{d=1..D} p^(d-1)
//! A_d = |prefix_d(a) n prefix_d(b)| / d
//! D   = min(k, max(|a|, |b|))
//! ```
//!
//! so identical lists score exactly 1 at any length, which the search
//! relies on as its goal condition. Positions past the end of a shorter
//! list count as non-matching. This is an upper-biased variant relative
//! to extrapolated RBO; values are comparable within this tool, not with
//! implementations using other conventions. Two empty lists score 0, not
//! 1: an empty approximation must never look like a goal state.

use crate::retrieval::RankedList;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Which overlap measure drives the search objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapMetric {
    Rbo,
    Jaccard,
}

/// Fidelity of an approximation list against a reference list at depth k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityScore {
    pub jaccard: f64,
    pub rbo: f64,
    pub k: usize,
}

/// |top_k(a) n top_k(b)| / |top_k(a) u top_k(b)|; 0 when both are empty.
pub fn jaccard_at_k(a: &RankedList, b: &RankedList, k: usize) -> f64 {
    let set_a: HashSet<&str> = a.doc_ids().take(k).collect();
    let set_b: HashSet<&str> = b.doc_ids().take(k).collect();
    let union = set_a.union(&set_b).count();
    if union == 0 {
        return 0.0;
    }
    let inter = set_a.intersection(&set_b).count();
    inter as f64 / union as f64
}

/// Normalized truncated RBO with persistence `p`, evaluated at depth k.
pub fn rbo_at_k(a: &RankedList, b: &RankedList, k: usize, p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0, "persistence must be in (0,1)");
    let ids_a: Vec<&str> = a.doc_ids().take(k).collect();
    let ids_b: Vec<&str> = b.doc_ids().take(k).collect();
    let depth = ids_a.len().max(ids_b.len());
    if depth == 0 {
        return 0.0;
    }
    let mut seen_a: HashSet<&str> = HashSet::new();
    let mut seen_b: HashSet<&str> = HashSet::new();
    let mut overlap = 0usize;
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    let mut weight = 1.0; // p^(d-1)
    for d in 1..=depth {
        match (ids_a.get(d - 1), ids_b.get(d - 1)) {
            (Some(&x), Some(&y)) if x == y => {
                overlap += 1;
                seen_a.insert(x);
                seen_b.insert(y);
            }
            (x, y) => {
                if let Some(&x) = x {
                    if seen_b.contains(x) {
                        overlap += 1;
                    }
                    seen_a.insert(x);
                }
                if let Some(&y) = y {
                    if seen_a.contains(y) {
                        overlap += 1;
                    }
                    seen_b.insert(y);
                }
            }
        }
        let agreement = overlap as f64 / d as f64;
        numerator += weight * agreement;
        denominator += weight;
        weight *= p;
    }
    numerator / denominator
}

pub fn fidelity(approx: &RankedList, reference: &RankedList, k: usize, p: f64) -> FidelityScore {
    FidelityScore {
        jaccard: jaccard_at_k(approx, reference, k),
        rbo: rbo_at_k(approx, reference, k, p),
        k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::ScoredDoc;
    use approx::assert_abs_diff_eq;

    fn list(ids: &[&str]) -> RankedList {
        let n = ids.len();
        RankedList::new(
            ids.iter()
                .enumerate()
                .map(|(i, id)| ScoredDoc {
                    doc_id: id.to_string(),
                    score: (n - i) as f64,
                })
                .collect(),
            n.max(1),
        )
    }

    #[test]
    fn jaccard_identical_disjoint_partial() {
        let ten: Vec<String> = (0..10).map(|i| format!("d{i}")).collect();
        let ten_refs: Vec<&str> = ten.iter().map(|s| s.as_str()).collect();
        let a = list(&ten_refs);
        assert_eq!(jaccard_at_k(&a, &a, 10), 1.0);

        let b = list(&["x1", "x2", "x3"]);
        assert_eq!(jaccard_at_k(&a, &b, 10), 0.0);

        // Two size-10 lists sharing 5 docs: 5 / 15.
        let c_ids: Vec<String> = (5..15).map(|i| format!("d{i}")).collect();
        let c_refs: Vec<&str> = c_ids.iter().map(|s| s.as_str()).collect();
        let c = list(&c_refs);
        assert_abs_diff_eq!(jaccard_at_k(&a, &c, 10), 5.0 / 15.0, epsilon = 1e-12);
    }

    #[test]
    fn jaccard_both_empty_is_zero() {
        let e = RankedList::empty(10);
        assert_eq!(jaccard_at_k(&e, &e, 10), 0.0);
    }

    #[test]
    fn rbo_identical_is_exactly_one() {
        let a = list(&["a", "b", "c"]);
        assert_eq!(rbo_at_k(&a, &a, 10, 0.9), 1.0);
        let single = list(&["a"]);
        assert_eq!(rbo_at_k(&single, &single, 10, 0.9), 1.0);
    }

    #[test]
    fn rbo_adjacent_swap_hand_value() {
        // A = (1, 0.5, 1); (1 + 0.9*0.5 + 0.81*1) / (1 + 0.9 + 0.81).
        let a = list(&["a", "b", "c"]);
        let b = list(&["a", "c", "b"]);
        assert_abs_diff_eq!(rbo_at_k(&a, &b, 3, 0.9), 2.26 / 2.71, epsilon = 1e-12);
        assert_abs_diff_eq!(rbo_at_k(&a, &b, 3, 0.9), 0.8339, epsilon = 1e-4);
    }

    #[test]
    fn rbo_disjoint_and_empty() {
        let a = list(&["a", "b", "c"]);
        let b = list(&["x", "y", "z"]);
        assert_eq!(rbo_at_k(&a, &b, 3, 0.9), 0.0);
        let e = RankedList::empty(10);
        assert_eq!(rbo_at_k(&e, &e, 10, 0.9), 0.0);
        assert_eq!(rbo_at_k(&a, &e, 10, 0.9), 0.0);
    }

    #[test]
    fn rank_sensitivity_vs_jaccard() {
        let a = list(&["a", "b", "c", "d"]);
        let b = list(&["b", "a", "c", "d"]);
        assert_eq!(jaccard_at_k(&a, &b, 4), 1.0);
        assert!(rbo_at_k(&a, &b, 4, 0.9) < 1.0);
    }

    #[test]
    fn symmetry() {
        let a = list(&["a", "b", "c", "d"]);
        let b = list(&["c", "a", "x"]);
        assert_eq!(rbo_at_k(&a, &b, 4, 0.9), rbo_at_k(&b, &a, 4, 0.9));
        assert_eq!(jaccard_at_k(&a, &b, 4), jaccard_at_k(&b, &a, 4));
    }

    #[test]
    fn uneven_lengths_count_missing_as_nonmatching() {
        // [x] vs [x, y]: depth 2, A = (1, 0.5).
        let a = list(&["x"]);
        let b = list(&["x", "y"]);
        let expect = (1.0 + 0.9 * 0.5) / (1.0 + 0.9);
        assert_abs_diff_eq!(rbo_at_k(&a, &b, 10, 0.9), expect, epsilon = 1e-12);
    }
}
