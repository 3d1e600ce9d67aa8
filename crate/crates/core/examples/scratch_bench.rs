use equery_core::explainer::{bfs_explain, evaluate_state, SearchConfig};
use equery_core::retrieval::{retrieve_topk, Bm25Params};
use equery_core::synth::{generate, SynthConfig};
use equery_core::TermSet;

fn terms(words: &[&str]) -> TermSet { words.iter().map(|s| s.to_string()).collect() }

fn main() {
    let cfg = SynthConfig::default();
    let bench = generate(&cfg).unwrap();
    let bm25 = Bm25Params::default();
    let scfg = SearchConfig { max_states: Some(5000), ..SearchConfig::default() };
    let hidden = bench.hidden_queries.as_ref().unwrap();
    let h = &hidden["Q019"]; // {gigrinot, lobrir}
    println!("hidden: {:?}", h);
    let target = retrieve_topk(h, &bench.index, &bm25, 10);
    println!("target: {:?}", target.doc_ids().collect::<Vec<_>>());

    for state in [terms(&["gigrinot"]), terms(&["lobrir"]), terms(&["gigrinot","lobrir"])] {
        let s = evaluate_state(&state, &target, &bench.index, &bm25, &scfg);
        let got = retrieve_topk(&state, &bench.index, &bm25, 10);
        println!("state {:?} -> {:.6} (retrieved {:?})", state, s, got.doc_ids().collect::<Vec<_>>());
    }

    let topic = bench.topics.iter().find(|t| t.qid == "Q019").unwrap();
    println!("visible query: {:?}", topic.query_terms);
    let ranker = bench.make_ranker(&bench.index).unwrap();
    use equery_core::blackbox::BlackBoxRanker;
    let bb = ranker.rank("Q019", &topic.query_terms, &bench.index).unwrap();
    println!("blackbox list: {:?}", bb.doc_ids().collect::<Vec<_>>());
    let r = bfs_explain("Q019", &topic.query_terms, ranker.as_ref(), &bench.index, &bm25, &scfg).unwrap();
    println!("bfs: rbo={:.4} eq={:?} states={} {:?}", r.fidelity.rbo, r.equivalent_query, r.states_evaluated, r.terminated_by);
    println!("trace: {:?}", r.best_score_trace);
}
