//! Corpus ingestion and the immutable inverted index.
//!
//! The index keeps both directions: term -> postings for retrieval, and
//! doc -> term frequencies for feedback models and candidate vocabularies.
//! Once built it is never mutated, so it can be shared freely across
//! concurrent searches.

use crate::analysis::Analyzer;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// A tokenized document. `terms` holds the retained stemmed tokens in
/// text order; the document length is the number of retained tokens.
#[derive(Debug, Clone)]
pub struct Document {
    pub doc_id: String,
    pub raw_text: String,
    pub terms: Vec<String>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, raw_text: impl Into<String>, analyzer: &Analyzer) -> Self {
        let raw_text = raw_text.into();
        let terms = analyzer.tokenize(&raw_text);
        Document {
            doc_id: doc_id.into(),
            raw_text,
            terms,
        }
    }

    pub fn length(&self) -> usize {
        self.terms.len()
    }
}

/// One posting: internal doc index plus within-document term frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug)]
pub struct InvertedIndex {
    doc_ids: Vec<String>,
    doc_lookup: HashMap<String, u32>,
    doc_lengths: Vec<u32>,
    doc_term_freqs: Vec<BTreeMap<String, u32>>,
    postings: BTreeMap<String, Vec<Posting>>,
    collection_term_counts: BTreeMap<String, u64>,
    avg_doc_length: f64,
}

impl InvertedIndex {
    /// Build from (doc_id, raw_text) pairs. Duplicate doc ids are a hard
    /// error. Documents whose text retains zero tokens are still indexed
    /// (length 0, no postings).
    pub fn build<I>(docs: I, analyzer: &Analyzer) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut builder = IndexBuilder::new();
        for (doc_id, text) in docs {
            builder.push(Document::new(doc_id, text, analyzer))?;
        }
        Ok(builder.finish())
    }

    /// Build by streaming a JSONL corpus: one `{"doc_id": ..., "text": ...}`
    /// object per line.
    pub fn build_from_jsonl(path: impl AsRef<Path>, analyzer: &Analyzer) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        let reader = BufReader::new(file);
        let mut builder = IndexBuilder::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: CorpusLine =
                serde_json::from_str(&line).map_err(|e| Error::MalformedLine {
                    path: path.display().to_string(),
                    line: lineno + 1,
                    reason: e.to_string(),
                })?;
            builder.push(Document::new(parsed.doc_id, parsed.text, analyzer))?;
        }
        Ok(builder.finish())
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn contains_doc(&self, doc_id: &str) -> bool {
        self.doc_lookup.contains_key(doc_id)
    }

    pub(crate) fn internal_id(&self, doc_id: &str) -> Option<u32> {
        self.doc_lookup.get(doc_id).copied()
    }

    pub(crate) fn doc_id_of(&self, internal: u32) -> &str {
        &self.doc_ids[internal as usize]
    }

    pub(crate) fn length_of(&self, internal: u32) -> u32 {
        self.doc_lengths[internal as usize]
    }

    pub fn doc_length(&self, doc_id: &str) -> Result<usize> {
        let id = self
            .internal_id(doc_id)
            .ok_or_else(|| Error::UnknownDocId(doc_id.to_string()))?;
        Ok(self.doc_lengths[id as usize] as usize)
    }

    pub fn postings(&self, term: &str) -> Option<&[Posting]> {
        self.postings.get(term).map(|v| v.as_slice())
    }

    /// Number of documents containing `term`.
    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, |v| v.len())
    }

    /// Total occurrences of `term` across the collection.
    pub fn collection_term_count(&self, term: &str) -> u64 {
        self.collection_term_counts.get(term).copied().unwrap_or(0)
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(|s| s.as_str())
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    /// Term frequency of `term` in the given document (0 if absent).
    pub fn term_frequency(&self, term: &str, doc_id: &str) -> Result<u32> {
        let id = self
            .internal_id(doc_id)
            .ok_or_else(|| Error::UnknownDocId(doc_id.to_string()))?;
        Ok(self.doc_term_freqs[id as usize]
            .get(term)
            .copied()
            .unwrap_or(0))
    }

    /// Per-document term frequencies, keyed by term.
    pub fn doc_terms(&self, doc_id: &str) -> Result<&BTreeMap<String, u32>> {
        let id = self
            .internal_id(doc_id)
            .ok_or_else(|| Error::UnknownDocId(doc_id.to_string()))?;
        Ok(&self.doc_term_freqs[id as usize])
    }

    /// Union of distinct terms over the given documents, lexicographically
    /// ordered. Unknown doc ids are an error: a black-box list referencing
    /// documents outside the corpus has to be surfaced, not ignored.
    pub fn vocabulary_of<S: AsRef<str>>(&self, doc_ids: &[S]) -> Result<BTreeSet<String>> {
        let mut vocab = BTreeSet::new();
        for doc_id in doc_ids {
            let terms = self.doc_terms(doc_id.as_ref())?;
            vocab.extend(terms.keys().cloned());
        }
        Ok(vocab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        let artifact = IndexArtifact {
            docs: self
                .doc_ids
                .iter()
                .zip(&self.doc_lengths)
                .map(|(id, len)| (id.clone(), *len))
                .collect(),
            postings: self.postings.clone(),
        };
        serde_json::to_writer(&mut w, &artifact)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let artifact: IndexArtifact = serde_json::from_reader(BufReader::new(file))?;
        Ok(Self::from_artifact(artifact))
    }

    fn from_artifact(artifact: IndexArtifact) -> Self {
        let doc_ids: Vec<String> = artifact.docs.iter().map(|(id, _)| id.clone()).collect();
        let doc_lengths: Vec<u32> = artifact.docs.iter().map(|(_, len)| *len).collect();
        let doc_lookup: HashMap<String, u32> = doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
        let mut doc_term_freqs = vec![BTreeMap::new(); doc_ids.len()];
        let mut collection_term_counts = BTreeMap::new();
        for (term, postings) in &artifact.postings {
            let mut total = 0u64;
            for p in postings {
                doc_term_freqs[p.doc as usize].insert(term.clone(), p.tf);
                total += p.tf as u64;
            }
            collection_term_counts.insert(term.clone(), total);
        }
        let avg_doc_length = if doc_ids.is_empty() {
            0.0
        } else {
            doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / doc_ids.len() as f64
        };
        InvertedIndex {
            doc_ids,
            doc_lookup,
            doc_lengths,
            doc_term_freqs,
            postings: artifact.postings,
            collection_term_counts,
            avg_doc_length,
        }
    }
}

#[derive(Deserialize)]
struct CorpusLine {
    doc_id: String,
    text: String,
}

/// On-disk index artifact. Only docs and postings are stored; derived
/// statistics are rebuilt on load so they can never drift.
#[derive(Serialize, Deserialize)]
struct IndexArtifact {
    docs: Vec<(String, u32)>,
    postings: BTreeMap<String, Vec<Posting>>,
}

struct IndexBuilder {
    doc_ids: Vec<String>,
    doc_lookup: HashMap<String, u32>,
    doc_lengths: Vec<u32>,
    doc_term_freqs: Vec<BTreeMap<String, u32>>,
}

impl IndexBuilder {
    fn new() -> Self {
        IndexBuilder {
            doc_ids: Vec::new(),
            doc_lookup: HashMap::new(),
            doc_lengths: Vec::new(),
            doc_term_freqs: Vec::new(),
        }
    }

    fn push(&mut self, doc: Document) -> Result<()> {
        if self.doc_lookup.contains_key(&doc.doc_id) {
            return Err(Error::DuplicateDocId(doc.doc_id));
        }
        let internal = self.doc_ids.len() as u32;
        self.doc_lookup.insert(doc.doc_id.clone(), internal);
        self.doc_ids.push(doc.doc_id);
        self.doc_lengths.push(doc.terms.len() as u32);
        let mut freqs = BTreeMap::new();
        for term in doc.terms {
            *freqs.entry(term).or_insert(0u32) += 1;
        }
        self.doc_term_freqs.push(freqs);
        Ok(())
    }

    fn finish(self) -> InvertedIndex {
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut collection_term_counts: BTreeMap<String, u64> = BTreeMap::new();
        for (internal, freqs) in self.doc_term_freqs.iter().enumerate() {
            for (term, &tf) in freqs {
                postings.entry(term.clone()).or_default().push(Posting {
                    doc: internal as u32,
                    tf,
                });
                *collection_term_counts.entry(term.clone()).or_insert(0) += tf as u64;
            }
        }
        // Posting lists ordered by doc_id string, the corpus-visible key.
        for list in postings.values_mut() {
            list.sort_by(|a, b| self.doc_ids[a.doc as usize].cmp(&self.doc_ids[b.doc as usize]));
        }
        let avg_doc_length = if self.doc_ids.is_empty() {
            0.0
        } else {
            self.doc_lengths.iter().map(|&l| l as f64).sum::<f64>() / self.doc_ids.len() as f64
        };
        InvertedIndex {
            doc_ids: self.doc_ids,
            doc_lookup: self.doc_lookup,
            doc_lengths: self.doc_lengths,
            doc_term_freqs: self.doc_term_freqs,
            postings,
            collection_term_counts,
            avg_doc_length,
        }
    }
}

/// Read a topics file: `qid<TAB>query text`, one topic per line.
pub fn read_topics_tsv(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut topics = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (qid, text) = line.split_once('\t').ok_or_else(|| Error::MalformedLine {
            path: path.display().to_string(),
            line: lineno + 1,
            reason: "expected qid<TAB>query".to_string(),
        })?;
        if !seen.insert(qid.to_string()) {
            return Err(Error::MalformedLine {
                path: path.display().to_string(),
                line: lineno + 1,
                reason: format!("duplicate qid {qid}"),
            });
        }
        topics.push((qid.to_string(), text.to_string()));
    }
    Ok(topics)
}
