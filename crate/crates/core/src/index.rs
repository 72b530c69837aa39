//! Immutable in-memory inverted index over analyzed job fields with
//! per-field corpus statistics and per-(term, field, document) BM25 scoring.
//!
//! The index is built once from a corpus snapshot and never mutated; reads
//! are safe from any number of threads.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analyzer::{
    schema_mode, AnalysisMode, AnalyzedQuery, AnalyzerConfig, JobDocument, SCHEMA,
};
use crate::error::{Error, Result};
use crate::manifest::sha256_hex;

/// BM25 shape parameters for one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    /// Term saturation; higher values let repeated occurrences keep counting.
    pub k: f64,
    /// Length normalization in [0, 1]; 0 disables the field-length penalty.
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::Config(format!(
                "bm25 k must be >= 0, got {}",
                self.k
            )));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!(
                "bm25 b must be in [0, 1], got {}",
                self.b
            )));
        }
        Ok(())
    }
}

/// Corpus statistics for one field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldStats {
    /// Documents with at least one token in this field.
    pub doc_count: u32,
    /// Mean token count over those documents.
    pub avg_field_length: f64,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct FieldData {
    /// term -> postings sorted by doc index; tf >= 1.
    pub postings: BTreeMap<String, Vec<(u32, u32)>>,
    /// doc index -> token count, only for documents containing the field.
    pub lengths: BTreeMap<u32, u32>,
    pub total_tokens: u64,
}

impl FieldData {
    fn stats(&self) -> FieldStats {
        let doc_count = self.lengths.len() as u32;
        let avg = if doc_count == 0 {
            0.0
        } else {
            self.total_tokens as f64 / doc_count as f64
        };
        FieldStats {
            doc_count,
            avg_field_length: avg,
        }
    }
}

/// Frozen inverted index over a corpus snapshot.
#[derive(Debug)]
pub struct Index {
    doc_ids: Vec<String>,
    doc_lookup: BTreeMap<String, u32>,
    pub(crate) fields: BTreeMap<String, FieldData>,
    snapshot_id: String,
    analyzer: AnalyzerConfig,
}

impl Index {
    /// Build from an in-memory document list. Doc ids must be unique and the
    /// corpus non-empty.
    pub fn build(
        docs: &[JobDocument],
        analyzer: &AnalyzerConfig,
        snapshot_id: &str,
    ) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Index("corpus is empty".into()));
        }
        let mut doc_ids = Vec::with_capacity(docs.len());
        let mut doc_lookup = BTreeMap::new();
        let mut fields: BTreeMap<String, FieldData> = SCHEMA
            .iter()
            .map(|(name, _)| (name.to_string(), FieldData::default()))
            .collect();

        for doc in docs {
            let doc_idx = doc_ids.len() as u32;
            if doc_lookup.insert(doc.id.clone(), doc_idx).is_some() {
                return Err(Error::Index(format!("duplicate doc id {:?}", doc.id)));
            }
            doc_ids.push(doc.id.clone());
            let analyzed = analyzer.analyze_document(doc)?;
            for (field_name, tokens) in analyzed {
                if tokens.is_empty() {
                    continue;
                }
                let data = fields
                    .get_mut(&field_name)
                    .expect("analyze_document only emits schema fields");
                let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
                for t in tokens.tokens() {
                    *counts.entry(t.as_str()).or_insert(0) += 1;
                }
                for (term, tf) in counts {
                    data.postings
                        .entry(term.to_string())
                        .or_default()
                        .push((doc_idx, tf));
                }
                data.lengths.insert(doc_idx, tokens.len() as u32);
                data.total_tokens += tokens.len() as u64;
            }
        }

        Ok(Index {
            doc_ids,
            doc_lookup,
            fields,
            snapshot_id: snapshot_id.to_string(),
            analyzer: analyzer.clone(),
        })
    }

    /// Reassemble a deserialized index, revalidating the internal invariants.
    pub(crate) fn from_parts(
        doc_ids: Vec<String>,
        fields: BTreeMap<String, FieldData>,
        snapshot_id: String,
        analyzer: AnalyzerConfig,
    ) -> Result<Self> {
        let mut doc_lookup = BTreeMap::new();
        for (idx, id) in doc_ids.iter().enumerate() {
            if doc_lookup.insert(id.clone(), idx as u32).is_some() {
                return Err(Error::Index(format!("duplicate doc id {id:?}")));
            }
        }
        for (name, data) in &fields {
            for (term, postings) in &data.postings {
                for (doc_idx, tf) in postings {
                    if *tf == 0 || *doc_idx as usize >= doc_ids.len() {
                        return Err(Error::Index(format!("corrupt posting for {name}/{term}")));
                    }
                    if !data.lengths.contains_key(doc_idx) {
                        return Err(Error::Index(format!(
                            "posting without field length for {name}/{term}"
                        )));
                    }
                }
            }
        }
        Ok(Index {
            doc_ids,
            doc_lookup,
            fields,
            snapshot_id,
            analyzer,
        })
    }

    /// Build from a JSON-lines corpus file; the snapshot id is the SHA-256 of
    /// the file bytes.
    pub fn build_from_corpus(path: &Path, analyzer: &AnalyzerConfig) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let snapshot_id = sha256_hex(&bytes);
        let mut docs = Vec::new();
        for (idx, line) in bytes.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: JobDocument = serde_json::from_str(&line).map_err(|e| {
                Error::Index(format!(
                    "{}:{}: unparseable record: {e}",
                    path.display(),
                    idx + 1
                ))
            })?;
            docs.push(doc);
        }
        Index::build(&docs, analyzer, &snapshot_id)
    }

    pub fn snapshot_id(&self) -> &str {
        &self.snapshot_id
    }

    /// The analyzer the corpus was indexed with; queries must use the same one.
    pub fn analyzer(&self) -> &AnalyzerConfig {
        &self.analyzer
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn contains_doc(&self, doc_id: &str) -> bool {
        self.doc_lookup.contains_key(doc_id)
    }

    pub fn field_names(&self) -> Vec<&str> {
        self.fields.keys().map(String::as_str).collect()
    }

    pub fn field_stats(&self, field: &str) -> Result<FieldStats> {
        self.fields
            .get(field)
            .map(FieldData::stats)
            .ok_or_else(|| Error::Index(format!("unknown field {field:?}")))
    }

    /// Documents whose `field` contains `term`.
    pub fn doc_freq(&self, field: &str, term: &str) -> Result<u32> {
        let data = self
            .fields
            .get(field)
            .ok_or_else(|| Error::Index(format!("unknown field {field:?}")))?;
        Ok(data.postings.get(term).map_or(0, |p| p.len() as u32))
    }

    pub fn term_frequency(&self, field: &str, term: &str, doc_id: &str) -> Result<u32> {
        let doc_idx = self.doc_index(doc_id)?;
        if !self.fields.contains_key(field) {
            return Err(Error::Index(format!("unknown field {field:?}")));
        }
        Ok(self.tf_at(field, term, doc_idx))
    }

    pub(crate) fn doc_index(&self, doc_id: &str) -> Result<u32> {
        self.doc_lookup
            .get(doc_id)
            .copied()
            .ok_or_else(|| Error::Index(format!("unknown doc {doc_id:?}")))
    }

    /// Term frequency by internal doc index; postings are sorted by doc index.
    pub(crate) fn tf_at(&self, field: &str, term: &str, doc_idx: u32) -> u32 {
        let Some(data) = self.fields.get(field) else {
            return 0;
        };
        let Some(postings) = data.postings.get(term) else {
            return 0;
        };
        match postings.binary_search_by_key(&doc_idx, |(d, _)| *d) {
            Ok(pos) => postings[pos].1,
            Err(_) => 0,
        }
    }

    /// BM25 by internal doc index; returns 0 for absent terms or unknown fields.
    pub(crate) fn bm25_at(&self, field: &str, term: &str, doc_idx: u32, params: Bm25Params) -> f64 {
        let Some(data) = self.fields.get(field) else {
            return 0.0;
        };
        let Some(postings) = data.postings.get(term) else {
            return 0.0;
        };
        let tf = match postings.binary_search_by_key(&doc_idx, |(d, _)| *d) {
            Ok(pos) => postings[pos].1 as f64,
            Err(_) => return 0.0,
        };
        let stats = data.stats();
        let df = postings.len() as f64;
        let n = stats.doc_count as f64;
        let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
        let len = *data.lengths.get(&doc_idx).expect("posting implies length") as f64;
        let norm = 1.0 - params.b + params.b * len / stats.avg_field_length;
        idf * tf * (params.k + 1.0) / (tf + params.k * norm)
    }

    /// BM25 score of `term` in `doc`'s `field`:
    /// `idf * tf * (k + 1) / (tf + k * (1 - b + b * len / avglen))`
    /// with the non-negative smoothed idf `ln(1 + (N - df + 0.5) / (df + 0.5))`.
    /// Returns 0 when the term is absent from the document's field.
    pub fn bm25(&self, field: &str, term: &str, doc_id: &str, params: Bm25Params) -> Result<f64> {
        if !self.fields.contains_key(field) {
            return Err(Error::Index(format!("unknown field {field:?}")));
        }
        let doc_idx = self.doc_index(doc_id)?;
        Ok(self.bm25_at(field, term, doc_idx, params))
    }

    /// All documents containing at least one query token in at least one of
    /// the retrieval fields (disjunctive any-token match). Raw-mode fields are
    /// matched with the raw query form, analyzed-mode fields with the
    /// analyzed form.
    pub fn match_candidates(
        &self,
        query: &AnalyzedQuery,
        retrieval_fields: &[String],
    ) -> Result<Vec<String>> {
        if query.raw.is_empty() && query.analyzed.is_empty() {
            return Err(Error::Index("query has no tokens after analysis".into()));
        }
        let mut hits: std::collections::BTreeSet<u32> = std::collections::BTreeSet::new();
        for field in retrieval_fields {
            let data = self
                .fields
                .get(field)
                .ok_or_else(|| Error::Index(format!("unknown retrieval field {field:?}")))?;
            let mode = schema_mode(field).unwrap_or(AnalysisMode::Raw);
            for term in query.for_mode(mode).dedup_tokens() {
                if let Some(postings) = data.postings.get(&term) {
                    hits.extend(postings.iter().map(|(d, _)| *d));
                }
            }
        }
        Ok(hits
            .into_iter()
            .map(|idx| self.doc_ids[idx as usize].clone())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::TokenSequence;

    fn doc(id: &str, title: &str, description: &str) -> JobDocument {
        JobDocument {
            id: id.into(),
            title: title.into(),
            description: description.into(),
            company: String::new(),
            tags: vec![],
        }
    }

    fn plain_analyzer() -> AnalyzerConfig {
        // No rewrites or stems so token counts are easy to reason about.
        AnalyzerConfig {
            rewrite_rules: vec![],
            stem_rules: vec![],
            lowercase: true,
        }
    }

    #[test]
    fn stats_match_hand_arithmetic() {
        let docs = vec![doc("a", "nurse", ""), doc("b", "nurse manager", "")];
        let index = Index::build(&docs, &plain_analyzer(), "snap").unwrap();
        let stats = index.field_stats("title").unwrap();
        assert_eq!(stats.doc_count, 2);
        assert!((stats.avg_field_length - 1.5).abs() < 1e-12);
        assert_eq!(index.doc_freq("title", "nurse").unwrap(), 2);
        assert_eq!(index.doc_freq("title", "manager").unwrap(), 1);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(Index::build(&[], &plain_analyzer(), "snap").is_err());
    }

    #[test]
    fn duplicate_doc_id_is_an_error() {
        let docs = vec![doc("a", "nurse", ""), doc("a", "clerk", "")];
        let err = Index::build(&docs, &plain_analyzer(), "snap").unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn unparseable_corpus_record_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"title\":\"Nurse\"}\nthis is not json\n",
        )
        .unwrap();
        let err = Index::build_from_corpus(&path, &plain_analyzer()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":2:") && msg.contains("unparseable"), "{msg}");
    }

    // Frozen oracle value, computed by hand before the implementation:
    //   N=3, df=1, tf=2, len=4, avglen=3, k=1.2, b=0.75
    //   idf  = ln(1 + 2.5/1.5) = ln(8/3)
    //   tfn  = 2*2.2 / (2 + 1.2*(0.25 + 0.75*4/3)) = 4.4/3.5
    //   bm25 = ln(8/3) * 44/35 = 1.2330424895004561
    #[test]
    fn bm25_matches_hand_calculation() {
        let docs = vec![
            doc("a", "x x y z", ""), // len 4, tf(x)=2
            doc("b", "p q r", ""),   // len 3
            doc("c", "s t", ""),     // len 2; avg = 3
        ];
        let index = Index::build(&docs, &plain_analyzer(), "snap").unwrap();
        let got = index
            .bm25("title", "x", "a", Bm25Params { k: 1.2, b: 0.75 })
            .unwrap();
        assert!((got - 1.2330424895004561).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn bm25_zero_when_term_absent() {
        let docs = vec![doc("a", "nurse", ""), doc("b", "clerk", "")];
        let index = Index::build(&docs, &plain_analyzer(), "snap").unwrap();
        assert_eq!(
            index
                .bm25("title", "nurse", "b", Bm25Params::default())
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn bm25_b_zero_ignores_length() {
        let docs = vec![
            doc("short", "x", ""),
            doc("long", "x a b c d e f g", ""),
            doc("other", "zz", ""),
        ];
        let index = Index::build(&docs, &plain_analyzer(), "snap").unwrap();
        let p = Bm25Params { k: 1.2, b: 0.0 };
        let short = index.bm25("title", "x", "short", p).unwrap();
        let long = index.bm25("title", "x", "long", p).unwrap();
        assert!((short - long).abs() < 1e-15);
    }

    #[test]
    fn bm25_unknown_field_or_doc_errors() {
        let docs = vec![doc("a", "nurse", "")];
        let index = Index::build(&docs, &plain_analyzer(), "snap").unwrap();
        assert!(index
            .bm25("bogus", "nurse", "a", Bm25Params::default())
            .is_err());
        assert!(index
            .bm25("title", "nurse", "zz", Bm25Params::default())
            .is_err());
    }

    fn query(raw: &[&str], analyzed: &[&str]) -> AnalyzedQuery {
        AnalyzedQuery {
            raw: TokenSequence(raw.iter().map(|s| s.to_string()).collect()),
            analyzed: TokenSequence(analyzed.iter().map(|s| s.to_string()).collect()),
        }
    }

    #[test]
    fn match_candidates_single_and_none() {
        let docs = vec![doc("a", "nurse", ""), doc("b", "clerk", "")];
        let index = Index::build(&docs, &plain_analyzer(), "snap").unwrap();
        let fields = vec!["title".to_string()];
        let hits = index
            .match_candidates(&query(&["nurse"], &["nurse"]), &fields)
            .unwrap();
        assert_eq!(hits, vec!["a".to_string()]);
        let none = index
            .match_candidates(&query(&["zebra"], &["zebra"]), &fields)
            .unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn index_is_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<Index>();
    }

    #[test]
    fn match_candidates_rejects_empty_query() {
        let docs = vec![doc("a", "nurse", "")];
        let index = Index::build(&docs, &plain_analyzer(), "snap").unwrap();
        assert!(index
            .match_candidates(&query(&[], &[]), &["title".to_string()])
            .is_err());
    }
}
