//! The tunable relevance function: per-field BM25 under field boosts with
//! term-centric / field-centric / hybrid combiners, a multiplicative penalty
//! for query tokens absent from the job, and a bonus for jobs whose title
//! contains every query token.
//!
//! `raw_score` is normalized to `rel_score = raw / (1 + raw)`, a fixed
//! monotone map into [0, 1), so rankings under raw and normalized scores are
//! identical.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use crate::analyzer::{
    schema_field_names, schema_mode, AnalysisMode, AnalyzedQuery, AnalyzerConfig,
};
use crate::error::{Error, Result};
use crate::index::{Bm25Params, Index};
use crate::kv::{self, KvValue};

/// How per-field scores combine into one base score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Combiner {
    /// Per query term, take the best boosted field match; sum over terms.
    TermCentric,
    /// Per field, sum boosted term scores; sum over fields.
    FieldCentric,
    /// `w * term_centric + (1 - w) * field_centric`.
    Hybrid(f64),
}

impl Combiner {
    fn parse(raw: &str, line: usize) -> Result<Self> {
        match raw {
            "term_centric" => Ok(Combiner::TermCentric),
            "field_centric" => Ok(Combiner::FieldCentric),
            other => {
                if let Some(w) = other.strip_prefix("hybrid:") {
                    let w = kv::parse_f64("combiner", w, line)?;
                    if !(0.0..=1.0).contains(&w) {
                        return Err(Error::Config(format!(
                            "line {line}: hybrid mix weight must be in [0, 1], got {w}"
                        )));
                    }
                    Ok(Combiner::Hybrid(w))
                } else {
                    Err(Error::Config(format!(
                        "line {line}: unknown combiner {other:?} (term_centric, field_centric, hybrid:<w>)"
                    )))
                }
            }
        }
    }

    pub fn to_config_string(self) -> String {
        match self {
            Combiner::TermCentric => "term_centric".to_string(),
            Combiner::FieldCentric => "field_centric".to_string(),
            Combiner::Hybrid(w) => format!("hybrid:{w}"),
        }
    }
}

/// Complete parameterization of the relevance function.
#[derive(Debug, Clone)]
pub struct RelevanceConfig {
    pub field_boosts: BTreeMap<String, f64>,
    pub default_bm25: Bm25Params,
    pub bm25_overrides: BTreeMap<String, Bm25Params>,
    pub combiner: Combiner,
    pub coverage_penalty_base: f64,
    pub title_complete_bonus: f64,
    pub retrieval_fields: Vec<String>,
}

impl Default for RelevanceConfig {
    fn default() -> Self {
        let mut boosts = BTreeMap::new();
        boosts.insert("title".to_string(), 3.0);
        boosts.insert("title_analyzed".to_string(), 2.0);
        boosts.insert("description".to_string(), 1.0);
        boosts.insert("description_analyzed".to_string(), 0.6);
        boosts.insert("company".to_string(), 1.5);
        boosts.insert("company_analyzed".to_string(), 0.8);
        boosts.insert("tags".to_string(), 1.2);
        RelevanceConfig {
            field_boosts: boosts,
            default_bm25: Bm25Params::default(),
            bm25_overrides: BTreeMap::new(),
            combiner: Combiner::TermCentric,
            coverage_penalty_base: 0.5,
            title_complete_bonus: 0.3,
            retrieval_fields: schema_field_names(),
        }
    }
}

impl RelevanceConfig {
    pub fn params_for(&self, field: &str) -> Bm25Params {
        self.bm25_overrides
            .get(field)
            .copied()
            .unwrap_or(self.default_bm25)
    }

    /// Parse the flat key-value config format. Scalar keys not set keep
    /// defaults; `boost.*` lines, when present, define the complete boost
    /// map (fields not listed are unscored).
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = RelevanceConfig::default();
        let entries = kv::parse(text)?;
        if entries.iter().any(|e| e.key.starts_with("boost.")) {
            config.field_boosts.clear();
        }
        let mut k_overrides: BTreeMap<String, f64> = BTreeMap::new();
        let mut b_overrides: BTreeMap<String, f64> = BTreeMap::new();

        for entry in &entries {
            let scalar = |value: &KvValue| -> Result<String> {
                match value {
                    KvValue::Scalar(s) => Ok(s.clone()),
                    KvValue::List(_) => Err(Error::Config(format!(
                        "line {}: {} expects a scalar, not a list",
                        entry.line, entry.key
                    ))),
                }
            };
            if let Some(field) = entry.key.strip_prefix("boost.") {
                let v = kv::parse_f64(&entry.key, &scalar(&entry.value)?, entry.line)?;
                config.field_boosts.insert(field.to_string(), v);
            } else if let Some(rest) = entry.key.strip_prefix("bm25.") {
                let (field, component) = rest.rsplit_once('.').ok_or_else(|| {
                    Error::Config(format!(
                        "line {}: expected bm25.<field>.k or bm25.<field>.b",
                        entry.line
                    ))
                })?;
                let v = kv::parse_f64(&entry.key, &scalar(&entry.value)?, entry.line)?;
                match (field, component) {
                    ("default", "k") => config.default_bm25.k = v,
                    ("default", "b") => config.default_bm25.b = v,
                    (f, "k") => {
                        k_overrides.insert(f.to_string(), v);
                    }
                    (f, "b") => {
                        b_overrides.insert(f.to_string(), v);
                    }
                    (_, other) => {
                        return Err(Error::Config(format!(
                            "line {}: unknown bm25 component {other:?}",
                            entry.line
                        )))
                    }
                }
            } else {
                match entry.key.as_str() {
                    "combiner" => {
                        config.combiner = Combiner::parse(&scalar(&entry.value)?, entry.line)?;
                    }
                    "coverage_penalty_base" => {
                        config.coverage_penalty_base =
                            kv::parse_f64(&entry.key, &scalar(&entry.value)?, entry.line)?;
                    }
                    "title_complete_bonus" => {
                        config.title_complete_bonus =
                            kv::parse_f64(&entry.key, &scalar(&entry.value)?, entry.line)?;
                    }
                    "retrieval_fields" => {
                        config.retrieval_fields = match &entry.value {
                            KvValue::List(items) => items.clone(),
                            KvValue::Scalar(s) => {
                                s.split(',').map(|f| f.trim().to_string()).collect()
                            }
                        };
                    }
                    other => {
                        return Err(Error::Config(format!(
                            "line {}: unknown config key {other:?}",
                            entry.line
                        )))
                    }
                }
            }
        }

        // Per-field overrides resolve against the (possibly updated) default.
        for (field, k) in k_overrides {
            config
                .bm25_overrides
                .entry(field)
                .or_insert(config.default_bm25)
                .k = k;
        }
        for (field, b) in b_overrides {
            config
                .bm25_overrides
                .entry(field)
                .or_insert(config.default_bm25)
                .b = b;
        }

        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Check ranges and schema consistency. Every field with a positive boost
    /// must also be a retrieval field, which is what guarantees that any
    /// document with a positive score is retrievable.
    pub fn validate(&self) -> Result<()> {
        let schema = schema_field_names();
        for (field, boost) in &self.field_boosts {
            if !schema.contains(field) {
                return Err(Error::Config(format!(
                    "boosted field {field:?} is not in the schema"
                )));
            }
            if !(boost.is_finite() && *boost >= 0.0) {
                return Err(Error::Config(format!(
                    "boost for {field:?} must be >= 0, got {boost}"
                )));
            }
            if *boost > 0.0 && !self.retrieval_fields.contains(field) {
                return Err(Error::Config(format!(
                    "field {field:?} has boost {boost} but is not a retrieval field; \
                     scored documents would not be retrievable"
                )));
            }
        }
        for field in &self.retrieval_fields {
            if !schema.contains(field) {
                return Err(Error::Config(format!(
                    "retrieval field {field:?} is not in the schema"
                )));
            }
        }
        if self.retrieval_fields.is_empty() {
            return Err(Error::Config("retrieval_fields must not be empty".into()));
        }
        self.default_bm25.validate()?;
        for params in self.bm25_overrides.values() {
            params.validate()?;
        }
        if !(self.coverage_penalty_base > 0.0 && self.coverage_penalty_base <= 1.0) {
            return Err(Error::Config(format!(
                "coverage_penalty_base must be in (0, 1], got {}",
                self.coverage_penalty_base
            )));
        }
        if !(self.title_complete_bonus >= 0.0 && self.title_complete_bonus.is_finite()) {
            return Err(Error::Config(format!(
                "title_complete_bonus must be >= 0, got {}",
                self.title_complete_bonus
            )));
        }
        if let Combiner::Hybrid(w) = self.combiner {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Config(format!(
                    "hybrid mix weight must be in [0, 1], got {w}"
                )));
            }
        }
        Ok(())
    }

    /// Canonical config-file rendering (used when materializing tuned configs).
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for (field, boost) in &self.field_boosts {
            out.push_str(&format!("boost.{field} = {boost}\n"));
        }
        out.push_str(&format!("bm25.default.k = {}\n", self.default_bm25.k));
        out.push_str(&format!("bm25.default.b = {}\n", self.default_bm25.b));
        for (field, params) in &self.bm25_overrides {
            out.push_str(&format!("bm25.{field}.k = {}\n", params.k));
            out.push_str(&format!("bm25.{field}.b = {}\n", params.b));
        }
        out.push_str(&format!(
            "combiner = {}\n",
            self.combiner.to_config_string()
        ));
        out.push_str(&format!(
            "coverage_penalty_base = {}\n",
            self.coverage_penalty_base
        ));
        out.push_str(&format!(
            "title_complete_bonus = {}\n",
            self.title_complete_bonus
        ));
        out.push_str(&format!(
            "retrieval_fields = [{}]\n",
            self.retrieval_fields.join(", ")
        ));
        out
    }
}

/// One scored document.
#[derive(Debug, Clone, Serialize)]
pub struct ScoredResult {
    pub doc_id: String,
    pub rel_score: f64,
    pub raw_score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explanation: Option<ScoreExplanation>,
}

/// One (field, term) row of a score breakdown.
#[derive(Debug, Clone, Serialize)]
pub struct Contribution {
    pub term: String,
    pub field: String,
    pub boost: f64,
    pub bm25: f64,
    /// Share of the base score attributed to this row; rows sum to the base.
    pub contribution: f64,
}

/// Complete factor breakdown of one document's score.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreExplanation {
    pub query_tokens: Vec<String>,
    pub contributions: Vec<Contribution>,
    pub matched_token_count: usize,
    pub missing_tokens: Vec<String>,
    pub coverage_factor: f64,
    pub title_bonus_factor: f64,
    pub base_score: f64,
    pub raw_score: f64,
    pub rel_score: f64,
}

/// Scoring context for one analyzed query against one index + config.
pub struct Scorer<'a> {
    index: &'a Index,
    config: &'a RelevanceConfig,
    /// Deduplicated raw query tokens: the unit of coverage and term identity.
    terms: Vec<String>,
    /// Analyzed image of each term, parallel to `terms`.
    images: Vec<Vec<String>>,
}

impl<'a> Scorer<'a> {
    pub fn new(
        index: &'a Index,
        analyzer: &AnalyzerConfig,
        config: &'a RelevanceConfig,
        query: &AnalyzedQuery,
    ) -> Self {
        let terms = query.raw.dedup_tokens();
        let images = terms.iter().map(|t| analyzer.analyze_token(t)).collect();
        Scorer {
            index,
            config,
            terms,
            images,
        }
    }

    /// BM25 of term `ti` in `field`, realized per the field's analysis mode.
    /// Analyzed-mode fields score the term's analyzed image (summed when a
    /// rewrite expands one token into several).
    fn field_bm25(&self, ti: usize, field: &str, doc_idx: u32) -> f64 {
        let params = self.config.params_for(field);
        match schema_mode(field).unwrap_or(AnalysisMode::Raw) {
            AnalysisMode::Raw => self.index.bm25_at(field, &self.terms[ti], doc_idx, params),
            AnalysisMode::Analyzed => {
                let mut seen: Vec<&str> = Vec::new();
                let mut sum = 0.0;
                for image in &self.images[ti] {
                    if seen.contains(&image.as_str()) {
                        continue;
                    }
                    seen.push(image);
                    sum += self.index.bm25_at(field, image, doc_idx, params);
                }
                sum
            }
        }
    }

    pub fn term_centric(&self, doc_idx: u32) -> f64 {
        let mut total = 0.0;
        for ti in 0..self.terms.len() {
            let mut best = 0.0;
            for (field, boost) in &self.config.field_boosts {
                let s = boost * self.field_bm25(ti, field, doc_idx);
                if s > best {
                    best = s;
                }
            }
            total += best;
        }
        total
    }

    pub fn field_centric(&self, doc_idx: u32) -> f64 {
        let mut total = 0.0;
        for (field, boost) in &self.config.field_boosts {
            if *boost == 0.0 {
                continue;
            }
            let mut field_sum = 0.0;
            for ti in 0..self.terms.len() {
                field_sum += self.field_bm25(ti, field, doc_idx);
            }
            total += boost * field_sum;
        }
        total
    }

    fn base(&self, doc_idx: u32) -> f64 {
        match self.config.combiner {
            Combiner::TermCentric => self.term_centric(doc_idx),
            Combiner::FieldCentric => self.field_centric(doc_idx),
            Combiner::Hybrid(w) => {
                w * self.term_centric(doc_idx) + (1.0 - w) * self.field_centric(doc_idx)
            }
        }
    }

    /// A term is present when its raw form occurs in any raw-mode schema
    /// field, or its full analyzed image occurs in analyzed-mode fields.
    fn term_present(&self, ti: usize, doc_idx: u32) -> bool {
        for (field, mode) in crate::analyzer::SCHEMA {
            if *mode == AnalysisMode::Raw && self.index.tf_at(field, &self.terms[ti], doc_idx) > 0 {
                return true;
            }
        }
        let image = &self.images[ti];
        if image.is_empty() {
            return false;
        }
        image.iter().all(|tok| {
            crate::analyzer::SCHEMA.iter().any(|(field, mode)| {
                *mode == AnalysisMode::Analyzed && self.index.tf_at(field, tok, doc_idx) > 0
            })
        })
    }

    /// Present in the title specifically (raw title or analyzed-title image).
    fn term_in_title(&self, ti: usize, doc_idx: u32) -> bool {
        if self.index.tf_at("title", &self.terms[ti], doc_idx) > 0 {
            return true;
        }
        let image = &self.images[ti];
        !image.is_empty()
            && image
                .iter()
                .all(|tok| self.index.tf_at("title_analyzed", tok, doc_idx) > 0)
    }

    fn factors(&self, doc_idx: u32) -> (usize, Vec<String>, f64, f64) {
        let mut missing = Vec::new();
        let mut title_complete = true;
        for ti in 0..self.terms.len() {
            if !self.term_present(ti, doc_idx) {
                missing.push(self.terms[ti].clone());
            }
            if !self.term_in_title(ti, doc_idx) {
                title_complete = false;
            }
        }
        let matched = self.terms.len() - missing.len();
        let coverage = self.config.coverage_penalty_base.powi(missing.len() as i32);
        let title_factor = if title_complete && !self.terms.is_empty() {
            1.0 + self.config.title_complete_bonus
        } else {
            1.0
        };
        (matched, missing, coverage, title_factor)
    }

    /// Base score, coverage penalty, and title bonus composed into one result.
    pub fn combined(&self, doc_id: &str, with_explanation: bool) -> Result<ScoredResult> {
        let doc_idx = self.index.doc_index(doc_id)?;
        let base = self.base(doc_idx);
        let (matched, missing, coverage, title_factor) = self.factors(doc_idx);
        let raw = base * coverage * title_factor;
        let rel = raw / (1.0 + raw);
        let explanation = with_explanation.then(|| {
            self.explanation_parts(
                doc_idx,
                base,
                matched,
                missing.clone(),
                coverage,
                title_factor,
            )
        });
        Ok(ScoredResult {
            doc_id: doc_id.to_string(),
            rel_score: rel,
            raw_score: raw,
            explanation,
        })
    }

    fn explanation_parts(
        &self,
        doc_idx: u32,
        base: f64,
        matched_token_count: usize,
        missing_tokens: Vec<String>,
        coverage_factor: f64,
        title_bonus_factor: f64,
    ) -> ScoreExplanation {
        let (w_term, w_field) = match self.config.combiner {
            Combiner::TermCentric => (1.0, 0.0),
            Combiner::FieldCentric => (0.0, 1.0),
            Combiner::Hybrid(w) => (w, 1.0 - w),
        };
        let mut contributions = Vec::new();
        for ti in 0..self.terms.len() {
            // The term-centric winner: highest boosted value, first field on ties.
            let mut winner: Option<(&str, f64)> = None;
            for (field, boost) in &self.config.field_boosts {
                let s = boost * self.field_bm25(ti, field, doc_idx);
                if s > winner.map_or(0.0, |(_, v)| v) {
                    winner = Some((field, s));
                }
            }
            for (field, boost) in &self.config.field_boosts {
                let value = self.field_bm25(ti, field, doc_idx);
                if value == 0.0 {
                    continue;
                }
                let boosted = boost * value;
                let term_part = match winner {
                    Some((wf, wv)) if wf == field => wv,
                    _ => 0.0,
                };
                contributions.push(Contribution {
                    term: self.terms[ti].clone(),
                    field: field.clone(),
                    boost: *boost,
                    bm25: value,
                    contribution: w_term * term_part + w_field * boosted,
                });
            }
        }
        let raw = base * coverage_factor * title_bonus_factor;
        ScoreExplanation {
            query_tokens: self.terms.clone(),
            contributions,
            matched_token_count,
            missing_tokens,
            coverage_factor,
            title_bonus_factor,
            base_score: base,
            raw_score: raw,
            rel_score: raw / (1.0 + raw),
        }
    }
}

/// Retrieve, score, and rank: candidates from any-token matching, scored by
/// the combined relevance function, sorted by score descending with ties
/// broken by ascending doc id.
pub fn score_and_rank(
    query: &str,
    index: &Index,
    analyzer: &AnalyzerConfig,
    config: &RelevanceConfig,
    limit: usize,
) -> Result<Vec<ScoredResult>> {
    let analyzed = analyzer.analyze_query(query);
    if analyzed.raw.is_empty() {
        return Err(Error::Index(format!(
            "query {query:?} has no tokens after analysis"
        )));
    }
    let candidates = index.match_candidates(&analyzed, &config.retrieval_fields)?;
    let scorer = Scorer::new(index, analyzer, config, &analyzed);
    let mut results = Vec::with_capacity(candidates.len());
    for doc_id in candidates {
        results.push(scorer.combined(&doc_id, false)?);
    }
    results.sort_by(|a, b| {
        b.rel_score
            .partial_cmp(&a.rel_score)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.doc_id.cmp(&b.doc_id))
    });
    results.truncate(limit);
    Ok(results)
}

/// Full factor breakdown for one (query, document) pair.
pub fn explain(
    query: &str,
    doc_id: &str,
    index: &Index,
    analyzer: &AnalyzerConfig,
    config: &RelevanceConfig,
) -> Result<ScoreExplanation> {
    let analyzed = analyzer.analyze_query(query);
    if analyzed.raw.is_empty() {
        return Err(Error::Index(format!(
            "query {query:?} has no tokens after analysis"
        )));
    }
    let scorer = Scorer::new(index, analyzer, config, &analyzed);
    let result = scorer.combined(doc_id, true)?;
    Ok(result.explanation.expect("explanation requested"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::JobDocument;
    use proptest::prelude::*;

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
        AnalyzerConfig {
            rewrite_rules: vec![],
            stem_rules: vec![],
            lowercase: true,
        }
    }

    /// Boost only the given fields, retrieve over everything.
    fn config_with_boosts(boosts: &[(&str, f64)]) -> RelevanceConfig {
        RelevanceConfig {
            field_boosts: boosts.iter().map(|(f, b)| (f.to_string(), *b)).collect(),
            ..RelevanceConfig::default()
        }
    }

    #[test]
    fn term_centric_takes_max_over_fields() {
        // "alpha" matches title (boost 2) and description (boost 1); the
        // description bm25 is larger because tf is pinned high there.
        let analyzer = plain_analyzer();
        let docs = vec![
            doc("a", "alpha", "alpha alpha alpha alpha"),
            doc("b", "other", "filler text"),
        ];
        let index = Index::build(&docs, &analyzer, "s").unwrap();
        let config = config_with_boosts(&[("title", 2.0), ("description", 1.0)]);
        let q = analyzer.analyze_query("alpha");
        let s = Scorer::new(&index, &analyzer, &config, &q);
        let doc_idx = index.doc_index("a").unwrap();

        let title_score = 2.0
            * index
                .bm25("title", "alpha", "a", config.params_for("title"))
                .unwrap();
        let desc_score = 1.0
            * index
                .bm25(
                    "description",
                    "alpha",
                    "a",
                    config.params_for("description"),
                )
                .unwrap();
        let expected = title_score.max(desc_score);
        assert!((s.term_centric(doc_idx) - expected).abs() < 1e-12);
    }

    #[test]
    fn field_centric_sums_over_fields() {
        let analyzer = plain_analyzer();
        let docs = vec![doc("a", "alpha", "alpha"), doc("b", "beta", "gamma")];
        let index = Index::build(&docs, &analyzer, "s").unwrap();
        let config = config_with_boosts(&[("title", 2.0), ("description", 1.0)]);
        let q = analyzer.analyze_query("alpha");
        let s = Scorer::new(&index, &analyzer, &config, &q);
        let doc_idx = index.doc_index("a").unwrap();

        let title = index
            .bm25("title", "alpha", "a", config.params_for("title"))
            .unwrap();
        let desc = index
            .bm25(
                "description",
                "alpha",
                "a",
                config.params_for("description"),
            )
            .unwrap();
        assert!((s.field_centric(doc_idx) - (2.0 * title + 1.0 * desc)).abs() < 1e-12);
    }

    #[test]
    fn combiners_agree_on_single_field_match() {
        let analyzer = plain_analyzer();
        let docs = vec![doc("a", "alpha", ""), doc("b", "beta", "")];
        let index = Index::build(&docs, &analyzer, "s").unwrap();
        let config = config_with_boosts(&[("title", 2.0)]);
        let q = analyzer.analyze_query("alpha");
        let s = Scorer::new(&index, &analyzer, &config, &q);
        let doc_idx = index.doc_index("a").unwrap();
        assert!((s.term_centric(doc_idx) - s.field_centric(doc_idx)).abs() < 1e-15);
    }

    /// Brute-force oracle: independent double loop over terms and fields
    /// calling the public bm25 op directly.
    fn oracle_scores(
        index: &Index,
        config: &RelevanceConfig,
        terms: &[&str],
        doc: &str,
    ) -> (f64, f64) {
        let mut term_centric = 0.0;
        for t in terms {
            let mut best: f64 = 0.0;
            for (field, boost) in &config.field_boosts {
                let v = boost * index.bm25(field, t, doc, config.params_for(field)).unwrap();
                best = best.max(v);
            }
            term_centric += best;
        }
        let mut field_centric = 0.0;
        for (field, boost) in &config.field_boosts {
            let mut sum = 0.0;
            for t in terms {
                sum += index.bm25(field, t, doc, config.params_for(field)).unwrap();
            }
            field_centric += boost * sum;
        }
        (term_centric, field_centric)
    }

    #[test]
    fn two_term_scores_match_brute_force_loop() {
        let analyzer = plain_analyzer();
        let docs = vec![
            doc("a", "nurse manager", "nurse duties in clinic"),
            doc("b", "nurse", "manager of warehouse"),
            doc("c", "warehouse clerk", "clerk duties"),
        ];
        let index = Index::build(&docs, &analyzer, "s").unwrap();
        let config = config_with_boosts(&[("title", 2.0), ("description", 1.0)]);
        let q = analyzer.analyze_query("nurse manager");
        let s = Scorer::new(&index, &analyzer, &config, &q);
        for id in ["a", "b", "c"] {
            let doc_idx = index.doc_index(id).unwrap();
            let (tc, fc) = oracle_scores(&index, &config, &["nurse", "manager"], id);
            assert!(
                (s.term_centric(doc_idx) - tc).abs() < 1e-12,
                "term-centric {id}"
            );
            assert!(
                (s.field_centric(doc_idx) - fc).abs() < 1e-12,
                "field-centric {id}"
            );
        }
    }

    #[test]
    fn duplicate_query_terms_count_once() {
        let analyzer = plain_analyzer();
        let docs = vec![doc("a", "alpha", ""), doc("b", "beta", "")];
        let index = Index::build(&docs, &analyzer, "s").unwrap();
        let config = config_with_boosts(&[("title", 1.0)]);
        let q1 = analyzer.analyze_query("alpha");
        let q2 = analyzer.analyze_query("alpha alpha alpha");
        let s1 = Scorer::new(&index, &analyzer, &config, &q1);
        let s2 = Scorer::new(&index, &analyzer, &config, &q2);
        let doc_idx = index.doc_index("a").unwrap();
        assert_eq!(s1.term_centric(doc_idx), s2.term_centric(doc_idx));
    }

    #[test]
    fn coverage_penalty_applies_per_missing_token() {
        let analyzer = plain_analyzer();
        let docs = vec![doc("a", "alpha beta", ""), doc("b", "noise", "")];
        let index = Index::build(&docs, &analyzer, "s").unwrap();
        let mut config = config_with_boosts(&[("title", 1.0)]);
        config.coverage_penalty_base = 0.5;
        config.title_complete_bonus = 0.0;

        // 3-token query, one token missing from doc a.
        let q = analyzer.analyze_query("alpha beta gamma");
        let s = Scorer::new(&index, &analyzer, &config, &q);
        let result = s.combined("a", true).unwrap();
        let doc_idx = index.doc_index("a").unwrap();
        let base = s.term_centric(doc_idx);
        assert!((result.raw_score - base * 0.5).abs() < 1e-12);
        let exp = result.explanation.unwrap();
        assert_eq!(exp.missing_tokens, vec!["gamma".to_string()]);
        assert_eq!(exp.matched_token_count, 2);
    }

    #[test]
    fn no_missing_tokens_means_no_penalty() {
        let analyzer = plain_analyzer();
        let docs = vec![doc("a", "alpha beta", ""), doc("b", "noise", "")];
        let index = Index::build(&docs, &analyzer, "s").unwrap();
        let mut config = config_with_boosts(&[("title", 1.0)]);
        config.coverage_penalty_base = 0.25;
        config.title_complete_bonus = 0.0;
        let q = analyzer.analyze_query("alpha beta");
        let s = Scorer::new(&index, &analyzer, &config, &q);
        let result = s.combined("a", false).unwrap();
        let doc_idx = index.doc_index("a").unwrap();
        assert!((result.raw_score - s.term_centric(doc_idx)).abs() < 1e-12);
    }

    #[test]
    fn title_bonus_outranks_identical_doc_without_it() {
        let analyzer = plain_analyzer();
        // Same description matches; only doc "t" carries both tokens in the title.
        let docs = vec![
            doc("t", "alpha beta", "alpha beta staff"),
            doc("u", "alpha crew", "alpha beta staff"),
            doc("v", "noise", "padding words here"),
        ];
        let index = Index::build(&docs, &analyzer, "s").unwrap();
        let mut config = config_with_boosts(&[("description", 1.0)]);
        config.title_complete_bonus = 0.3;
        config.coverage_penalty_base = 1.0;
        let q = analyzer.analyze_query("alpha beta");
        let s = Scorer::new(&index, &analyzer, &config, &q);
        let rt = s.combined("t", false).unwrap();
        let ru = s.combined("u", false).unwrap();
        // Descriptions are identical so the bases agree; the bonus decides.
        assert!((rt.raw_score - ru.raw_score * 1.3).abs() < 1e-12);
        assert!(rt.rel_score > ru.rel_score);
    }

    #[test]
    fn ranking_sorts_by_score_then_doc_id() {
        let analyzer = plain_analyzer();
        let docs = vec![
            doc("b", "alpha", ""),
            doc("a", "alpha", ""),
            doc("c", "alpha alpha other words", ""),
        ];
        let index = Index::build(&docs, &analyzer, "s").unwrap();
        let config = config_with_boosts(&[("title", 1.0)]);
        let ranked = score_and_rank("alpha", &index, &analyzer, &config, 10).unwrap();
        // Docs a and b tie exactly (identical titles): ascending id.
        let ids: Vec<&str> = ranked.iter().map(|r| r.doc_id.as_str()).collect();
        let pos_a = ids.iter().position(|i| *i == "a").unwrap();
        let pos_b = ids.iter().position(|i| *i == "b").unwrap();
        assert!(pos_a < pos_b);
        assert_eq!(ranked.len(), 3);
    }

    #[test]
    fn ranking_respects_limit_and_rejects_empty_query() {
        let analyzer = plain_analyzer();
        let docs = vec![doc("a", "alpha", ""), doc("b", "alpha", "")];
        let index = Index::build(&docs, &analyzer, "s").unwrap();
        let config = config_with_boosts(&[("title", 1.0)]);
        assert_eq!(
            score_and_rank("alpha", &index, &analyzer, &config, 1)
                .unwrap()
                .len(),
            1
        );
        assert!(score_and_rank(",,,", &index, &analyzer, &config, 5).is_err());
    }

    #[test]
    fn explanation_reconstructs_raw_score() {
        let analyzer = AnalyzerConfig::default();
        let docs = vec![
            doc("a", "Registered Nurse", "ICU nursing duties and management"),
            doc("b", "Warehouse Clerk", "picking and packing"),
            doc("c", "Nurse Manager", "nurse supervision"),
        ];
        let index = Index::build(&docs, &analyzer, "s").unwrap();
        for combiner in [
            Combiner::TermCentric,
            Combiner::FieldCentric,
            Combiner::Hybrid(0.7),
        ] {
            let config = RelevanceConfig {
                combiner,
                ..RelevanceConfig::default()
            };
            for id in ["a", "b", "c"] {
                let exp = explain("registered nurse", id, &index, &analyzer, &config).unwrap();
                let sum: f64 = exp.contributions.iter().map(|c| c.contribution).sum();
                let reconstructed = sum * exp.coverage_factor * exp.title_bonus_factor;
                let tolerance = 1e-9 * exp.raw_score.abs().max(1e-12);
                assert!(
                    (reconstructed - exp.raw_score).abs() <= tolerance,
                    "doc {id} combiner {combiner:?}: {reconstructed} vs {}",
                    exp.raw_score
                );
            }
        }
    }

    #[test]
    fn explain_unknown_doc_errors() {
        let analyzer = plain_analyzer();
        let docs = vec![doc("a", "alpha", "")];
        let index = Index::build(&docs, &analyzer, "s").unwrap();
        let config = config_with_boosts(&[("title", 1.0)]);
        assert!(explain("alpha", "zz", &index, &analyzer, &config).is_err());
    }

    #[test]
    fn config_file_round_trip() {
        let text = "boost.title = 2.5\nbm25.title.k = 0.9\nbm25.default.b = 0.6\n\
                    combiner = hybrid:0.7\ncoverage_penalty_base = 0.6\ntitle_complete_bonus = 0.3\n";
        let config = RelevanceConfig::parse(text).unwrap();
        assert_eq!(config.field_boosts["title"], 2.5);
        assert_eq!(config.params_for("title").k, 0.9);
        // Per-field override keeps the updated default for the other component.
        assert_eq!(config.params_for("title").b, 0.6);
        assert_eq!(config.params_for("description").b, 0.6);
        assert_eq!(config.combiner, Combiner::Hybrid(0.7));

        let rendered = config.to_config_string();
        let reparsed = RelevanceConfig::parse(&rendered).unwrap();
        assert_eq!(reparsed.field_boosts, config.field_boosts);
        assert_eq!(reparsed.combiner, config.combiner);
    }

    #[test]
    fn config_rejects_unretrievable_boosted_field() {
        let text = "boost.title = 2.0\nretrieval_fields = [description]\n";
        assert!(RelevanceConfig::parse(text).is_err());
    }

    #[test]
    fn config_rejects_bad_ranges() {
        assert!(RelevanceConfig::parse("coverage_penalty_base = 0\n").is_err());
        assert!(RelevanceConfig::parse("coverage_penalty_base = 1.5\n").is_err());
        assert!(RelevanceConfig::parse("title_complete_bonus = -1\n").is_err());
        assert!(RelevanceConfig::parse("boost.title = -2\n").is_err());
        assert!(RelevanceConfig::parse("combiner = hybrid:1.2\n").is_err());
        assert!(RelevanceConfig::parse("boost.nonexistent_field = 1\n").is_err());
        assert!(RelevanceConfig::parse("mystery_key = 1\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// rel_score stays in [0, 1) and is monotone in raw_score.
        #[test]
        fn normalization_is_monotone_and_bounded(raws in proptest::collection::vec(0.0f64..1e6, 2..20)) {
            let mut pairs: Vec<(f64, f64)> = raws.iter().map(|&r| (r, r / (1.0 + r))).collect();
            for (_, rel) in &pairs {
                prop_assert!((0.0..1.0).contains(rel));
            }
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for w in pairs.windows(2) {
                prop_assert!(w[0].1 <= w[1].1);
            }
        }

        /// Scaling every boost by c > 0 leaves the candidate ordering unchanged.
        #[test]
        fn boost_scaling_preserves_ranking(scale in 0.01f64..100.0) {
            let analyzer = plain_analyzer();
            let docs = vec![
                doc("a", "nurse manager", "nurse clinic"),
                doc("b", "nurse", "warehouse manager"),
                doc("c", "nurse nurse nurse", "manager"),
                doc("d", "manager", "nurse duties"),
            ];
            let index = Index::build(&docs, &analyzer, "s").unwrap();
            let base = config_with_boosts(&[("title", 2.0), ("description", 1.0)]);
            let mut scaled = base.clone();
            for boost in scaled.field_boosts.values_mut() {
                *boost *= scale;
            }
            let r1 = score_and_rank("nurse manager", &index, &analyzer, &base, 10).unwrap();
            let r2 = score_and_rank("nurse manager", &index, &analyzer, &scaled, 10).unwrap();
            let ids1: Vec<&str> = r1.iter().map(|r| r.doc_id.as_str()).collect();
            let ids2: Vec<&str> = r2.iter().map(|r| r.doc_id.as_str()).collect();
            prop_assert_eq!(ids1, ids2);
        }
    }

    #[test]
    fn coverage_monotonicity_more_missing_never_wins() {
        let analyzer = plain_analyzer();
        // Same matched content; doc "two" misses two tokens, doc "one" misses one.
        let docs = vec![
            doc("one", "alpha beta gamma", ""),
            doc("two", "alpha beta", ""),
            doc("noise", "something else", ""),
        ];
        let index = Index::build(&docs, &analyzer, "s").unwrap();
        for base in [0.25, 0.5, 0.75] {
            let mut config = config_with_boosts(&[("title", 1.0)]);
            config.coverage_penalty_base = base;
            config.title_complete_bonus = 0.0;
            let q = analyzer.analyze_query("alpha beta gamma delta");
            let s = Scorer::new(&index, &analyzer, &config, &q);
            let one = s.combined("one", false).unwrap();
            let two = s.combined("two", false).unwrap();
            assert!(one.raw_score > two.raw_score, "penalty base {base}");
        }
    }

    #[test]
    fn retrieval_recall_parity_on_small_corpus() {
        let analyzer = AnalyzerConfig::default();
        let docs = vec![
            doc("a", "Registered Nurse", "ICU"),
            doc("b", "Nurse Manager", "clinic"),
            doc("c", "Clerk", "office nurse support"),
            doc("d", "Driver", "delivery"),
        ];
        let index = Index::build(&docs, &analyzer, "s").unwrap();
        let config = RelevanceConfig::default();
        let q = analyzer.analyze_query("nurse");
        let candidates = index
            .match_candidates(&q, &config.retrieval_fields)
            .unwrap();
        let scorer = Scorer::new(&index, &analyzer, &config, &q);
        for id in ["a", "b", "c", "d"] {
            let r = scorer.combined(id, false).unwrap();
            if r.raw_score > 0.0 {
                assert!(
                    candidates.contains(&id.to_string()),
                    "doc {id} scoreable but not retrieved"
                );
            }
        }
    }
}
