//! Graded-relevance evaluation: NDCG@k against the ideal grade-descending
//! ordering, precision@k and recall under grade binarization, and the mean
//! objective over a collection of judgment sets.
//!
//! Evaluation is condensed-list: documents in a ranking without a judgment
//! are skipped rather than treated as grade 0. NDCG is defined as 0 when the
//! ideal DCG is 0 (a set with no positive grades carries no ordering signal).

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Human relevance grade, 0 (extremely irrelevant) through 4 (perfect match).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct RelevanceGrade(u8);

impl RelevanceGrade {
    pub fn new(value: u8) -> Result<Self> {
        if value > 4 {
            return Err(Error::Judgments(format!(
                "grade must be 0..=4, got {value}"
            )));
        }
        Ok(RelevanceGrade(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn gain(self) -> f64 {
        (1u32 << self.0) as f64 - 1.0
    }
}

/// Grades binarize to relevant at (and above) this threshold by default.
pub const DEFAULT_RELEVANCE_THRESHOLD: u8 = 3;

/// Ranking cutoff for the headline objective.
pub const DEFAULT_NDCG_K: usize = 5;

/// All judgments for one query-location pair: the unit of evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgmentSet {
    pub query: String,
    pub location: String,
    pub judgments: BTreeMap<String, RelevanceGrade>,
}

impl JudgmentSet {
    pub fn new(
        query: &str,
        location: &str,
        judgments: BTreeMap<String, RelevanceGrade>,
    ) -> Result<Self> {
        if judgments.is_empty() {
            return Err(Error::Judgments(format!(
                "judgment set for ({query:?}, {location:?}) is empty"
            )));
        }
        Ok(JudgmentSet {
            query: query.to_string(),
            location: location.to_string(),
            judgments,
        })
    }

    pub fn grade_of(&self, doc_id: &str) -> Option<RelevanceGrade> {
        self.judgments.get(doc_id).copied()
    }

    /// Judged docs binarizing to relevant at `threshold`.
    pub fn relevant_docs(&self, threshold: u8) -> Vec<&str> {
        self.judgments
            .iter()
            .filter(|(_, g)| binarize(**g, threshold))
            .map(|(d, _)| d.as_str())
            .collect()
    }
}

/// True iff the grade meets the threshold.
pub fn binarize(grade: RelevanceGrade, threshold: u8) -> bool {
    grade.value() >= threshold
}

/// DCG@k with exponential gain: sum of (2^g - 1) / log2(rank + 1).
pub fn dcg_at_k(grades_in_rank_order: &[RelevanceGrade], k: usize) -> f64 {
    grades_in_rank_order
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, g)| g.gain() / ((i + 2) as f64).log2())
        .sum()
}

/// Grades of ranked docs, skipping docs without a judgment.
fn condensed_grades(ranked: &[String], judgments: &JudgmentSet) -> Vec<RelevanceGrade> {
    ranked
        .iter()
        .filter_map(|doc| judgments.grade_of(doc))
        .collect()
}

/// Ideal DCG@k: judged grades sorted descending.
fn ideal_dcg_at_k(judgments: &JudgmentSet, k: usize) -> f64 {
    let mut grades: Vec<RelevanceGrade> = judgments.judgments.values().copied().collect();
    grades.sort_unstable_by(|a, b| b.cmp(a));
    dcg_at_k(&grades, k)
}

/// NDCG@k of a ranking against the set's ideal grade-descending ordering.
pub fn ndcg_at_k(ranked: &[String], judgments: &JudgmentSet, k: usize) -> f64 {
    let ideal = ideal_dcg_at_k(judgments, k);
    if ideal == 0.0 {
        return 0.0;
    }
    dcg_at_k(&condensed_grades(ranked, judgments), k) / ideal
}

/// Fraction of the top-min(k, n) judged results that binarize to relevant.
pub fn precision_at_k(ranked: &[String], judgments: &JudgmentSet, k: usize, threshold: u8) -> f64 {
    let grades = condensed_grades(ranked, judgments);
    let top: Vec<&RelevanceGrade> = grades.iter().take(k).collect();
    if top.is_empty() {
        return 0.0;
    }
    let relevant = top.iter().filter(|g| binarize(***g, threshold)).count();
    relevant as f64 / top.len() as f64
}

/// |retrieved ∩ relevant| / |relevant|; 1 when no judged doc is relevant.
pub fn recall(retrieved: &[String], judgments: &JudgmentSet, threshold: u8) -> f64 {
    let relevant = judgments.relevant_docs(threshold);
    if relevant.is_empty() {
        return 1.0;
    }
    let hit = relevant
        .iter()
        .filter(|doc| retrieved.iter().any(|r| r == *doc))
        .count();
    hit as f64 / relevant.len() as f64
}

/// Per-set metric values plus their unweighted mean.
#[derive(Debug, Clone)]
pub struct ObjectiveReport {
    pub per_set: Vec<SetMetrics>,
    pub mean_ndcg: f64,
}

#[derive(Debug, Clone)]
pub struct SetMetrics {
    pub query: String,
    pub location: String,
    pub ndcg: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Evaluate every judgment set with the given engine and average NDCG@k.
/// The engine maps (query, location) to a ranked doc-id list; any engine
/// failure aborts the whole evaluation, identifying the failing pair.
pub fn mean_objective<F>(
    sets: &[JudgmentSet],
    mut engine: F,
    k: usize,
    threshold: u8,
) -> Result<ObjectiveReport>
where
    F: FnMut(&str, &str) -> Result<Vec<String>>,
{
    if sets.is_empty() {
        return Err(Error::Judgments("no judgment sets to evaluate".into()));
    }
    let mut per_set = Vec::with_capacity(sets.len());
    let mut sum = 0.0;
    for set in sets {
        let ranked = engine(&set.query, &set.location).map_err(|e| Error::Evaluation {
            query: set.query.clone(),
            location: set.location.clone(),
            message: e.to_string(),
        })?;
        let ndcg = ndcg_at_k(&ranked, set, k);
        sum += ndcg;
        per_set.push(SetMetrics {
            query: set.query.clone(),
            location: set.location.clone(),
            ndcg,
            precision: precision_at_k(&ranked, set, k, threshold),
            recall: recall(&ranked, set, threshold),
        });
    }
    Ok(ObjectiveReport {
        mean_ndcg: sum / sets.len() as f64,
        per_set,
    })
}

/// Load judgment sets from the TSV format
/// `query<TAB>location<TAB>doc_id<TAB>grade` (header required). Sets keep
/// first-appearance order.
pub fn load_judgments(path: &Path) -> Result<Vec<JudgmentSet>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_judgments(&text).map_err(|e| match e {
        Error::Judgments(msg) => Error::Judgments(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_judgments(text: &str) -> Result<Vec<JudgmentSet>> {
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::Judgments("empty judgments file".into()))?;
    let expected = ["query", "location", "doc_id", "grade"];
    let header_fields: Vec<&str> = header.1.split('\t').collect();
    if header_fields != expected {
        return Err(Error::Judgments(format!(
            "bad header {:?}, expected {:?}",
            header.1,
            expected.join("\t")
        )));
    }

    let mut order: Vec<(String, String)> = Vec::new();
    let mut by_pair: BTreeMap<(String, String), BTreeMap<String, RelevanceGrade>> = BTreeMap::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts.len() != 4 {
            return Err(Error::Judgments(format!(
                "line {}: expected 4 tab-separated fields, got {}",
                idx + 1,
                parts.len()
            )));
        }
        let grade_value: u8 = parts[3]
            .trim()
            .parse()
            .map_err(|_| Error::Judgments(format!("line {}: bad grade {:?}", idx + 1, parts[3])))?;
        let grade = RelevanceGrade::new(grade_value)
            .map_err(|e| Error::Judgments(format!("line {}: {e}", idx + 1)))?;
        let pair = (parts[0].to_string(), parts[1].to_string());
        let entry = by_pair.entry(pair.clone()).or_insert_with(|| {
            order.push(pair.clone());
            BTreeMap::new()
        });
        if entry.insert(parts[2].to_string(), grade).is_some() {
            return Err(Error::Judgments(format!(
                "line {}: duplicate judgment for doc {:?} in ({:?}, {:?})",
                idx + 1,
                parts[2],
                parts[0],
                parts[1]
            )));
        }
    }

    let mut sets = Vec::with_capacity(order.len());
    for pair in order {
        let judgments = by_pair.remove(&pair).expect("pair recorded");
        sets.push(JudgmentSet::new(&pair.0, &pair.1, judgments)?);
    }
    if sets.is_empty() {
        return Err(Error::Judgments("judgments file has no rows".into()));
    }
    Ok(sets)
}
