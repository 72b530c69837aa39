//! Evaluation-dataset construction: segments queries by NER tag signature
//! and token count, draws stratified samples, filters candidate locations by
//! population band, filters candidate result sets by size and
//! relevant/irrelevant balance, and picks one location per query by
//! duplicate-job count.
//!
//! Every sampling operation is a pure function of (input, seed).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// NER base labels accepted on query tokens.
pub const NER_BASE_LABELS: &[&str] = &[
    "workplace",
    "job_type",
    "job_title",
    "generic_title_implied_seniority",
    "seniority",
    "company",
    "area_of_interest_specialty",
    "other",
];

/// A query with one B-/I- prefixed NER tag per whitespace token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedQuery {
    pub text: String,
    pub ner_tags: Vec<String>,
}

impl TaggedQuery {
    pub fn new(text: &str, ner_tags: Vec<String>) -> Result<Self> {
        let token_count = text.split_whitespace().count();
        if token_count == 0 {
            return Err(Error::Dataset(format!("query {text:?} has no tokens")));
        }
        if ner_tags.len() != token_count {
            return Err(Error::Dataset(format!(
                "query {text:?}: {} tags for {token_count} tokens",
                ner_tags.len()
            )));
        }
        for tag in &ner_tags {
            let base = tag
                .strip_prefix("B-")
                .or_else(|| tag.strip_prefix("I-"))
                .ok_or_else(|| {
                    Error::Dataset(format!("query {text:?}: tag {tag:?} lacks B-/I- prefix"))
                })?;
            if !NER_BASE_LABELS.contains(&base) {
                return Err(Error::Dataset(format!(
                    "query {text:?}: unknown tag label {base:?}"
                )));
            }
        }
        Ok(TaggedQuery {
            text: text.to_string(),
            ner_tags,
        })
    }

    pub fn token_count(&self) -> usize {
        self.ner_tags.len()
    }

    /// Entity labels: each B- tag opens an entity, I- continues the previous
    /// one. An I- without its B- is repaired to open a new entity.
    fn entity_labels(&self) -> Vec<String> {
        let mut labels = Vec::new();
        let mut previous: Option<&str> = None;
        for tag in &self.ner_tags {
            if let Some(base) = tag.strip_prefix("B-") {
                labels.push(base.to_string());
                previous = Some(base);
            } else if let Some(base) = tag.strip_prefix("I-") {
                if previous != Some(base) {
                    labels.push(base.to_string());
                    previous = Some(base);
                }
            }
        }
        labels
    }

    pub fn segment(&self) -> QuerySegment {
        let mut signature = self.entity_labels();
        signature.sort();
        QuerySegment {
            tag_signature: signature,
            token_bucket: TokenBucket::from_count(self.token_count()),
        }
    }
}

/// Token-count bucket: 1, 2, 3, or 4-and-more.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TokenBucket {
    One,
    Two,
    Three,
    FourPlus,
}

impl TokenBucket {
    pub fn from_count(count: usize) -> Self {
        match count {
            0 | 1 => TokenBucket::One,
            2 => TokenBucket::Two,
            3 => TokenBucket::Three,
            _ => TokenBucket::FourPlus,
        }
    }
}

impl fmt::Display for TokenBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TokenBucket::One => "1",
            TokenBucket::Two => "2",
            TokenBucket::Three => "3",
            TokenBucket::FourPlus => "4plus",
        };
        write!(f, "{s}")
    }
}

/// Equivalence class of queries: sorted entity-label multiset plus token bucket.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuerySegment {
    pub tag_signature: Vec<String>,
    pub token_bucket: TokenBucket,
}

impl fmt::Display for QuerySegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.tag_signature.join("+"), self.token_bucket)
    }
}

/// A candidate search area with its population proxy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocationRecord {
    pub name: String,
    pub population: u64,
}

/// Partition queries into segments; every query lands in exactly one.
pub fn segment_queries(queries: &[TaggedQuery]) -> BTreeMap<QuerySegment, Vec<TaggedQuery>> {
    let mut segments: BTreeMap<QuerySegment, Vec<TaggedQuery>> = BTreeMap::new();
    for query in queries {
        segments
            .entry(query.segment())
            .or_default()
            .push(query.clone());
    }
    segments
}

/// Draw up to `quota` queries per segment without replacement, seeded.
pub fn stratified_sample(
    segments: &BTreeMap<QuerySegment, Vec<TaggedQuery>>,
    per_segment_quota: usize,
    seed: u64,
) -> Result<Vec<TaggedQuery>> {
    if per_segment_quota == 0 {
        return Err(Error::Usage("per-segment quota must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampled = Vec::new();
    for queries in segments.values() {
        let mut pool: Vec<&TaggedQuery> = queries.iter().collect();
        pool.shuffle(&mut rng);
        pool.truncate(per_segment_quota);
        // Stable output order within the segment.
        pool.sort_by(|a, b| a.text.cmp(&b.text));
        sampled.extend(pool.into_iter().cloned());
    }
    Ok(sampled)
}

/// Keep locations inside the inclusive population band, then draw a seeded
/// uniform sample of `sample_size` (or all, when fewer qualify).
pub fn filter_locations(
    locations: &[LocationRecord],
    min_pop: u64,
    max_pop: u64,
    sample_size: usize,
    seed: u64,
) -> Result<Vec<LocationRecord>> {
    if min_pop > max_pop {
        return Err(Error::Usage(format!(
            "population band is empty: {min_pop} > {max_pop}"
        )));
    }
    let eligible: Vec<&LocationRecord> = locations
        .iter()
        .filter(|l| l.population >= min_pop && l.population <= max_pop)
        .collect();
    if eligible.is_empty() {
        return Err(Error::Dataset(format!(
            "no locations with population in [{min_pop}, {max_pop}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = eligible;
    pool.shuffle(&mut rng);
    pool.truncate(sample_size);
    pool.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(pool.into_iter().cloned().collect())
}

/// One engine result inside a candidate set, with its relevance estimate.
#[derive(Debug, Clone)]
pub struct CandidateResult {
    pub doc_id: String,
    pub title: String,
    pub company: String,
    pub estimated_relevant: bool,
}

/// A candidate (query, location) result set awaiting selection.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub query: String,
    pub location: String,
    pub results: Vec<CandidateResult>,
}

impl CandidateSet {
    pub fn relevant_fraction(&self) -> f64 {
        if self.results.is_empty() {
            return 0.0;
        }
        let relevant = self.results.iter().filter(|r| r.estimated_relevant).count();
        relevant as f64 / self.results.len() as f64
    }

    /// Results sharing an identical (title, company) pair with an earlier one.
    pub fn duplicate_count(&self) -> usize {
        let mut seen: Vec<(&str, &str)> = Vec::with_capacity(self.results.len());
        let mut duplicates = 0;
        for r in &self.results {
            let key = (r.title.as_str(), r.company.as_str());
            if seen.contains(&key) {
                duplicates += 1;
            } else {
                seen.push(key);
            }
        }
        duplicates
    }
}

/// Keep sets whose size lies in [min_results, max_results] and whose
/// relevant fraction lies in the balance band (inclusive).
pub fn filter_result_sets(
    candidates: Vec<CandidateSet>,
    min_results: usize,
    max_results: usize,
    balance_band: (f64, f64),
) -> Vec<CandidateSet> {
    let (lo, hi) = balance_band;
    candidates
        .into_iter()
        .filter(|set| {
            let n = set.results.len();
            if n < min_results || n > max_results {
                return false;
            }
            let fraction = set.relevant_fraction();
            fraction >= lo && fraction <= hi
        })
        .collect()
}

/// For each query, pick the accepted set with the fewest duplicate jobs;
/// ties go to the lexicographically smallest location name.
pub fn pick_location_per_query(accepted: Vec<CandidateSet>) -> BTreeMap<String, CandidateSet> {
    let mut chosen: BTreeMap<String, CandidateSet> = BTreeMap::new();
    for set in accepted {
        match chosen.get(&set.query) {
            None => {
                chosen.insert(set.query.clone(), set);
            }
            Some(current) => {
                let better = set.duplicate_count() < current.duplicate_count()
                    || (set.duplicate_count() == current.duplicate_count()
                        && set.location < current.location);
                if better {
                    chosen.insert(set.query.clone(), set);
                }
            }
        }
    }
    chosen
}

/// Tagged-query TSV: `query<TAB>space-separated-tags`, `#` comments.
pub fn load_tagged_queries(path: &Path) -> Result<Vec<TaggedQuery>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tagged_queries(&text)
}

pub fn parse_tagged_queries(text: &str) -> Result<Vec<TaggedQuery>> {
    let mut queries = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (query, tags) = line.split_once('\t').ok_or_else(|| {
            Error::Dataset(format!("line {}: expected `query<TAB>tags`", idx + 1))
        })?;
        let tags: Vec<String> = tags.split_whitespace().map(str::to_string).collect();
        queries.push(TaggedQuery::new(query.trim(), tags)?);
    }
    if queries.is_empty() {
        return Err(Error::Dataset("no tagged queries in file".into()));
    }
    Ok(queries)
}

/// Locations TSV: `name<TAB>population`.
pub fn load_locations(path: &Path) -> Result<Vec<LocationRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut locations = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, population) = line.split_once('\t').ok_or_else(|| {
            Error::Dataset(format!("line {}: expected `name<TAB>population`", idx + 1))
        })?;
        let population: u64 = population.trim().parse().map_err(|_| {
            Error::Dataset(format!("line {}: bad population {population:?}", idx + 1))
        })?;
        locations.push(LocationRecord {
            name: name.trim().to_string(),
            population,
        });
    }
    if locations.is_empty() {
        return Err(Error::Dataset("no locations in file".into()));
    }
    Ok(locations)
}

/// Exclusion list: one query per line.
pub fn load_exclusions(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}
