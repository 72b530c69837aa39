//! Text analysis: lowercasing, tokenization, rewrite rules, and light
//! suffix-stripping stems. The same pipeline runs over document fields and
//! queries so both sides share a vocabulary.
//!
//! Each document yields raw-token fields (`title`, `description`, `company`,
//! `tags`) plus `_analyzed` variants that additionally go through rewrites
//! and stemming. Raw and analyzed variants carry independent boosts.

use std::collections::BTreeMap;
use std::fmt;

use icu_normalizer::ComposingNormalizer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum length of a stemmed token; rules producing shorter results are skipped.
pub const MIN_STEM_LEN: usize = 3;

const DEFAULT_RULES: &str = include_str!("../data/analyzer_default.txt");

/// How a field's text is processed before indexing and matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnalysisMode {
    /// Lowercase + tokenize only.
    Raw,
    /// Lowercase + tokenize + rewrites + stems.
    Analyzed,
}

/// Fixed document schema: every indexed field with its analysis mode.
pub const SCHEMA: &[(&str, AnalysisMode)] = &[
    ("title", AnalysisMode::Raw),
    ("title_analyzed", AnalysisMode::Analyzed),
    ("description", AnalysisMode::Raw),
    ("description_analyzed", AnalysisMode::Analyzed),
    ("company", AnalysisMode::Raw),
    ("company_analyzed", AnalysisMode::Analyzed),
    ("tags", AnalysisMode::Raw),
];

pub fn schema_field_names() -> Vec<String> {
    SCHEMA.iter().map(|(name, _)| name.to_string()).collect()
}

pub fn schema_mode(field: &str) -> Option<AnalysisMode> {
    SCHEMA
        .iter()
        .find(|(name, _)| *name == field)
        .map(|(_, mode)| *mode)
}

/// A rewrite rule: a token-sequence pattern replaced by another sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteRule {
    pub pattern: Vec<String>,
    pub replacement: Vec<String>,
}

/// A stem rule: strip `suffix`, append `replacement`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StemRule {
    pub suffix: String,
    pub replacement: String,
}

impl StemRule {
    /// A stop rule leaves the token unchanged and halts the scan.
    pub fn is_stop(&self) -> bool {
        self.suffix == self.replacement
    }
}

/// Immutable analyzer configuration. All operations on it are pure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub rewrite_rules: Vec<RewriteRule>,
    pub stem_rules: Vec<StemRule>,
    pub lowercase: bool,
}

/// An ordered sequence of non-empty tokens, free of delimiter characters.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence(pub Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Unique tokens in first-occurrence order.
    pub fn dedup_tokens(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for t in &self.0 {
            if !seen.contains(t) {
                seen.push(t.clone());
            }
        }
        seen
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.join(" "))
    }
}

/// A raw job posting as read from the corpus file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobDocument {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub company: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

/// Both analysis forms of a query; raw-mode fields match against `raw`,
/// analyzed-mode fields against `analyzed`.
#[derive(Debug, Clone)]
pub struct AnalyzedQuery {
    pub raw: TokenSequence,
    pub analyzed: TokenSequence,
}

impl AnalyzedQuery {
    pub fn for_mode(&self, mode: AnalysisMode) -> &TokenSequence {
        match mode {
            AnalysisMode::Raw => &self.raw,
            AnalysisMode::Analyzed => &self.analyzed,
        }
    }
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        AnalyzerConfig::parse(DEFAULT_RULES).expect("bundled default rules parse")
    }
}

impl AnalyzerConfig {
    /// Parse a rule file: `lhs<TAB>rhs` rewrites, `-suffix<TAB>replacement` stems.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rewrites = Vec::new();
        let mut stems = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(stem_part) = line.strip_prefix('-') {
                // Stem rule; a missing tab means the suffix is stripped.
                let (suffix, rhs) = match stem_part.split_once('\t') {
                    Some((s, r)) => (s.trim(), r.trim()),
                    None => (stem_part.trim(), ""),
                };
                if suffix.is_empty() {
                    return Err(Error::Analyzer(format!(
                        "rule line {line_no}: empty suffix"
                    )));
                }
                stems.push(StemRule {
                    suffix: suffix.to_string(),
                    replacement: rhs.to_string(),
                });
            } else {
                let (lhs, rhs) = line.split_once('\t').ok_or_else(|| {
                    Error::Analyzer(format!("rule line {line_no}: expected `lhs<TAB>rhs`"))
                })?;
                let lhs = lhs.trim();
                let rhs = rhs.trim();
                let pattern: Vec<String> = lhs.split_whitespace().map(str::to_string).collect();
                let replacement: Vec<String> = rhs.split_whitespace().map(str::to_string).collect();
                if pattern.is_empty() {
                    return Err(Error::Analyzer(format!(
                        "rule line {line_no}: empty pattern"
                    )));
                }
                if replacement.is_empty() {
                    return Err(Error::Analyzer(format!(
                        "rule line {line_no}: empty replacement (token deletion is not supported)"
                    )));
                }
                rewrites.push(RewriteRule {
                    pattern,
                    replacement,
                });
            }
        }
        let config = AnalyzerConfig {
            rewrite_rules: rewrites,
            stem_rules: stems,
            lowercase: true,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Rule hygiene, run at load time:
    /// - a rewrite replacement must not contain its own pattern (self-retrigger);
    /// - a non-stop stem replacement must not be re-stemmable by any rule.
    pub fn validate(&self) -> Result<()> {
        for rule in &self.rewrite_rules {
            if contains_subsequence(&rule.replacement, &rule.pattern) {
                return Err(Error::Analyzer(format!(
                    "rewrite rule {:?} -> {:?} re-triggers itself",
                    rule.pattern.join(" "),
                    rule.replacement.join(" ")
                )));
            }
        }
        for rule in &self.stem_rules {
            if rule.is_stop() || rule.replacement.is_empty() {
                continue;
            }
            for other in &self.stem_rules {
                if other.is_stop() {
                    continue;
                }
                if rule.replacement.ends_with(&other.suffix)
                    || other.suffix.ends_with(&rule.replacement)
                {
                    return Err(Error::Analyzer(format!(
                        "stem rule -{} -> {:?} can re-trigger rule -{}",
                        rule.suffix, rule.replacement, other.suffix
                    )));
                }
            }
        }
        Ok(())
    }

    /// Split text into lowercase tokens on any non-alphanumeric character.
    /// Input is NFC-normalized first so identical glyphs tokenize identically.
    pub fn tokenize(&self, text: &str) -> TokenSequence {
        let normalized = ComposingNormalizer::new_nfc().normalize(text);
        let source = if self.lowercase {
            normalized.to_lowercase()
        } else {
            normalized.into_owned()
        };
        let tokens = source
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect();
        TokenSequence(tokens)
    }

    /// Single left-to-right rewrite pass. At each position the matching rule
    /// with the longest pattern wins (ties go to the earlier rule); its
    /// replacement is emitted verbatim and never re-examined.
    pub fn apply_rewrites(&self, tokens: &TokenSequence) -> TokenSequence {
        let input = &tokens.0;
        let mut out = Vec::with_capacity(input.len());
        let mut pos = 0;
        while pos < input.len() {
            let mut best: Option<&RewriteRule> = None;
            for rule in &self.rewrite_rules {
                if input[pos..].starts_with(&rule.pattern[..]) {
                    let better = match best {
                        Some(b) => rule.pattern.len() > b.pattern.len(),
                        None => true,
                    };
                    if better {
                        best = Some(rule);
                    }
                }
            }
            match best {
                Some(rule) => {
                    out.extend(rule.replacement.iter().cloned());
                    pos += rule.pattern.len();
                }
                None => {
                    out.push(input[pos].clone());
                    pos += 1;
                }
            }
        }
        TokenSequence(out)
    }

    /// Apply at most one stem rule: the first whose suffix matches and whose
    /// result keeps at least [`MIN_STEM_LEN`] characters.
    pub fn stem(&self, token: &str) -> String {
        for rule in &self.stem_rules {
            if let Some(prefix) = token.strip_suffix(rule.suffix.as_str()) {
                let result_len = prefix.chars().count() + rule.replacement.chars().count();
                if result_len < MIN_STEM_LEN {
                    continue;
                }
                if rule.is_stop() {
                    return token.to_string();
                }
                return format!("{prefix}{}", rule.replacement);
            }
        }
        token.to_string()
    }

    fn stem_all(&self, tokens: TokenSequence) -> TokenSequence {
        TokenSequence(tokens.0.iter().map(|t| self.stem(t)).collect())
    }

    /// Full pipeline for analyzed-mode text: tokenize, rewrite, stem.
    pub fn analyze_text(&self, text: &str) -> TokenSequence {
        self.stem_all(self.apply_rewrites(&self.tokenize(text)))
    }

    /// Analyzed image of a single raw token (used for coverage checks).
    pub fn analyze_token(&self, token: &str) -> Vec<String> {
        self.stem_all(self.apply_rewrites(&TokenSequence(vec![token.to_string()])))
            .0
    }

    /// Both query forms in one pass.
    pub fn analyze_query(&self, query: &str) -> AnalyzedQuery {
        let raw = self.tokenize(query);
        let analyzed = self.stem_all(self.apply_rewrites(&raw));
        AnalyzedQuery { raw, analyzed }
    }

    /// Produce every schema field's token sequence for one document.
    /// A document without a title is rejected.
    pub fn analyze_document(&self, job: &JobDocument) -> Result<BTreeMap<String, TokenSequence>> {
        let title = self.tokenize(&job.title);
        if title.is_empty() {
            return Err(Error::Analyzer(format!(
                "document {:?} has no title tokens",
                job.id
            )));
        }
        let description = self.tokenize(&job.description);
        let company = self.tokenize(&job.company);
        let tags_text = job.tags.join(" ");
        let tags = self.tokenize(&tags_text);

        let mut fields = BTreeMap::new();
        fields.insert("title".to_string(), title.clone());
        fields.insert(
            "title_analyzed".to_string(),
            self.stem_all(self.apply_rewrites(&title)),
        );
        fields.insert("description".to_string(), description.clone());
        fields.insert(
            "description_analyzed".to_string(),
            self.stem_all(self.apply_rewrites(&description)),
        );
        fields.insert("company".to_string(), company.clone());
        fields.insert(
            "company_analyzed".to_string(),
            self.stem_all(self.apply_rewrites(&company)),
        );
        fields.insert("tags".to_string(), tags);
        Ok(fields)
    }
}

fn contains_subsequence(haystack: &[String], needle: &[String]) -> bool {
    if needle.is_empty() || haystack.len() < needle.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}
