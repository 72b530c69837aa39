//! Sequential model-based optimization of relevance configs over discrete
//! parameter spaces, plus exhaustive BM25 (b, k) grid sweeps and segment
//! reporting.
//!
//! The search runs in two phases: seeded unique random draws warm the
//! surrogate, then a Gaussian process scores every unevaluated assignment by
//! expected improvement over the incumbent. Suggestions are a pure function
//! of (history, space, seed), so identical runs produce identical logs and
//! interrupted runs resume exactly.

pub mod gp;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::index::{Bm25Params, Index};
use crate::kv::{self, KvValue};
use crate::metrics::{mean_objective, JudgmentSet};
use crate::relevance::{score_and_rank, Combiner, RelevanceConfig};

/// Discrete candidate lists per tunable parameter (in declaration order)
/// plus pinned fixed parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpace {
    pub tunable: Vec<(String, Vec<f64>)>,
    pub fixed: BTreeMap<String, f64>,
}

/// Maximum candidate values per tunable parameter.
pub const MAX_VALUES_PER_PARAMETER: usize = 10;

impl ParameterSpace {
    /// Parse the key-value space format: list values are tunable, scalars
    /// are pinned.
    pub fn parse(text: &str) -> Result<Self> {
        let mut tunable = Vec::new();
        let mut fixed = BTreeMap::new();
        for entry in kv::parse(text)? {
            validate_param_key(&entry.key)
                .map_err(|e| Error::Config(format!("line {}: {e}", entry.line)))?;
            match entry.value {
                KvValue::List(items) => {
                    let mut values = Vec::with_capacity(items.len());
                    for item in &items {
                        values.push(kv::parse_f64(&entry.key, item, entry.line)?);
                    }
                    if values.is_empty() {
                        return Err(Error::Config(format!(
                            "line {}: tunable {} has no candidate values",
                            entry.line, entry.key
                        )));
                    }
                    if values.len() > MAX_VALUES_PER_PARAMETER {
                        return Err(Error::Config(format!(
                            "line {}: tunable {} has {} values; the limit is {}",
                            entry.line,
                            entry.key,
                            values.len(),
                            MAX_VALUES_PER_PARAMETER
                        )));
                    }
                    for (i, v) in values.iter().enumerate() {
                        if values[..i].contains(v) {
                            return Err(Error::Config(format!(
                                "line {}: tunable {} repeats value {v}",
                                entry.line, entry.key
                            )));
                        }
                        validate_param_value(&entry.key, *v)
                            .map_err(|e| Error::Config(format!("line {}: {e}", entry.line)))?;
                    }
                    tunable.push((entry.key, values));
                }
                KvValue::Scalar(raw) => {
                    let v = kv::parse_f64(&entry.key, &raw, entry.line)?;
                    validate_param_value(&entry.key, v)
                        .map_err(|e| Error::Config(format!("line {}: {e}", entry.line)))?;
                    fixed.insert(entry.key, v);
                }
            }
        }
        if tunable.is_empty() {
            return Err(Error::Config(
                "parameter space has no tunable parameters".into(),
            ));
        }
        Ok(ParameterSpace { tunable, fixed })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Total assignments (product of candidate counts).
    pub fn size(&self) -> usize {
        self.tunable
            .iter()
            .fold(1usize, |acc, (_, vs)| acc.saturating_mul(vs.len()))
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.tunable.iter().map(|(name, _)| name.as_str()).collect()
    }

    /// One-hot encoding dimension.
    pub fn encoding_len(&self) -> usize {
        self.tunable.iter().map(|(_, vs)| vs.len()).sum()
    }

    /// Concatenated one-hot encoding in declared parameter order.
    pub fn encode(&self, assignment: &Assignment) -> Vec<f64> {
        assert_eq!(assignment.0.len(), self.tunable.len());
        let mut out = Vec::with_capacity(self.encoding_len());
        for (pi, (_, values)) in self.tunable.iter().enumerate() {
            let chosen = assignment.0[pi];
            for vi in 0..values.len() {
                out.push(if vi == chosen { 1.0 } else { 0.0 });
            }
        }
        out
    }

    /// Invert [`encode`]; errors on vectors that are not valid one-hot blocks.
    pub fn decode(&self, encoding: &[f64]) -> Result<Assignment> {
        if encoding.len() != self.encoding_len() {
            return Err(Error::Tuner(format!(
                "encoding length {} does not match space ({})",
                encoding.len(),
                self.encoding_len()
            )));
        }
        let mut indices = Vec::with_capacity(self.tunable.len());
        let mut offset = 0;
        for (name, values) in &self.tunable {
            let block = &encoding[offset..offset + values.len()];
            let ones: Vec<usize> = block
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, _)| i)
                .collect();
            match ones.as_slice() {
                [single] if block[*single] == 1.0 => indices.push(*single),
                _ => {
                    return Err(Error::Tuner(format!(
                        "encoding block for {name} is not one-hot"
                    )))
                }
            }
            offset += values.len();
        }
        Ok(Assignment(indices))
    }

    /// Map parameter values to an assignment, requiring every tunable to be
    /// present and every value to come from its candidate list.
    pub fn assignment_from_values(&self, values: &BTreeMap<String, f64>) -> Result<Assignment> {
        let mut indices = Vec::with_capacity(self.tunable.len());
        for (name, candidates) in &self.tunable {
            let v = values
                .get(name)
                .ok_or_else(|| Error::Tuner(format!("assignment is missing parameter {name}")))?;
            let idx = candidates.iter().position(|c| c == v).ok_or_else(|| {
                Error::Tuner(format!("value {v} for {name} is not in its candidate list"))
            })?;
            indices.push(idx);
        }
        Ok(Assignment(indices))
    }

    pub fn values_of(&self, assignment: &Assignment) -> Vec<(String, f64)> {
        self.tunable
            .iter()
            .zip(&assignment.0)
            .map(|((name, values), idx)| (name.clone(), values[*idx]))
            .collect()
    }

    /// All assignments in lexicographic index order.
    pub fn enumerate(&self) -> Vec<Assignment> {
        let mut out = Vec::with_capacity(self.size());
        let mut indices = vec![0usize; self.tunable.len()];
        loop {
            out.push(Assignment(indices.clone()));
            let mut pos = self.tunable.len();
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                indices[pos] += 1;
                if indices[pos] < self.tunable[pos].1.len() {
                    break;
                }
                indices[pos] = 0;
            }
        }
    }

    /// Base config overridden by pinned values then the assignment.
    pub fn materialize(
        &self,
        base: &RelevanceConfig,
        assignment: &Assignment,
    ) -> Result<RelevanceConfig> {
        let mut config = base.clone();
        for (key, value) in &self.fixed {
            apply_param(&mut config, key, *value)?;
        }
        for (key, value) in self.values_of(assignment) {
            apply_param(&mut config, &key, value)?;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Chosen candidate index per tunable parameter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment(pub Vec<usize>);

fn validate_param_key(key: &str) -> Result<()> {
    if key.strip_prefix("boost.").is_some() {
        return Ok(());
    }
    if let Some(rest) = key.strip_prefix("bm25.") {
        if rest.rsplit_once('.').map(|(_, c)| c == "k" || c == "b") == Some(true) {
            return Ok(());
        }
        return Err(Error::Config(format!(
            "bad bm25 parameter {key:?}; expected bm25.<field>.k or bm25.<field>.b"
        )));
    }
    match key {
        "combiner.mix" | "coverage_penalty_base" | "title_complete_bonus" => Ok(()),
        other => Err(Error::Config(format!(
            "{other:?} does not name a tunable relevance parameter"
        ))),
    }
}

fn validate_param_value(key: &str, value: f64) -> Result<()> {
    let ok = if key.starts_with("boost.") {
        value >= 0.0
    } else if key.starts_with("bm25.") && key.ends_with(".b") {
        (0.0..=1.0).contains(&value)
    } else if key.starts_with("bm25.") && key.ends_with(".k") {
        value >= 0.0
    } else {
        match key {
            "combiner.mix" => (0.0..=1.0).contains(&value),
            "coverage_penalty_base" => value > 0.0 && value <= 1.0,
            "title_complete_bonus" => value >= 0.0,
            _ => false,
        }
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "value {value} is out of range for {key}"
        )))
    }
}

fn apply_param(config: &mut RelevanceConfig, key: &str, value: f64) -> Result<()> {
    validate_param_value(key, value)?;
    if let Some(field) = key.strip_prefix("boost.") {
        config.field_boosts.insert(field.to_string(), value);
        return Ok(());
    }
    if let Some(rest) = key.strip_prefix("bm25.") {
        let (field, component) = rest.rsplit_once('.').expect("validated key");
        if field == "default" {
            match component {
                "k" => config.default_bm25.k = value,
                _ => config.default_bm25.b = value,
            }
            return Ok(());
        }
        let params = config
            .bm25_overrides
            .entry(field.to_string())
            .or_insert(config.default_bm25);
        match component {
            "k" => params.k = value,
            _ => params.b = value,
        }
        return Ok(());
    }
    match key {
        "combiner.mix" => config.combiner = Combiner::Hybrid(value),
        "coverage_penalty_base" => config.coverage_penalty_base = value,
        "title_complete_bonus" => config.title_complete_bonus = value,
        other => return Err(Error::Tuner(format!("unknown parameter {other:?}"))),
    }
    Ok(())
}

/// Which phase produced a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    RandomInit,
    ModelGuided,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::RandomInit => write!(f, "random_init"),
            Phase::ModelGuided => write!(f, "model_guided"),
        }
    }
}

impl Phase {
    fn parse(s: &str) -> Result<Self> {
        match s {
            "random_init" => Ok(Phase::RandomInit),
            "model_guided" => Ok(Phase::ModelGuided),
            other => Err(Error::Tuner(format!("unknown phase {other:?}"))),
        }
    }
}

/// One evaluated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub trial_index: usize,
    pub phase: Phase,
    pub assignment: Assignment,
    pub objective: f64,
}

/// Ordered record of one tuning run.
#[derive(Debug, Clone)]
pub struct TrialLog {
    pub trials: Vec<Trial>,
    pub seed: u64,
    pub space: ParameterSpace,
}

impl TrialLog {
    /// Index of the max-objective trial; ties go to the earliest.
    pub fn best_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, trial) in self.trials.iter().enumerate() {
            let improve = match best {
                Some(b) => trial.objective > self.trials[b].objective,
                None => true,
            };
            if improve {
                best = Some(i);
            }
        }
        best
    }

    pub fn best(&self) -> Option<&Trial> {
        self.best_index().map(|i| &self.trials[i])
    }
}

/// Number of seeded random warm-up trials before the surrogate takes over.
pub fn n_init(space: &ParameterSpace) -> usize {
    8usize.max(2 * space.tunable.len())
}

fn trial_rng(seed: u64, trial_index: usize) -> ChaCha8Rng {
    // splitmix64 over (seed, trial) so resumed runs redraw identically.
    let mut z = seed.wrapping_add(0x9E3779B97F4A7C15u64.wrapping_mul(trial_index as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Propose the next assignment given the history. Random-init draws are
/// seeded, unique, and in-space; afterwards a GP fitted to the one-hot
/// encodings scores every unevaluated assignment by expected improvement
/// (ties resolved toward the lexicographically smallest encoding). If the
/// space is exhausted, the incumbent best is returned.
pub fn suggest(trials: &[Trial], space: &ParameterSpace, seed: u64) -> Result<Assignment> {
    let evaluated: BTreeSet<&Assignment> = trials.iter().map(|t| &t.assignment).collect();
    if evaluated.len() >= space.size() {
        let log = TrialLog {
            trials: trials.to_vec(),
            seed,
            space: space.clone(),
        };
        return log
            .best()
            .map(|t| t.assignment.clone())
            .ok_or_else(|| Error::Tuner("empty space".into()));
    }

    if trials.len() < n_init(space) {
        let mut rng = trial_rng(seed, trials.len());
        for _ in 0..1000 {
            let candidate = Assignment(
                space
                    .tunable
                    .iter()
                    .map(|(_, values)| rng.random_range(0..values.len()))
                    .collect(),
            );
            if !evaluated.contains(&candidate) {
                return Ok(candidate);
            }
        }
        // Dense history: fall back to the first unevaluated assignment.
        return space
            .enumerate()
            .into_iter()
            .find(|a| !evaluated.contains(a))
            .ok_or_else(|| Error::Tuner("space exhausted".into()));
    }

    let x: Vec<Vec<f64>> = trials.iter().map(|t| space.encode(&t.assignment)).collect();
    let y: Vec<f64> = trials.iter().map(|t| t.objective).collect();
    let model = gp::GpModel::fit(&x, &y);
    let best_objective = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    // Ties in expected improvement (in practice: exact zeros under a
    // confident surrogate) fall back to the most uncertain candidate, then
    // to the lexicographically smallest encoding.
    let mut best: Option<(f64, f64, Vec<f64>, Assignment)> = None;
    for candidate in space.enumerate() {
        if evaluated.contains(&candidate) {
            continue;
        }
        let encoding = space.encode(&candidate);
        let (mean, var) = model.predict(&encoding);
        let ei = gp::expected_improvement(mean, var.sqrt(), best_objective);
        let replace = match &best {
            None => true,
            Some((best_ei, best_var, best_enc, _)) => {
                ei > *best_ei
                    || (ei == *best_ei && var > *best_var)
                    || (ei == *best_ei
                        && var == *best_var
                        && encoding.as_slice() < best_enc.as_slice())
            }
        };
        if replace {
            best = Some((ei, var, encoding, candidate));
        }
    }
    best.map(|(_, _, _, a)| a)
        .ok_or_else(|| Error::Tuner("no unevaluated assignments remain".into()))
}

/// Core optimization loop over an arbitrary objective. `initial` carries
/// already-evaluated trials when resuming; `on_trial` runs after each new
/// evaluation (persisting the log incrementally).
pub fn run_optimization_with<F>(
    space: &ParameterSpace,
    budget: usize,
    seed: u64,
    initial: Vec<Trial>,
    mut objective: F,
    on_trial: &mut dyn FnMut(&Trial) -> Result<()>,
) -> Result<TrialLog>
where
    F: FnMut(&Assignment) -> Result<f64>,
{
    let warmup = n_init(space).min(space.size());
    if budget < warmup {
        return Err(Error::Usage(format!(
            "budget {budget} is below the warm-up trial count {warmup}"
        )));
    }
    let mut trials = initial;
    while trials.len() < budget {
        let evaluated: BTreeSet<&Assignment> = trials.iter().map(|t| &t.assignment).collect();
        if evaluated.len() >= space.size() {
            break;
        }
        let trial_index = trials.len();
        let assignment = suggest(&trials, space, seed)?;
        let phase = if trial_index < n_init(space) {
            Phase::RandomInit
        } else {
            Phase::ModelGuided
        };
        let objective_value = objective(&assignment)?;
        let trial = Trial {
            trial_index,
            phase,
            assignment,
            objective: objective_value,
        };
        on_trial(&trial)?;
        trials.push(trial);
    }
    Ok(TrialLog {
        trials,
        seed,
        space: space.clone(),
    })
}

/// Ranked doc ids for one query under one config, over the whole index.
fn run_engine(query: &str, index: &Index, config: &RelevanceConfig) -> Result<Vec<String>> {
    let results = score_and_rank(query, index, index.analyzer(), config, index.doc_count())?;
    Ok(results.into_iter().map(|r| r.doc_id).collect())
}

/// Evaluate `config` as mean NDCG@k over the judgment sets.
pub fn evaluate_config(
    config: &RelevanceConfig,
    sets: &[JudgmentSet],
    index: &Index,
    k: usize,
    threshold: u8,
) -> Result<f64> {
    let report = mean_objective(
        sets,
        |query, _location| run_engine(query, index, config),
        k,
        threshold,
    )?;
    Ok(report.mean_ndcg)
}

/// Bayesian-optimize the tunable parameters, maximizing mean NDCG@k.
#[allow(clippy::too_many_arguments)]
pub fn run_optimization(
    space: &ParameterSpace,
    sets: &[JudgmentSet],
    index: &Index,
    base_config: &RelevanceConfig,
    budget: usize,
    seed: u64,
    k: usize,
    threshold: u8,
    initial: Vec<Trial>,
    on_trial: &mut dyn FnMut(&Trial) -> Result<()>,
) -> Result<TrialLog> {
    if sets.is_empty() {
        return Err(Error::Judgments("no judgment sets to tune against".into()));
    }
    run_optimization_with(
        space,
        budget,
        seed,
        initial,
        |assignment| {
            let config = space.materialize(base_config, assignment)?;
            evaluate_config(&config, sets, index, k, threshold)
        },
        on_trial,
    )
}

/// Mean NDCG@k over a full (b, k) grid for one field, all other parameters
/// held at the base config.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepMatrix {
    pub field: String,
    pub b_values: Vec<f64>,
    pub k_values: Vec<f64>,
    /// cells[i][j] = objective at (b_values[i], k_values[j]).
    pub cells: Vec<Vec<f64>>,
}

#[allow(clippy::too_many_arguments)]
pub fn sweep_bm25(
    field: &str,
    b_values: &[f64],
    k_values: &[f64],
    base_config: &RelevanceConfig,
    sets: &[JudgmentSet],
    index: &Index,
    k_cutoff: usize,
    threshold: u8,
) -> Result<SweepMatrix> {
    if b_values.is_empty() || k_values.is_empty() {
        return Err(Error::Usage(
            "sweep needs at least one b and one k value".into(),
        ));
    }
    if !crate::analyzer::schema_field_names().contains(&field.to_string()) {
        return Err(Error::Usage(format!("unknown sweep field {field:?}")));
    }
    for b in b_values {
        Bm25Params { k: 1.0, b: *b }.validate()?;
    }
    for k in k_values {
        Bm25Params { k: *k, b: 0.5 }.validate()?;
    }
    let mut cells = Vec::with_capacity(b_values.len());
    for b in b_values {
        let mut row = Vec::with_capacity(k_values.len());
        for k in k_values {
            let mut config = base_config.clone();
            config
                .bm25_overrides
                .insert(field.to_string(), Bm25Params { k: *k, b: *b });
            config.validate()?;
            row.push(evaluate_config(&config, sets, index, k_cutoff, threshold)?);
        }
        cells.push(row);
    }
    Ok(SweepMatrix {
        field: field.to_string(),
        b_values: b_values.to_vec(),
        k_values: k_values.to_vec(),
        cells,
    })
}

/// Per-segment means for the best config plus per-query deltas against a
/// baseline, worst losses first.
#[derive(Debug, Clone)]
pub struct SegmentReport {
    pub per_segment: Vec<SegmentMean>,
    pub per_query: Vec<QueryDelta>,
}

#[derive(Debug, Clone)]
pub struct SegmentMean {
    pub segment: String,
    pub mean_ndcg: f64,
    pub set_count: usize,
}

#[derive(Debug, Clone)]
pub struct QueryDelta {
    pub query: String,
    pub location: String,
    pub segment: String,
    pub best_ndcg: f64,
    pub baseline_ndcg: f64,
    pub delta: f64,
}

pub fn segment_report(
    best_config: &RelevanceConfig,
    baseline_config: &RelevanceConfig,
    sets: &[(JudgmentSet, String)],
    index: &Index,
    k: usize,
    threshold: u8,
) -> Result<SegmentReport> {
    let plain: Vec<JudgmentSet> = sets.iter().map(|(s, _)| s.clone()).collect();
    let best = mean_objective(
        &plain,
        |query, _| run_engine(query, index, best_config),
        k,
        threshold,
    )?;
    let baseline = mean_objective(
        &plain,
        |query, _| run_engine(query, index, baseline_config),
        k,
        threshold,
    )?;

    let mut per_query: Vec<QueryDelta> = Vec::with_capacity(sets.len());
    let mut by_segment: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (i, (set, segment)) in sets.iter().enumerate() {
        let best_ndcg = best.per_set[i].ndcg;
        let baseline_ndcg = baseline.per_set[i].ndcg;
        per_query.push(QueryDelta {
            query: set.query.clone(),
            location: set.location.clone(),
            segment: segment.clone(),
            best_ndcg,
            baseline_ndcg,
            delta: best_ndcg - baseline_ndcg,
        });
        let entry = by_segment.entry(segment.clone()).or_insert((0.0, 0));
        entry.0 += best_ndcg;
        entry.1 += 1;
    }
    per_query.sort_by(|a, b| {
        a.delta
            .partial_cmp(&b.delta)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.query.cmp(&b.query))
            .then_with(|| a.location.cmp(&b.location))
    });
    let per_segment = by_segment
        .into_iter()
        .map(|(segment, (sum, count))| SegmentMean {
            segment,
            mean_ndcg: sum / count as f64,
            set_count: count,
        })
        .collect();
    Ok(SegmentReport {
        per_segment,
        per_query,
    })
}

// --- CSV serialization -----------------------------------------------------

/// Trial log rows: `trial,phase,<param...>,objective`, loadable directly as
/// parallel-coordinates data.
pub fn trial_log_to_csv(log: &TrialLog) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["trial".to_string(), "phase".to_string()];
    header.extend(log.space.param_names().iter().map(|s| s.to_string()));
    header.push("objective".to_string());
    writer.write_record(&header)?;
    for trial in &log.trials {
        let mut row = vec![trial.trial_index.to_string(), trial.phase.to_string()];
        row.extend(
            log.space
                .values_of(&trial.assignment)
                .iter()
                .map(|(_, v)| v.to_string()),
        );
        row.push(trial.objective.to_string());
        writer.write_record(&row)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Tuner(format!("csv flush: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Tuner(format!("csv utf8: {e}")))
}

/// Load trial rows back against the same space (used to resume runs).
pub fn trials_from_csv(text: &str, space: &ParameterSpace) -> Result<Vec<Trial>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let mut expected = vec!["trial".to_string(), "phase".to_string()];
    expected.extend(space.param_names().iter().map(|s| s.to_string()));
    expected.push("objective".to_string());
    let got: Vec<String> = headers.iter().map(str::to_string).collect();
    if got != expected {
        return Err(Error::Tuner(format!(
            "trial log columns {got:?} do not match the space ({expected:?})"
        )));
    }
    let mut trials = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let parse_f64 = |i: usize| -> Result<f64> {
            record[i].parse::<f64>().map_err(|_| {
                Error::Tuner(format!("row {}: bad number {:?}", row_idx + 1, &record[i]))
            })
        };
        let trial_index: usize = record[0]
            .parse()
            .map_err(|_| Error::Tuner(format!("row {}: bad trial index", row_idx + 1)))?;
        if trial_index != row_idx {
            return Err(Error::Tuner(format!(
                "row {}: trial indices must be contiguous from 0",
                row_idx + 1
            )));
        }
        let phase = Phase::parse(&record[1])?;
        let mut values = BTreeMap::new();
        for (pi, (name, _)) in space.tunable.iter().enumerate() {
            values.insert(name.clone(), parse_f64(2 + pi)?);
        }
        let assignment = space.assignment_from_values(&values)?;
        let objective = parse_f64(2 + space.tunable.len())?;
        trials.push(Trial {
            trial_index,
            phase,
            assignment,
            objective,
        });
    }
    Ok(trials)
}

/// Heatmap CSV: header `b\k,<k...>`, one row per b value.
pub fn sweep_to_csv(matrix: &SweepMatrix) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["b\\k".to_string()];
    header.extend(matrix.k_values.iter().map(|k| k.to_string()));
    writer.write_record(&header)?;
    for (i, b) in matrix.b_values.iter().enumerate() {
        let mut row = vec![b.to_string()];
        row.extend(matrix.cells[i].iter().map(|v| v.to_string()));
        writer.write_record(&row)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Tuner(format!("csv flush: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Tuner(format!("csv utf8: {e}")))
}

pub fn sweep_from_csv(text: &str, field: &str) -> Result<SweepMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut rows = reader.records();
    let header = rows
        .next()
        .ok_or_else(|| Error::Tuner("empty heatmap csv".into()))??;
    if &header[0] != "b\\k" {
        return Err(Error::Tuner(format!(
            "bad heatmap header cell {:?}",
            &header[0]
        )));
    }
    let k_values: Vec<f64> = header
        .iter()
        .skip(1)
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Tuner(format!("bad k value {s:?}")))
        })
        .collect::<Result<_>>()?;
    let mut b_values = Vec::new();
    let mut cells = Vec::new();
    for record in rows {
        let record = record?;
        if record.len() != k_values.len() + 1 {
            return Err(Error::Tuner("ragged heatmap row".into()));
        }
        b_values.push(
            record[0]
                .parse::<f64>()
                .map_err(|_| Error::Tuner(format!("bad b value {:?}", &record[0])))?,
        );
        let row: Vec<f64> = record
            .iter()
            .skip(1)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Tuner(format!("bad cell {s:?}")))
            })
            .collect::<Result<_>>()?;
        cells.push(row);
    }
    Ok(SweepMatrix {
        field: field.to_string(),
        b_values,
        k_values,
        cells,
    })
}
