//! Command-line entry point. Subcommands cover index building, search with
//! explanations, evaluation, dataset construction, Bayesian tuning, BM25
//! sweeps, and report emission.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Diagnostics go to
//! stderr; data goes to files or stdout. Every file artifact gets a
//! `<name>.manifest.json` provenance record next to it.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analyzer::AnalyzerConfig;
use crate::dataset::{
    self, filter_locations, filter_result_sets, pick_location_per_query, segment_queries,
    stratified_sample, CandidateResult, CandidateSet, TaggedQuery,
};
use crate::error::{Error, Result};
use crate::index::Index;
use crate::manifest::{sha256_hex, RunManifest};
use crate::metrics::{load_judgments, JudgmentSet, DEFAULT_NDCG_K, DEFAULT_RELEVANCE_THRESHOLD};
use crate::relevance::{explain, score_and_rank, RelevanceConfig};
use crate::storage::{load_index, save_index};
use crate::tuner::{
    run_optimization, segment_report, sweep_bm25, sweep_to_csv, trial_log_to_csv, trials_from_csv,
    ParameterSpace, SegmentReport, Trial, TrialLog,
};

#[derive(Parser)]
#[command(name = "reltune", version, about = "Search-relevance tuning workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a frozen index from a JSON-lines corpus.
    BuildIndex(BuildIndexArgs),
    /// Run one query and print the ranked results.
    Search(SearchArgs),
    /// Score ranked results against graded judgments.
    Evaluate(EvaluateArgs),
    /// Stratified-sample tagged queries by segment.
    SampleQueries(SampleQueriesArgs),
    /// Filter locations to a population band and sample them.
    FilterLocations(FilterLocationsArgs),
    /// Assemble an evaluation set from queries, locations, and labels.
    BuildEvalset(BuildEvalsetArgs),
    /// Bayesian-optimize relevance parameters over a discrete space.
    Tune(TuneArgs),
    /// Evaluate a full BM25 (b, k) grid for one field.
    SweepBm25(SweepArgs),
    /// Segment means and per-query deltas for a finished tuning run.
    Report(ReportArgs),
    /// Factor breakdown for one (query, document) pair.
    Explain(ExplainArgs),
}

#[derive(Args)]
struct BuildIndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Analyzer rule file; bundled defaults when omitted.
    #[arg(long)]
    analyzer: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = 10)]
    limit: usize,
    /// Emit JSON lines with full factor breakdowns instead of CSV.
    #[arg(long)]
    explain: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    judgments: PathBuf,
    #[arg(long, default_value_t = DEFAULT_NDCG_K)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_RELEVANCE_THRESHOLD)]
    threshold: u8,
    /// Write the CSV here instead of stdout (adds a manifest).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct SampleQueriesArgs {
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    exclude: Option<PathBuf>,
    #[arg(long)]
    quota: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FilterLocationsArgs {
    #[arg(long)]
    locations: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    min_pop: u64,
    #[arg(long, default_value_t = 30_000)]
    max_pop: u64,
    #[arg(long)]
    sample: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BuildEvalsetArgs {
    #[arg(long)]
    index: PathBuf,
    /// Corpus the index was built from (for duplicate-job detection).
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    exclude: Option<PathBuf>,
    #[arg(long)]
    locations: PathBuf,
    /// Graded labels pool (TSV) joined onto the selected result sets.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    quota: usize,
    #[arg(long, default_value_t = 5)]
    location_sample: usize,
    #[arg(long, default_value_t = 10_000)]
    min_pop: u64,
    #[arg(long, default_value_t = 30_000)]
    max_pop: u64,
    #[arg(long, default_value_t = 10)]
    min_results: usize,
    #[arg(long, default_value_t = 100)]
    max_results: usize,
    /// Accepted relevant-fraction band, `lo,hi`.
    #[arg(long, default_value = "0.3,0.7")]
    balance: String,
    /// rel_score at or above this estimates a result as relevant when no
    /// label exists for it.
    #[arg(long, default_value_t = 0.5)]
    est_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_RELEVANCE_THRESHOLD)]
    threshold: u8,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    judgments: PathBuf,
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Trial log CSV; an existing compatible log resumes the run.
    #[arg(long)]
    log: PathBuf,
    /// Comma-separated segment keys to tune on (needs --queries for tags).
    #[arg(long)]
    segments: Option<String>,
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_NDCG_K)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_RELEVANCE_THRESHOLD)]
    threshold: u8,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    judgments: PathBuf,
    #[arg(long)]
    field: String,
    /// Comma-separated b values (rows).
    #[arg(long)]
    b: String,
    /// Comma-separated k values (columns).
    #[arg(long)]
    k: String,
    #[arg(long, default_value_t = DEFAULT_NDCG_K)]
    cutoff: usize,
    #[arg(long, default_value_t = DEFAULT_RELEVANCE_THRESHOLD)]
    threshold: u8,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    index: PathBuf,
    /// Base config the tuning run started from.
    #[arg(long)]
    config: PathBuf,
    /// Baseline config the deltas compare against.
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    judgments: PathBuf,
    /// Tagged queries for segment labels; unmatched queries fall into
    /// the `untagged` segment.
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_NDCG_K)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_RELEVANCE_THRESHOLD)]
    threshold: u8,
    #[arg(long)]
    out_dir: PathBuf,
    /// How many worst-losing queries to print to stdout.
    #[arg(long, default_value_t = 10)]
    bottom: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    query: String,
    #[arg(long)]
    doc: String,
}

/// Parse argv and dispatch; returns the process exit status.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own help/usage text.
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::BuildIndex(args) => cmd_build_index(args),
        Command::Search(args) => cmd_search(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::SampleQueries(args) => cmd_sample_queries(args),
        Command::FilterLocations(args) => cmd_filter_locations(args),
        Command::BuildEvalset(args) => cmd_build_evalset(args),
        Command::Tune(args) => cmd_tune(args),
        Command::SweepBm25(args) => cmd_sweep(args),
        Command::Report(args) => cmd_report(args),
        Command::Explain(args) => cmd_explain(args),
    }
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn cmd_build_index(args: BuildIndexArgs) -> Result<()> {
    let mut inputs: Vec<&Path> = vec![&args.corpus];
    if let Some(a) = &args.analyzer {
        inputs.push(a);
    }
    let manifest = RunManifest::start("build-index", &inputs, args.seed)?;
    let analyzer = match &args.analyzer {
        Some(path) => AnalyzerConfig::from_file(path)?,
        None => AnalyzerConfig::default(),
    };
    let index = Index::build_from_corpus(&args.corpus, &analyzer)?;
    save_index(&index, &args.out)?;
    manifest.finish_alongside(&args.out)?;
    eprintln!(
        "indexed {} documents into {} (snapshot {})",
        index.doc_count(),
        args.out.display(),
        &index.snapshot_id()[..12]
    );
    Ok(())
}

fn cmd_search(args: SearchArgs) -> Result<()> {
    let index = load_index(&args.index)?;
    let config = RelevanceConfig::from_file(&args.config)?;
    let ranked = score_and_rank(&args.query, &index, index.analyzer(), &config, args.limit)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    if args.explain {
        for result in ranked {
            let detail = explain(
                &args.query,
                &result.doc_id,
                &index,
                index.analyzer(),
                &config,
            )?;
            let line = serde_json::json!({
                "doc_id": result.doc_id,
                "rel_score": result.rel_score,
                "raw_score": result.raw_score,
                "explanation": detail,
            });
            writeln!(out, "{line}").map_err(|e| Error::io("stdout", e))?;
        }
    } else {
        writeln!(out, "rank,doc_id,rel_score,raw_score").map_err(|e| Error::io("stdout", e))?;
        for (i, r) in ranked.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{}",
                i + 1,
                r.doc_id,
                r.rel_score,
                r.raw_score
            )
            .map_err(|e| Error::io("stdout", e))?;
        }
    }
    Ok(())
}

fn evaluate_csv(
    index: &Index,
    config: &RelevanceConfig,
    sets: &[JudgmentSet],
    k: usize,
    threshold: u8,
) -> Result<String> {
    let report = crate::metrics::mean_objective(
        sets,
        |query, _| {
            let results =
                score_and_rank(query, index, index.analyzer(), config, index.doc_count())?;
            Ok(results.into_iter().map(|r| r.doc_id).collect())
        },
        k,
        threshold,
    )?;
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["query", "location", "ndcg", "precision", "recall"])?;
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    for set in &report.per_set {
        precision_sum += set.precision;
        recall_sum += set.recall;
        writer.write_record([
            set.query.as_str(),
            set.location.as_str(),
            &set.ndcg.to_string(),
            &set.precision.to_string(),
            &set.recall.to_string(),
        ])?;
    }
    let n = report.per_set.len() as f64;
    writer.write_record([
        "(mean)",
        "",
        &report.mean_ndcg.to_string(),
        &(precision_sum / n).to_string(),
        &(recall_sum / n).to_string(),
    ])?;
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Tuner(format!("csv flush: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Tuner(format!("csv utf8: {e}")))
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let manifest = RunManifest::start(
        "evaluate",
        &[&args.index, &args.config, &args.judgments],
        args.seed,
    )?;
    let index = load_index(&args.index)?;
    let config = RelevanceConfig::from_file(&args.config)?;
    let sets = load_judgments(&args.judgments)?;
    let csv_text = evaluate_csv(&index, &config, &sets, args.k, args.threshold)?;
    match &args.out {
        Some(path) => {
            write_output(path, csv_text.as_bytes())?;
            manifest.finish_alongside(path)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{csv_text}"),
    }
    Ok(())
}

fn cmd_sample_queries(args: SampleQueriesArgs) -> Result<()> {
    if args.quota == 0 {
        return Err(Error::Usage("--quota must be >= 1".into()));
    }
    let mut inputs: Vec<&Path> = vec![&args.queries];
    if let Some(e) = &args.exclude {
        inputs.push(e);
    }
    let manifest = RunManifest::start("sample-queries", &inputs, args.seed)?;
    let queries = load_filtered_queries(&args.queries, args.exclude.as_deref())?;
    let segments = segment_queries(&queries);
    let sampled = stratified_sample(&segments, args.quota, args.seed)?;
    let mut text = String::new();
    for q in &sampled {
        text.push_str(&format!("{}\t{}\n", q.text, q.ner_tags.join(" ")));
    }
    match &args.out {
        Some(path) => {
            write_output(path, text.as_bytes())?;
            manifest.finish_alongside(path)?;
            eprintln!(
                "sampled {} queries across {} segments",
                sampled.len(),
                segments.len()
            );
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn load_filtered_queries(path: &Path, exclude: Option<&Path>) -> Result<Vec<TaggedQuery>> {
    let mut queries = dataset::load_tagged_queries(path)?;
    if let Some(exclude) = exclude {
        let excluded = dataset::load_exclusions(exclude)?;
        queries.retain(|q| !excluded.contains(&q.text));
    }
    Ok(queries)
}

fn cmd_filter_locations(args: FilterLocationsArgs) -> Result<()> {
    let manifest = RunManifest::start("filter-locations", &[&args.locations], args.seed)?;
    let locations = dataset::load_locations(&args.locations)?;
    let kept = filter_locations(
        &locations,
        args.min_pop,
        args.max_pop,
        args.sample,
        args.seed,
    )?;
    let mut text = String::new();
    for l in &kept {
        text.push_str(&format!("{}\t{}\n", l.name, l.population));
    }
    match &args.out {
        Some(path) => {
            write_output(path, text.as_bytes())?;
            manifest.finish_alongside(path)?;
            eprintln!("kept {} locations", kept.len());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_balance(raw: &str) -> Result<(f64, f64)> {
    let (lo, hi) = raw
        .split_once(',')
        .ok_or_else(|| Error::Usage(format!("--balance expects `lo,hi`, got {raw:?}")))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| Error::Usage("bad balance lo".into()))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| Error::Usage("bad balance hi".into()))?;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(Error::Usage(format!(
            "balance band ({lo}, {hi}) is not a sub-range of [0, 1]"
        )));
    }
    Ok((lo, hi))
}

fn cmd_build_evalset(args: BuildEvalsetArgs) -> Result<()> {
    let balance = parse_balance(&args.balance)?;
    let mut inputs: Vec<&Path> = vec![
        &args.index,
        &args.corpus,
        &args.config,
        &args.queries,
        &args.locations,
        &args.labels,
    ];
    if let Some(e) = &args.exclude {
        inputs.push(e);
    }
    let manifest = RunManifest::start("build-evalset", &inputs, args.seed)?;

    let index = load_index(&args.index)?;
    let corpus_bytes = std::fs::read(&args.corpus).map_err(|e| Error::io(&args.corpus, e))?;
    if sha256_hex(&corpus_bytes) != index.snapshot_id() {
        return Err(Error::Dataset(format!(
            "{} does not match the index corpus snapshot",
            args.corpus.display()
        )));
    }
    let docs = read_corpus_docs(&corpus_bytes, &args.corpus)?;
    let config = RelevanceConfig::from_file(&args.config)?;
    let queries = load_filtered_queries(&args.queries, args.exclude.as_deref())?;
    let segments = segment_queries(&queries);
    let sampled_queries = stratified_sample(&segments, args.quota, args.seed)?;
    let locations = dataset::load_locations(&args.locations)?;
    let sampled_locations = filter_locations(
        &locations,
        args.min_pop,
        args.max_pop,
        args.location_sample,
        args.seed,
    )?;
    let labels = load_judgments(&args.labels)?;
    let label_lookup: BTreeMap<(&str, &str), &JudgmentSet> = labels
        .iter()
        .map(|s| ((s.query.as_str(), s.location.as_str()), s))
        .collect();

    // Candidate result sets for the query-location cross product. Retrieval
    // ignores location; the location picks labels and the duplicate census.
    let mut candidates = Vec::new();
    for query in &sampled_queries {
        let ranked = score_and_rank(
            &query.text,
            &index,
            index.analyzer(),
            &config,
            index.doc_count(),
        )?;
        for location in &sampled_locations {
            let label_set = label_lookup.get(&(query.text.as_str(), location.name.as_str()));
            let results: Vec<CandidateResult> = ranked
                .iter()
                .map(|r| {
                    let doc = &docs[&r.doc_id];
                    let estimated_relevant = match label_set.and_then(|s| s.grade_of(&r.doc_id)) {
                        Some(grade) => grade.value() >= args.threshold,
                        None => r.rel_score >= args.est_threshold,
                    };
                    CandidateResult {
                        doc_id: r.doc_id.clone(),
                        title: doc.title.clone(),
                        company: doc.company.clone(),
                        estimated_relevant,
                    }
                })
                .collect();
            candidates.push(CandidateSet {
                query: query.text.clone(),
                location: location.name.clone(),
                results,
            });
        }
    }

    let accepted = filter_result_sets(candidates, args.min_results, args.max_results, balance);
    eprintln!("{} candidate sets accepted", accepted.len());
    let chosen = pick_location_per_query(accepted);

    let mut rows = String::from("query\tlocation\tdoc_id\tgrade\n");
    let mut emitted_sets = 0usize;
    for (query, set) in &chosen {
        let Some(label_set) = label_lookup.get(&(query.as_str(), set.location.as_str())) else {
            eprintln!(
                "skipping ({query}, {}): no labels for this pair",
                set.location
            );
            continue;
        };
        let mut any = false;
        for result in &set.results {
            if let Some(grade) = label_set.grade_of(&result.doc_id) {
                rows.push_str(&format!(
                    "{query}\t{}\t{}\t{}\n",
                    set.location,
                    result.doc_id,
                    grade.value()
                ));
                any = true;
            }
        }
        if any {
            emitted_sets += 1;
        } else {
            eprintln!("skipping ({query}, {}): no labeled results", set.location);
        }
    }
    if emitted_sets == 0 {
        return Err(Error::Dataset(
            "no (query, location) pair survived filtering with labels".into(),
        ));
    }
    write_output(&args.out, rows.as_bytes())?;
    manifest.finish_alongside(&args.out)?;
    eprintln!(
        "wrote {} with {emitted_sets} judgment sets",
        args.out.display()
    );
    Ok(())
}

fn read_corpus_docs(
    bytes: &[u8],
    path: &Path,
) -> Result<BTreeMap<String, crate::analyzer::JobDocument>> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::Dataset(format!("{}: corpus is not UTF-8", path.display())))?;
    let mut docs = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: crate::analyzer::JobDocument = serde_json::from_str(line).map_err(|e| {
            Error::Dataset(format!(
                "{}:{}: unparseable record: {e}",
                path.display(),
                idx + 1
            ))
        })?;
        docs.insert(doc.id.clone(), doc);
    }
    Ok(docs)
}

/// Map query text to its segment key; queries without tags are `untagged`.
fn segment_key_lookup(queries: &[TaggedQuery]) -> BTreeMap<String, String> {
    queries
        .iter()
        .map(|q| (q.text.clone(), q.segment().to_string()))
        .collect()
}

fn cmd_tune(args: TuneArgs) -> Result<()> {
    if args.budget == 0 {
        return Err(Error::Usage("--budget must be >= 1".into()));
    }
    if args.segments.is_some() && args.queries.is_none() {
        return Err(Error::Usage(
            "--segments needs --queries for tag lookups".into(),
        ));
    }
    let mut inputs: Vec<&Path> = vec![&args.index, &args.config, &args.judgments, &args.space];
    if let Some(q) = &args.queries {
        inputs.push(q);
    }
    let manifest = RunManifest::start("tune", &inputs, args.seed)?;

    let index = load_index(&args.index)?;
    let base_config = RelevanceConfig::from_file(&args.config)?;
    let space = ParameterSpace::from_file(&args.space)?;
    let mut sets = load_judgments(&args.judgments)?;

    if let Some(filter) = &args.segments {
        let queries = dataset::load_tagged_queries(args.queries.as_ref().expect("checked"))?;
        let lookup = segment_key_lookup(&queries);
        let wanted: Vec<&str> = filter.split(',').map(str::trim).collect();
        sets.retain(|s| {
            let key = lookup
                .get(&s.query)
                .map(String::as_str)
                .unwrap_or("untagged");
            wanted.contains(&key)
        });
        if sets.is_empty() {
            return Err(Error::Usage(format!(
                "no judgment sets fall in segments {filter:?}"
            )));
        }
        eprintln!(
            "tuning on {} judgment sets after segment filter",
            sets.len()
        );
    }

    let initial = if args.log.exists() {
        let text = std::fs::read_to_string(&args.log).map_err(|e| Error::io(&args.log, e))?;
        let trials = trials_from_csv(&text, &space)?;
        eprintln!(
            "resuming from {} with {} trials",
            args.log.display(),
            trials.len()
        );
        trials
    } else {
        Vec::new()
    };

    let log_path = args.log.clone();
    let space_for_log = space.clone();
    let seed = args.seed;
    let mut persisted: Vec<Trial> = initial.clone();
    let log = run_optimization(
        &space,
        &sets,
        &index,
        &base_config,
        args.budget,
        args.seed,
        args.k,
        args.threshold,
        initial,
        &mut |trial| {
            persisted.push(trial.clone());
            let snapshot = TrialLog {
                trials: persisted.clone(),
                seed,
                space: space_for_log.clone(),
            };
            write_output(&log_path, trial_log_to_csv(&snapshot)?.as_bytes())?;
            eprintln!(
                "trial {:>3} [{}] objective {:.6}",
                trial.trial_index, trial.phase, trial.objective
            );
            Ok(())
        },
    )?;

    write_output(&args.log, trial_log_to_csv(&log)?.as_bytes())?;
    manifest.finish_alongside(&args.log)?;
    if let Some(best) = log.best() {
        let values: Vec<String> = log
            .space
            .values_of(&best.assignment)
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        eprintln!(
            "best trial {} objective {:.6}: {}",
            best.trial_index,
            best.objective,
            values.join(" ")
        );
    }
    Ok(())
}

fn parse_f64_list(raw: &str, flag: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("{flag}: bad number {s:?}")))
        })
        .collect()
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let manifest = RunManifest::start(
        "sweep-bm25",
        &[&args.index, &args.config, &args.judgments],
        args.seed,
    )?;
    let index = load_index(&args.index)?;
    let config = RelevanceConfig::from_file(&args.config)?;
    let sets = load_judgments(&args.judgments)?;
    let b_values = parse_f64_list(&args.b, "--b")?;
    let k_values = parse_f64_list(&args.k, "--k")?;
    let matrix = sweep_bm25(
        &args.field,
        &b_values,
        &k_values,
        &config,
        &sets,
        &index,
        args.cutoff,
        args.threshold,
    )?;
    write_output(&args.out, sweep_to_csv(&matrix)?.as_bytes())?;
    manifest.finish_alongside(&args.out)?;
    eprintln!(
        "swept {} cells over field {}",
        b_values.len() * k_values.len(),
        args.field
    );
    Ok(())
}

fn segment_report_csvs(report: &SegmentReport) -> Result<(String, String)> {
    let mut seg_writer = csv::Writer::from_writer(Vec::new());
    seg_writer.write_record(["segment", "mean_ndcg", "set_count"])?;
    for row in &report.per_segment {
        seg_writer.write_record([
            row.segment.as_str(),
            &row.mean_ndcg.to_string(),
            &row.set_count.to_string(),
        ])?;
    }
    let seg_csv = String::from_utf8(
        seg_writer
            .into_inner()
            .map_err(|e| Error::Tuner(format!("csv flush: {e}")))?,
    )
    .map_err(|e| Error::Tuner(format!("csv utf8: {e}")))?;

    let mut q_writer = csv::Writer::from_writer(Vec::new());
    q_writer.write_record([
        "query",
        "location",
        "segment",
        "best_ndcg",
        "baseline_ndcg",
        "delta",
    ])?;
    for row in &report.per_query {
        q_writer.write_record([
            row.query.as_str(),
            row.location.as_str(),
            row.segment.as_str(),
            &row.best_ndcg.to_string(),
            &row.baseline_ndcg.to_string(),
            &row.delta.to_string(),
        ])?;
    }
    let q_csv = String::from_utf8(
        q_writer
            .into_inner()
            .map_err(|e| Error::Tuner(format!("csv flush: {e}")))?,
    )
    .map_err(|e| Error::Tuner(format!("csv utf8: {e}")))?;
    Ok((seg_csv, q_csv))
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let mut inputs: Vec<&Path> = vec![
        &args.log,
        &args.space,
        &args.index,
        &args.config,
        &args.baseline,
        &args.judgments,
    ];
    if let Some(q) = &args.queries {
        inputs.push(q);
    }
    let manifest = RunManifest::start("report", &inputs, args.seed)?;

    let index = load_index(&args.index)?;
    let base_config = RelevanceConfig::from_file(&args.config)?;
    let baseline_config = RelevanceConfig::from_file(&args.baseline)?;
    let space = ParameterSpace::from_file(&args.space)?;
    let log_text = std::fs::read_to_string(&args.log).map_err(|e| Error::io(&args.log, e))?;
    let trials = trials_from_csv(&log_text, &space)?;
    let log = TrialLog {
        trials,
        seed: args.seed,
        space: space.clone(),
    };
    let best = log
        .best()
        .ok_or_else(|| Error::Tuner("trial log has no trials".into()))?;
    let best_config = space.materialize(&base_config, &best.assignment)?;

    let sets = load_judgments(&args.judgments)?;
    let lookup = match &args.queries {
        Some(path) => segment_key_lookup(&dataset::load_tagged_queries(path)?),
        None => BTreeMap::new(),
    };
    let labeled: Vec<(JudgmentSet, String)> = sets
        .into_iter()
        .map(|s| {
            let segment = lookup
                .get(&s.query)
                .cloned()
                .unwrap_or_else(|| "untagged".to_string());
            (s, segment)
        })
        .collect();

    let report = segment_report(
        &best_config,
        &baseline_config,
        &labeled,
        &index,
        args.k,
        args.threshold,
    )?;
    let (seg_csv, q_csv) = segment_report_csvs(&report)?;

    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let seg_path = args.out_dir.join("segment_means.csv");
    let q_path = args.out_dir.join("query_deltas.csv");
    let best_path = args.out_dir.join("best_config.txt");
    write_output(&seg_path, seg_csv.as_bytes())?;
    write_output(&q_path, q_csv.as_bytes())?;
    write_output(&best_path, best_config.to_config_string().as_bytes())?;
    manifest.clone().finish_alongside(&seg_path)?;
    manifest.clone().finish_alongside(&q_path)?;
    manifest.finish_alongside(&best_path)?;

    // Worst-losing queries to stdout, ready for `explain`.
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "query,location,segment,best_ndcg,baseline_ndcg,delta")
        .map_err(|e| Error::io("stdout", e))?;
    for row in report.per_query.iter().take(args.bottom) {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.query, row.location, row.segment, row.best_ndcg, row.baseline_ndcg, row.delta
        )
        .map_err(|e| Error::io("stdout", e))?;
    }
    eprintln!("wrote reports under {}", args.out_dir.display());
    Ok(())
}

fn cmd_explain(args: ExplainArgs) -> Result<()> {
    let index = load_index(&args.index)?;
    let config = RelevanceConfig::from_file(&args.config)?;
    let detail = explain(&args.query, &args.doc, &index, index.analyzer(), &config)?;
    let json = serde_json::to_string_pretty(&detail)
        .map_err(|e| Error::Config(format!("serialize explanation: {e}")))?;
    println!("{json}");
    Ok(())
}
