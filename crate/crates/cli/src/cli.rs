//! Command-line interface.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage error, 3 I/O
//! error, 4 backend error.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use diasim_core::backend::BackendConfig;
use diasim_core::machine::{
    load_machine_def, AD_MACHINE_JSON, ADHD_MACHINE_JSON, BD_MACHINE_JSON, MDD_MACHINE_JSON,
};
use diasim_core::metrics::{
    dialogue_stats, discordant_counts, extract_keywords, hapax_proportion, intra_record_diversity,
    mcnemar_exact, normalized_entropy, per_label_prf, semantic_diversity, subset_accuracy,
    tokenize, HashingEmbedder,
};
use diasim_core::model::{validate_emr, ComorbidityProfile, Emr, Role, SchedulingStrategy};
use diasim_core::session::AgentMode;
use diasim_core::tree::load_tree_def;

use crate::backend_http::HttpBackend;
use crate::fixtures::sample_emrs;
use crate::formats::{
    read_corpus, read_emrs, write_corpus, write_manifest, write_report, CorpusLine,
    DiversityReport, FormatError, MetricReport, StatsReport, StrategyComparison,
};
use crate::orchestrate::{generate_dataset, Engine, GenerateConfig, OrchestrateError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_BACKEND: i32 = 4;

#[derive(Parser)]
#[command(name = "diasim", version, about = "Synthetic diagnostic-interview corpus tool")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the built-in machines, context tree, knowledge graph and the
    /// patient records.
    Validate {
        /// Patient-record JSON file; defaults to the bundled sample set.
        #[arg(long)]
        emrs: Option<PathBuf>,
    },
    /// Generate a dialogue corpus.
    Generate {
        /// Output directory for corpus.jsonl and manifest.json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        emrs: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        feds_per_emr: usize,
        /// Comma-separated list: random, symptom_informed.
        #[arg(long, value_delimiter = ',', default_values_t = [String::from("random"), String::from("symptom_informed")])]
        strategies: Vec<String>,
        /// scripted (offline, deterministic) or remote (HTTP).
        #[arg(long, default_value = "scripted")]
        backend: String,
        /// Backend settings JSON; required fields match the remote config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score a corpus against the records' listed diagnoses.
    Eval {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        emrs: Option<PathBuf>,
        /// Report JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corpus statistics, optionally with the diversity suite.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        diversity: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders --help/--version as "errors" with success status.
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Io(#[from] FormatError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Backend(_) => EXIT_BACKEND,
            CliError::Internal(_) => EXIT_VALIDATION,
        }
    }
}

fn load_or_sample_emrs(path: &Option<PathBuf>) -> Result<Vec<Emr>, CliError> {
    match path {
        Some(path) => Ok(read_emrs(path)?),
        None => Ok(sample_emrs(1)),
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Validate { emrs } => cmd_validate(&emrs),
        Command::Generate {
            out,
            emrs,
            seed,
            feds_per_emr,
            strategies,
            backend,
            config,
        } => cmd_generate(&out, &emrs, seed, feds_per_emr, &strategies, &backend, &config),
        Command::Eval { corpus, emrs, out } => cmd_eval(&corpus, &emrs, &out),
        Command::Stats {
            corpus,
            diversity,
            out,
        } => cmd_stats(&corpus, diversity, &out),
    }
}

fn cmd_validate(emrs_path: &Option<PathBuf>) -> Result<i32, CliError> {
    let mut issues: Vec<String> = Vec::new();

    for (name, source) in [
        ("depression machine", MDD_MACHINE_JSON),
        ("anxiety machine", AD_MACHINE_JSON),
        ("bipolar machine", BD_MACHINE_JSON),
        ("attention machine", ADHD_MACHINE_JSON),
    ] {
        if let Err(e) = load_machine_def(source) {
            issues.push(format!("{name}: {e}"));
        }
    }
    if let Err(e) = load_tree_def(diasim_core::tree::CONTEXT_TREE_JSON) {
        issues.push(format!("context tree: {e}"));
    }

    match Engine::bootstrap() {
        Ok(engine) => {
            let emrs = load_or_sample_emrs(emrs_path)?;
            for emr in &emrs {
                for issue in validate_emr(emr, &engine.kg) {
                    issues.push(format!("{}: {issue}", emr.emr_id));
                }
            }
            println!("checked 4 machines, context tree, knowledge graph, {} records", emrs.len());
        }
        Err(e) => issues.push(e.to_string()),
    }

    if issues.is_empty() {
        println!("validation passed");
        Ok(EXIT_OK)
    } else {
        for issue in &issues {
            eprintln!("invalid: {issue}");
        }
        eprintln!("validation failed with {} issues", issues.len());
        Ok(EXIT_VALIDATION)
    }
}

fn parse_strategies(raw: &[String]) -> Result<Vec<SchedulingStrategy>, CliError> {
    let mut strategies = Vec::new();
    for item in raw {
        let s = match item.as_str() {
            "random" => SchedulingStrategy::Random,
            "symptom_informed" => SchedulingStrategy::SymptomInformed,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown strategy \"{other}\" (expected random or symptom_informed)"
                )))
            }
        };
        if !strategies.contains(&s) {
            strategies.push(s);
        }
    }
    if strategies.is_empty() {
        return Err(CliError::Usage(String::from("at least one strategy is required")));
    }
    Ok(strategies)
}

fn load_backend_config(path: &Option<PathBuf>) -> Result<BackendConfig, CliError> {
    match path {
        None => Ok(BackendConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Io(FormatError::Io {
                    path: path.display().to_string(),
                    source: e,
                })
            })?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::Usage(format!("bad backend config {}: {e}", path.display()))
            })
        }
    }
}

fn cmd_generate(
    out: &Path,
    emrs_path: &Option<PathBuf>,
    seed: u64,
    feds_per_emr: usize,
    strategies_raw: &[String],
    backend: &str,
    config_path: &Option<PathBuf>,
) -> Result<i32, CliError> {
    if feds_per_emr == 0 {
        return Err(CliError::Usage(String::from("--feds-per-emr must be at least 1")));
    }
    let strategies = parse_strategies(strategies_raw)?;
    let engine = Engine::bootstrap().map_err(|e| CliError::Internal(e.to_string()))?;
    let emrs = load_or_sample_emrs(emrs_path)?;

    let config = GenerateConfig {
        base_seed: seed,
        feds_per_emr,
        strategies,
    };

    let http;
    let mode = match backend {
        "scripted" => AgentMode::Scripted,
        "remote" => {
            http = HttpBackend::new(load_backend_config(config_path)?);
            AgentMode::Backend(&http)
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown backend \"{other}\" (expected scripted or remote)"
            )))
        }
    };

    let data = generate_dataset(&engine, &emrs, &config, &mode).map_err(|e| match &e {
        OrchestrateError::AllFailed(first) if first.contains("backend") => {
            CliError::Backend(e.to_string())
        }
        OrchestrateError::NoRecords => CliError::Usage(e.to_string()),
        _ => CliError::Internal(e.to_string()),
    })?;

    // Backend faults are fatal even when other sessions succeeded: a
    // partially remote-generated corpus is not reproducible.
    if let Some(backend_failure) = data.failures.iter().find(|f| f.contains("backend")) {
        return Err(CliError::Backend(backend_failure.clone()));
    }
    for failure in &data.failures {
        eprintln!("skipped: {failure}");
    }

    std::fs::create_dir_all(out).map_err(|e| {
        CliError::Io(FormatError::Io {
            path: out.display().to_string(),
            source: e,
        })
    })?;
    write_corpus(&out.join("corpus.jsonl"), &data.lines)?;
    write_manifest(&out.join("manifest.json"), &data.manifest)?;
    println!(
        "wrote {} sessions ({} eligible) to {}",
        data.manifest.session_count,
        data.manifest.eligible_count,
        out.display()
    );
    if data.failures.is_empty() {
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_VALIDATION)
    }
}

fn gold_index(emrs: &[Emr]) -> BTreeMap<&str, &ComorbidityProfile> {
    emrs.iter()
        .map(|e| (e.emr_id.as_str(), &e.preliminary_diagnosis))
        .collect()
}

fn cmd_eval(
    corpus: &Path,
    emrs_path: &Option<PathBuf>,
    out: &Option<PathBuf>,
) -> Result<i32, CliError> {
    let lines = read_corpus(corpus)?;
    let emrs = load_or_sample_emrs(emrs_path)?;
    let gold = gold_index(&emrs);

    let mut predictions = Vec::new();
    let mut references = Vec::new();
    let mut missing = Vec::new();
    for line in &lines {
        match gold.get(line.session.emr_id.as_str()) {
            Some(reference) => {
                predictions.push(line.session.predicted_labels.clone());
                references.push((*reference).clone());
            }
            None => missing.push(line.session.emr_id.clone()),
        }
    }
    if !missing.is_empty() {
        missing.dedup();
        eprintln!("no record for session emr ids: {}", missing.join(", "));
        return Ok(EXIT_VALIDATION);
    }
    if predictions.is_empty() {
        eprintln!("corpus is empty");
        return Ok(EXIT_VALIDATION);
    }

    let accuracy = subset_accuracy(&predictions, &references)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let per_label = per_label_prf(&predictions, &references)
        .map_err(|e| CliError::Internal(e.to_string()))?;

    let report = MetricReport {
        sample_count: predictions.len(),
        subset_accuracy: accuracy,
        per_label,
        strategy_comparison: strategy_comparison(&lines, &gold),
    };

    match out {
        Some(path) => write_report(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
    }
    Ok(EXIT_OK)
}

/// Pairs sessions that share (record, narrative) across the two scheduling
/// strategies and runs the exact McNemar test on their correctness.
fn strategy_comparison(
    lines: &[CorpusLine],
    gold: &BTreeMap<&str, &ComorbidityProfile>,
) -> Option<StrategyComparison> {
    let first = SchedulingStrategy::Random;
    let second = SchedulingStrategy::SymptomInformed;
    let key = |l: &CorpusLine| {
        (
            l.session.emr_id.clone(),
            l.session.fed.history_id.clone(),
            l.session.fed.experience_id.clone(),
        )
    };
    let mut by_key: BTreeMap<_, [Option<bool>; 2]> = BTreeMap::new();
    for line in lines {
        let slot = match line.session.strategy {
            s if s == first => 0,
            s if s == second => 1,
            _ => continue,
        };
        let correct = gold
            .get(line.session.emr_id.as_str())
            .map(|g| **g == line.session.predicted_labels)?;
        by_key.entry(key(line)).or_default()[slot] = Some(correct);
    }
    let pairs: Vec<(bool, bool)> = by_key
        .values()
        .filter_map(|[a, b]| Some(((*a)?, (*b)?)))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    let first_correct: Vec<bool> = pairs.iter().map(|p| p.0).collect();
    let second_correct: Vec<bool> = pairs.iter().map(|p| p.1).collect();
    let (b, c) = discordant_counts(&first_correct, &second_correct);
    Some(StrategyComparison {
        first,
        second,
        paired_samples: pairs.len(),
        first_only_correct: b,
        second_only_correct: c,
        mcnemar_p: mcnemar_exact(b, c),
    })
}

fn cmd_stats(corpus: &Path, diversity: bool, out: &Option<PathBuf>) -> Result<i32, CliError> {
    let lines = read_corpus(corpus)?;
    if lines.is_empty() {
        eprintln!("corpus is empty");
        return Ok(EXIT_VALIDATION);
    }
    let sessions: Vec<_> = lines.iter().map(|l| l.session.clone()).collect();
    let dialogue = dialogue_stats(&sessions).map_err(|e| CliError::Internal(e.to_string()))?;

    let diversity = diversity.then(|| {
        // Narrative spread within each record.
        let mut by_emr: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for line in &lines {
            by_emr
                .entry(line.session.emr_id.as_str())
                .or_default()
                .push(line.session.fed.narrative.clone());
        }
        let per_record: Vec<f64> = by_emr
            .values()
            .map(|texts| intra_record_diversity(texts))
            .collect();
        let mean_intra = per_record.iter().sum::<f64>() / per_record.len() as f64;

        let patient_texts: Vec<String> = sessions
            .iter()
            .flat_map(|s| s.turns.iter())
            .filter(|t| t.role == Role::Patient)
            .map(|t| t.text.clone())
            .collect();
        let tokens: Vec<String> = patient_texts.iter().flat_map(|t| tokenize(t)).collect();
        DiversityReport {
            mean_intra_record_diversity: mean_intra,
            normalized_entropy: normalized_entropy(&tokens),
            hapax_proportion: hapax_proportion(&tokens),
            semantic_diversity: semantic_diversity(&patient_texts, &HashingEmbedder::default()),
            top_keywords: extract_keywords(&patient_texts, 10),
        }
    });

    let report = StatsReport { dialogue, diversity };
    match out {
        Some(path) => write_report(path, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
    }
    Ok(EXIT_OK)
}
