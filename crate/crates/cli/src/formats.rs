//! On-disk formats: patient-record JSON, the corpus JSONL, the run
//! manifest and metric reports.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use diasim_core::metrics::{DialogueStats, PrfScores};
use diasim_core::model::{DialogueSession, DisorderLabel, Emr, SchedulingStrategy};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed {what} at {path}:{line}: {message}")]
    Malformed {
        what: &'static str,
        path: String,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> FormatError {
    FormatError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One corpus line: a full session plus its dataset-eligibility flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusLine {
    #[serde(flatten)]
    pub session: DialogueSession,
    pub eligible: bool,
}

pub fn read_emrs(path: &Path) -> Result<Vec<Emr>, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| FormatError::Malformed {
        what: "record file",
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn write_emrs(path: &Path, emrs: &[Emr]) -> Result<(), FormatError> {
    let text = serde_json::to_string_pretty(emrs).expect("records serialize");
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Writes the corpus as one JSON object per line, in input order.
pub fn write_corpus(path: &Path, lines: &[CorpusLine]) -> Result<(), FormatError> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for line in lines {
        let json = serde_json::to_string(line).expect("session serializes");
        writeln!(out, "{json}").map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

pub fn read_corpus(path: &Path) -> Result<Vec<CorpusLine>, FormatError> {
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str(&line).map_err(|e| FormatError::Malformed {
            what: "corpus line",
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        lines.push(parsed);
    }
    Ok(lines)
}

/// Run manifest. Deliberately free of timestamps and host details so a
/// replay with the same inputs is byte-identical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub base_seed: u64,
    pub emr_count: usize,
    pub feds_per_emr: usize,
    pub strategies: Vec<SchedulingStrategy>,
    pub doctor_profiles: usize,
    pub session_count: usize,
    pub eligible_count: usize,
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), FormatError> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest, FormatError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| FormatError::Malformed {
        what: "manifest",
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyComparison {
    pub first: SchedulingStrategy,
    pub second: SchedulingStrategy,
    pub paired_samples: usize,
    pub first_only_correct: u64,
    pub second_only_correct: u64,
    pub mcnemar_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub sample_count: usize,
    pub subset_accuracy: f64,
    pub per_label: std::collections::BTreeMap<DisorderLabel, PrfScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy_comparison: Option<StrategyComparison>,
}

pub fn write_report<T: Serialize>(path: &Path, report: &T) -> Result<(), FormatError> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    fs::write(path, text).map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    /// Mean over records of 1 - mean pairwise Jaccard of their narratives.
    pub mean_intra_record_diversity: f64,
    pub normalized_entropy: f64,
    pub hapax_proportion: f64,
    pub semantic_diversity: f64,
    pub top_keywords: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    #[serde(flatten)]
    pub dialogue: DialogueStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diversity: Option<DiversityReport>,
}
