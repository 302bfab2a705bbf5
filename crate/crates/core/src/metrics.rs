//! Evaluation kernels: label-set accuracy, per-label precision/recall/F1,
//! the exact McNemar test, and a lexical/semantic diversity suite.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{ComorbidityProfile, DialogueSession, DisorderLabel};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MetricError {
    LengthMismatch { predictions: usize, references: usize },
    Empty,
}

impl core::fmt::Display for MetricError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MetricError::LengthMismatch { predictions, references } => write!(
                f,
                "{predictions} predictions against {references} references"
            ),
            MetricError::Empty => write!(f, "no samples"),
        }
    }
}

/// Fraction of samples whose predicted label set equals the reference set
/// exactly.
pub fn subset_accuracy(
    predictions: &[ComorbidityProfile],
    references: &[ComorbidityProfile],
) -> Result<f64, MetricError> {
    if predictions.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            predictions: predictions.len(),
            references: references.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricError::Empty);
    }
    let hits = predictions
        .iter()
        .zip(references)
        .filter(|(p, r)| p == r)
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Per-label precision/recall/F1 with the zero conventions: a zero
/// denominator yields 0 for that component, and F1 is 0 when P + R = 0.
pub fn per_label_prf(
    predictions: &[ComorbidityProfile],
    references: &[ComorbidityProfile],
) -> Result<BTreeMap<DisorderLabel, PrfScores>, MetricError> {
    if predictions.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            predictions: predictions.len(),
            references: references.len(),
        });
    }
    if predictions.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut scores = BTreeMap::new();
    for label in DisorderLabel::ALL {
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut fne = 0u64;
        for (p, r) in predictions.iter().zip(references) {
            match (p.contains(label), r.contains(label)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fne += 1,
                (false, false) => {}
            }
        }
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fne);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        scores.insert(
            label,
            PrfScores {
                precision,
                recall,
                f1,
                support: tp + fne,
            },
        );
    }
    Ok(scores)
}

fn ratio(num: u64, denom: u64) -> f64 {
    if denom == 0 {
        0.0
    } else {
        num as f64 / denom as f64
    }
}

/// Exact binomial McNemar test on the discordant-pair counts: with
/// X ~ Bin(b + c, 1/2), p = min(1, 2 * P(X <= min(b, c))). Returns 1 when
/// there are no discordant pairs.
pub fn mcnemar_exact(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let m = b.min(c);
    // Cumulative binomial tail in log space to stay finite for large n.
    let ln2 = core::f64::consts::LN_2;
    let mut tail = 0.0f64;
    for k in 0..=m {
        let ln_term = ln_choose(n, k) - n as f64 * ln2;
        tail += libm::exp(ln_term);
    }
    (2.0 * tail).min(1.0)
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

fn ln_factorial(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// Counts for the McNemar test from paired correctness indicators:
/// `b` = first system right where the second is wrong, `c` = the reverse.
pub fn discordant_counts(first_correct: &[bool], second_correct: &[bool]) -> (u64, u64) {
    let mut b = 0u64;
    let mut c = 0u64;
    for (x, y) in first_correct.iter().zip(second_correct) {
        match (x, y) {
            (true, false) => b += 1,
            (false, true) => c += 1,
            _ => {}
        }
    }
    (b, c)
}

// ---------------------------------------------------------------------------
// Corpus statistics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueStats {
    pub session_count: usize,
    pub eligible_count: usize,
    pub mean_turns: f64,
    pub mean_doctor_chars: f64,
    pub mean_patient_chars: f64,
}

/// Aggregate transcript statistics. Character counts are Unicode scalar
/// values, not bytes.
pub fn dialogue_stats(sessions: &[DialogueSession]) -> Result<DialogueStats, MetricError> {
    if sessions.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut turns_total = 0usize;
    let mut doctor_chars = 0usize;
    let mut doctor_turns = 0usize;
    let mut patient_chars = 0usize;
    let mut patient_turns = 0usize;
    let mut eligible = 0usize;
    for session in sessions {
        turns_total += session.turns.len();
        if session.predicted_labels.is_eligible() {
            eligible += 1;
        }
        for turn in &session.turns {
            let chars = turn.text.chars().count();
            match turn.role {
                crate::model::Role::Doctor => {
                    doctor_chars += chars;
                    doctor_turns += 1;
                }
                crate::model::Role::Patient => {
                    patient_chars += chars;
                    patient_turns += 1;
                }
            }
        }
    }
    Ok(DialogueStats {
        session_count: sessions.len(),
        eligible_count: eligible,
        mean_turns: turns_total as f64 / sessions.len() as f64,
        mean_doctor_chars: mean(doctor_chars, doctor_turns),
        mean_patient_chars: mean(patient_chars, patient_turns),
    })
}

fn mean(total: usize, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        total as f64 / count as f64
    }
}

// ---------------------------------------------------------------------------
// Diversity suite

pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '\'')
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

fn token_set(text: &str) -> BTreeSet<String> {
    tokenize(text).into_iter().collect()
}

/// Jaccard similarity over token sets. Two empty sets are identical (1);
/// one empty set shares nothing (0).
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let intersection = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    intersection / union
}

/// One minus the mean pairwise Jaccard similarity of the texts. Fewer than
/// two texts carry no pairwise signal and score 0.
pub fn intra_record_diversity(texts: &[String]) -> f64 {
    if texts.len() < 2 {
        return 0.0;
    }
    let sets: Vec<BTreeSet<String>> = texts.iter().map(|t| token_set(t)).collect();
    let mut total = 0.0;
    let mut pairs = 0u64;
    for i in 0..sets.len() {
        for j in (i + 1)..sets.len() {
            total += jaccard(&sets[i], &sets[j]);
            pairs += 1;
        }
    }
    1.0 - total / pairs as f64
}

/// Shannon entropy of the token distribution, normalized by log2 of the
/// vocabulary size; a vocabulary of at most one type has no spread (0).
pub fn normalized_entropy(tokens: &[String]) -> f64 {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for token in tokens {
        *counts.entry(token.as_str()).or_insert(0) += 1;
    }
    let vocab = counts.len();
    if vocab <= 1 {
        return 0.0;
    }
    let total = tokens.len() as f64;
    let mut entropy = 0.0;
    for count in counts.values() {
        let p = *count as f64 / total;
        entropy -= p * libm::log2(p);
    }
    entropy / libm::log2(vocab as f64)
}

/// Share of vocabulary types occurring exactly once.
pub fn hapax_proportion(tokens: &[String]) -> f64 {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for token in tokens {
        *counts.entry(token.as_str()).or_insert(0) += 1;
    }
    if counts.is_empty() {
        return 0.0;
    }
    let hapax = counts.values().filter(|c| **c == 1).count();
    hapax as f64 / counts.len() as f64
}

/// Maps a text to a fixed-size vector by hashing its tokens into buckets
/// (counts, not indicators).
pub trait Embedder {
    fn embed(&self, text: &str) -> Vec<f64>;
}

/// Default embedder: FNV-1a feature hashing of bag-of-tokens counts.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    pub dims: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder { dims: 64 }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

impl Embedder for HashingEmbedder {
    fn embed(&self, text: &str) -> Vec<f64> {
        let mut vector = alloc::vec![0.0f64; self.dims];
        for token in tokenize(text) {
            let bucket = (fnv1a(token.as_bytes()) % self.dims as u64) as usize;
            vector[bucket] += 1.0;
        }
        vector
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = libm::sqrt(a.iter().map(|x| x * x).sum());
    let nb: f64 = libm::sqrt(b.iter().map(|x| x * x).sum());
    if na == 0.0 && nb == 0.0 {
        return 1.0;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// One minus the mean pairwise cosine similarity of embedded texts. Fewer
/// than two texts score 0.
pub fn semantic_diversity<E: Embedder>(texts: &[String], embedder: &E) -> f64 {
    if texts.len() < 2 {
        return 0.0;
    }
    let vectors: Vec<Vec<f64>> = texts.iter().map(|t| embedder.embed(t)).collect();
    let mut total = 0.0;
    let mut pairs = 0u64;
    for i in 0..vectors.len() {
        for j in (i + 1)..vectors.len() {
            total += cosine(&vectors[i], &vectors[j]);
            pairs += 1;
        }
    }
    1.0 - total / pairs as f64
}

const KEYWORD_STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "been", "but", "by", "for", "from", "had", "has",
    "have", "i", "in", "is", "it", "me", "my", "not", "of", "on", "or", "so", "that", "the",
    "them", "they", "this", "to", "was", "we", "were", "with", "you", "your",
];

/// Top-k non-stopword tokens by frequency; ties break lexicographically.
pub fn extract_keywords(texts: &[String], k: usize) -> Vec<String> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for text in texts {
        for token in tokenize(text) {
            if KEYWORD_STOPWORDS.contains(&token.as_str()) {
                continue;
            }
            *counts.entry(token).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
    // BTreeMap iteration is lexicographic, so a stable sort by descending
    // count leaves ties in lexicographic order.
    ranked.sort_by(|a, b| b.1.cmp(&a.1));
    ranked.into_iter().take(k).map(|(t, _)| t).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn profile(labels: &[DisorderLabel]) -> ComorbidityProfile {
        ComorbidityProfile::new(labels.iter().copied())
    }

    #[test]
    fn subset_accuracy_counts_exact_matches_only() {
        use DisorderLabel::*;
        let preds = vec![profile(&[MDD]), profile(&[MDD, AD]), profile(&[])];
        let refs = vec![profile(&[MDD]), profile(&[MDD]), profile(&[])];
        let acc = subset_accuracy(&preds, &refs).unwrap();
        assert!((acc - 2.0 / 3.0).abs() < 1e-15);
        assert!(subset_accuracy(&preds, &refs[..2]).is_err());
        assert!(subset_accuracy(&[], &[]).is_err());
    }

    #[test]
    fn prf_zero_conventions() {
        use DisorderLabel::*;
        // BD never predicted nor referenced: all components 0, support 0.
        let preds = vec![profile(&[MDD]), profile(&[AD])];
        let refs = vec![profile(&[MDD]), profile(&[MDD])];
        let scores = per_label_prf(&preds, &refs).unwrap();
        let bd = scores[&BD];
        assert_eq!((bd.precision, bd.recall, bd.f1, bd.support), (0.0, 0.0, 0.0, 0));
        let mdd = scores[&MDD];
        assert!((mdd.precision - 1.0).abs() < 1e-15);
        assert!((mdd.recall - 0.5).abs() < 1e-15);
        assert!((mdd.f1 - 2.0 / 3.0).abs() < 1e-15);
        // AD: predicted once, never referenced.
        let ad = scores[&AD];
        assert_eq!((ad.precision, ad.recall, ad.f1), (0.0, 0.0, 0.0));
    }

    /// Brute-force oracle using exact rational-ish arithmetic on small n.
    fn mcnemar_brute(b: u64, c: u64) -> f64 {
        let n = b + c;
        if n == 0 {
            return 1.0;
        }
        let m = b.min(c);
        let mut tail = 0.0f64;
        for k in 0..=m {
            let mut coeff = 1.0f64;
            for i in 0..k {
                coeff = coeff * (n - i) as f64 / (i + 1) as f64;
            }
            tail += coeff / libm::pow(2.0, n as f64);
        }
        (2.0 * tail).min(1.0)
    }

    #[test]
    fn mcnemar_matches_brute_force() {
        for (b, c) in [(0, 0), (0, 5), (3, 3), (2, 8), (10, 1), (25, 30), (50, 12)] {
            let fast = mcnemar_exact(b, c);
            let slow = mcnemar_brute(b, c);
            assert!((fast - slow).abs() < 1e-12, "b={b} c={c}: {fast} vs {slow}");
        }
        assert!((mcnemar_exact(0, 0) - 1.0).abs() < 1e-15);
        assert_eq!(mcnemar_exact(4, 9), mcnemar_exact(9, 4));
    }

    #[test]
    fn jaccard_empty_conventions() {
        let empty = BTreeSet::new();
        let full: BTreeSet<String> = ["a".to_string()].into_iter().collect();
        assert_eq!(jaccard(&empty, &empty), 1.0);
        assert_eq!(jaccard(&empty, &full), 0.0);
        assert_eq!(jaccard(&full, &full), 1.0);
    }

    #[test]
    fn diversity_bounds() {
        let same = vec!["a b c".to_string(), "a b c".to_string()];
        assert!(intra_record_diversity(&same).abs() < 1e-15);
        let disjoint = vec!["a b".to_string(), "c d".to_string()];
        assert!((intra_record_diversity(&disjoint) - 1.0).abs() < 1e-15);
        assert_eq!(intra_record_diversity(&[]), 0.0);
    }

    #[test]
    fn entropy_uniform_is_one() {
        let tokens: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        assert!((normalized_entropy(&tokens) - 1.0).abs() < 1e-12);
        let single = vec!["a".to_string(), "a".to_string()];
        assert_eq!(normalized_entropy(&single), 0.0);
        assert_eq!(normalized_entropy(&[]), 0.0);
    }

    #[test]
    fn hapax_counts_singletons() {
        let tokens: Vec<String> = ["a", "a", "b", "c"].iter().map(|s| s.to_string()).collect();
        assert!((hapax_proportion(&tokens) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(hapax_proportion(&[]), 0.0);
    }

    #[test]
    fn semantic_diversity_identical_texts_is_zero() {
        let embedder = HashingEmbedder::default();
        let same = vec!["low mood all week".to_string(); 3];
        assert!(semantic_diversity(&same, &embedder).abs() < 1e-12);
        let varied = vec![
            "sleep problems and fatigue".to_string(),
            "racing thoughts at night".to_string(),
        ];
        assert!(semantic_diversity(&varied, &embedder) > 0.0);
    }

    #[test]
    fn keywords_ranked_by_frequency_then_lexicographic() {
        let texts = vec![
            "sleep sleep mood".to_string(),
            "mood anxiety".to_string(),
            "zebra anxiety".to_string(),
        ];
        // sleep, mood and anxiety all occur twice; ties sort lexicographically.
        let top = extract_keywords(&texts, 3);
        assert_eq!(top, vec!["anxiety", "mood", "sleep"]);
    }
}
