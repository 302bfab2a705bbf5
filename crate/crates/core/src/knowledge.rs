//! Disorder-symptom knowledge graph, derived from the machine definitions.
//!
//! Nodes are the four disorders and every symptom-bearing question state;
//! an edge connects a disorder to each symptom its machine can probe.
//! Comorbid/contributing-factor questions ask about external causes, so
//! they never become symptom nodes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::machine::StateMachineDef;
use crate::model::{DisorderLabel, Emr};

/// Identifier of a symptom node; identical to the machine state code that
/// probes it (e.g. `A6`, `F144`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SymptomId(pub String);

impl SymptomId {
    pub fn new(code: &str) -> Self {
        SymptomId(code.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl core::fmt::Display for SymptomId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Disorder-symptom graph with per-symptom question text for grounding
/// patient replies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DsdKg {
    pub edges: BTreeMap<DisorderLabel, BTreeSet<SymptomId>>,
    pub descriptions: BTreeMap<SymptomId, String>,
}

impl DsdKg {
    pub fn symptoms_of(&self, label: DisorderLabel) -> Option<&BTreeSet<SymptomId>> {
        self.edges.get(&label)
    }

    pub fn contains_symptom(&self, symptom: &SymptomId) -> bool {
        self.descriptions.contains_key(symptom)
    }

    pub fn symptom_count(&self) -> usize {
        self.descriptions.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KgError {
    EmptyMachineList,
    SparseDisorder { disorder: DisorderLabel, count: usize },
    UnknownSymptom(SymptomId),
}

impl core::fmt::Display for KgError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            KgError::EmptyMachineList => write!(f, "no machine definitions supplied"),
            KgError::SparseDisorder { disorder, count } => write!(
                f,
                "disorder {disorder} exposes only {count} symptoms (minimum 5)"
            ),
            KgError::UnknownSymptom(id) => write!(f, "symptom {id} is not in the graph"),
        }
    }
}

/// Builds the graph from a set of machine definitions. Every disorder must
/// end up with at least five symptom nodes.
pub fn kg_from_machines(
    defs: &BTreeMap<DisorderLabel, StateMachineDef>,
) -> Result<DsdKg, KgError> {
    if defs.is_empty() {
        return Err(KgError::EmptyMachineList);
    }
    let mut edges: BTreeMap<DisorderLabel, BTreeSet<SymptomId>> = BTreeMap::new();
    let mut descriptions = BTreeMap::new();
    for (disorder, def) in defs {
        let symptoms = edges.entry(*disorder).or_default();
        for (id, node) in &def.nodes {
            if !node.category.is_symptom() {
                continue;
            }
            let sid = SymptomId::new(id.as_str());
            symptoms.insert(sid.clone());
            descriptions.insert(sid, describe(&node.question_template));
        }
        let count = symptoms.len();
        if count < 5 {
            return Err(KgError::SparseDisorder {
                disorder: *disorder,
                count,
            });
        }
    }
    Ok(DsdKg { edges, descriptions })
}

/// Turns a question template into a short declarative symptom description,
/// e.g. "Have you felt tired {time}?" -> "felt tired recently".
fn describe(template: &str) -> String {
    let mut text = template.replace("{time}", "recently");
    while text.ends_with('?') || text.ends_with('.') {
        text.pop();
    }
    let lowered = lowercase_first(&text);
    for prefix in [
        "have you been ",
        "have you had ",
        "have you felt ",
        "have you ",
        "has your ",
        "have your ",
        "do you ",
        "did you ",
        "are you ",
        "were you ",
        "is it ",
        "was it ",
    ] {
        if let Some(rest) = lowered.strip_prefix(prefix) {
            return format!("{}{}", phrase_lead(prefix), rest);
        }
    }
    lowered
}

fn phrase_lead(prefix: &str) -> &'static str {
    match prefix {
        "have you been " => "being ",
        "have you had " => "having ",
        "have you felt " => "feeling ",
        "have you " => "having ",
        "has your " => "my ",
        "have your " => "my ",
        "do you " => "",
        "did you " => "",
        "are you " => "being ",
        "were you " => "being ",
        "is it " => "it being ",
        "was it " => "it being ",
        _ => "",
    }
}

fn lowercase_first(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => {
            let mut out: String = first.to_lowercase().collect();
            out.push_str(chars.as_str());
            out
        }
        None => String::new(),
    }
}

/// True iff the symptom is part of the patient's ground-truth inventory.
/// Unknown symptom ids are an error, not a silent "no".
pub fn symptom_allowed(kg: &DsdKg, emr: &Emr, symptom: &SymptomId) -> Result<bool, KgError> {
    if !kg.contains_symptom(symptom) {
        return Err(KgError::UnknownSymptom(symptom.clone()));
    }
    Ok(emr.symptom_ids.contains(symptom))
}

/// All symptom ids a disorder set can draw on, in id order.
pub fn symptom_pool(kg: &DsdKg, labels: &BTreeSet<DisorderLabel>) -> Vec<SymptomId> {
    let mut pool: BTreeSet<SymptomId> = BTreeSet::new();
    for label in labels {
        if let Some(set) = kg.symptoms_of(*label) {
            pool.extend(set.iter().cloned());
        }
    }
    pool.into_iter().collect()
}
