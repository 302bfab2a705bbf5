//! Agent-level policies: machine scheduling, response classification,
//! experience-branch triggering and prompt assembly for backend-driven
//! agents.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::backend::{BackendRequest, ChatMessage, RequestTag};
use crate::knowledge::DsdKg;
use crate::model::{
    DialogueTurn, DisorderLabel, DoctorProfile, Emr, FedNarrative, SchedulingStrategy,
    SymptomResponse,
};
use crate::rng::SessionRng;

/// Maximum experience-inquiry digressions per session.
pub const MAX_EXPERIENCE_BRANCHES: usize = 3;

/// Complaint keywords hinting at each disorder, used by the
/// symptom-informed scheduler. The doctor only ever sees the opening
/// complaint, so scheduling keys off that text alone.
fn complaint_keywords(label: DisorderLabel) -> &'static [&'static str] {
    match label {
        DisorderLabel::MDD => &["depress", "low mood", "sad", "hopeless", "down", "empty"],
        DisorderLabel::AD => &["anxi", "worry", "worr", "nervous", "on edge", "tense", "panic"],
        DisorderLabel::BD => &["elevated", "elated", "high", "euphor", "irritab", "energy", "racing"],
        DisorderLabel::ADHD => &["attention", "focus", "distract", "restless", "disorganiz", "forget"],
    }
}

/// Orders the disorder machines for one session. Random strategy shuffles
/// uniformly; the symptom-informed strategy ranks by keyword evidence in
/// the opening complaint (stable on ties).
pub fn order_gen(
    strategy: SchedulingStrategy,
    opening_complaint: &str,
    rng: &mut SessionRng,
) -> Vec<DisorderLabel> {
    let mut order: Vec<DisorderLabel> = DisorderLabel::ALL.to_vec();
    match strategy {
        SchedulingStrategy::Random => rng.shuffle(&mut order),
        SchedulingStrategy::SymptomInformed => {
            let complaint = opening_complaint.to_lowercase();
            let score = |label: DisorderLabel| -> usize {
                complaint_keywords(label)
                    .iter()
                    .filter(|kw| complaint.contains(*kw))
                    .count()
            };
            order.sort_by(|a, b| score(*b).cmp(&score(*a)));
        }
    }
    order
}

const AFFIRM_TOKENS: &[&str] = &[
    "yes", "yeah", "yep", "indeed", "definitely", "absolutely", "certainly", "correct", "right",
];
const NEGATE_TOKENS: &[&str] = &[
    "no", "not", "never", "don't", "doesn't", "didn't", "haven't", "hasn't", "isn't", "aren't",
    "wasn't", "weren't", "none", "nothing", "nope",
];

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| c.is_whitespace() || matches!(c, ',' | '.' | ';' | '!' | '?' | '—' | '-'))
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

/// Rule-based binary classifier for patient answers. The leading token
/// decides when it is an explicit yes/no; otherwise any negation anywhere
/// forces absent, any affirmation forces present, and the conservative
/// default is absent.
pub fn classify_response_text(text: &str) -> SymptomResponse {
    let mut iter = tokens(text);
    if let Some(first) = iter.next() {
        if AFFIRM_TOKENS.contains(&first.as_str()) {
            return SymptomResponse::Present;
        }
        if NEGATE_TOKENS.contains(&first.as_str()) {
            return SymptomResponse::Absent;
        }
        let rest: Vec<String> = iter.collect();
        if rest.iter().any(|t| NEGATE_TOKENS.contains(&t.as_str())) {
            return SymptomResponse::Absent;
        }
        if rest.iter().any(|t| AFFIRM_TOKENS.contains(&t.as_str())) {
            return SymptomResponse::Present;
        }
    }
    SymptomResponse::Absent
}

/// Whether to digress into the experience-inquiry branch: after the first
/// present answer inside a machine, capped per session.
pub fn need_exp_branch(first_present_in_machine: bool, triggered_so_far: usize) -> bool {
    first_present_in_machine && triggered_so_far < MAX_EXPERIENCE_BRANCHES
}

/// The interview is over once every scheduled machine reached a terminal
/// and all required context leaves were covered.
pub fn is_dial_end(machines_done: bool, required_tree_done: bool) -> bool {
    machines_done && required_tree_done
}

// ---------------------------------------------------------------------------
// Prompt assembly (backend mode)

pub fn doctor_system_prompt(profile: &DoctorProfile) -> String {
    format!(
        "You are a psychiatrist ({}, {}, {} style) conducting a structured diagnostic interview. \
You do not know the patient's record. Ask exactly the question given in the instruction, \
optionally prefixed with a brief empathetic remark, in at most {} characters.",
        profile.age_band, profile.specialty, profile.empathy_style, profile.reply_char_limit
    )
}

pub fn patient_system_prompt(emr: &Emr, fed: &FedNarrative, kg: &DsdKg) -> String {
    let mut symptoms = String::new();
    for sid in &emr.symptom_ids {
        let desc = kg.descriptions.get(sid).map(String::as_str).unwrap_or("");
        symptoms.push_str(&format!("- {sid}: {desc}\n"));
    }
    format!(
        "You are a patient in a psychiatric interview. Stay in character.\n\
Your story: {narrative}\n\
Chief complaint: {complaint}\n\
You genuinely experience ONLY these symptoms:\n{symptoms}\
If asked about anything not on this list, you must deny it. \
Answer naturally in one or two sentences, starting with a clear yes or no \
when the question is a yes/no question.",
        narrative = fed.narrative,
        complaint = emr.chief_complaint,
        symptoms = symptoms,
    )
}

pub fn classifier_system_prompt() -> String {
    String::from(
        "Classify the patient's reply to a yes/no symptom question. \
Output exactly one word: present or absent.",
    )
}

/// Bounded window over the transcript shared with backend agents.
pub fn conversation_window(turns: &[DialogueTurn], max_turns: usize) -> Vec<ChatMessage> {
    let start = turns.len().saturating_sub(max_turns);
    turns[start..]
        .iter()
        .map(|t| ChatMessage {
            role: String::from(match t.role {
                crate::model::Role::Doctor => "assistant",
                crate::model::Role::Patient => "user",
            }),
            content: t.text.clone(),
        })
        .collect()
}

pub fn doctor_request(
    profile: &DoctorProfile,
    turns: &[DialogueTurn],
    question: &str,
) -> BackendRequest {
    let mut messages = conversation_window(turns, 8);
    messages.push(ChatMessage {
        role: String::from("user"),
        content: format!("[instruction] Ask the patient: {question}"),
    });
    BackendRequest {
        tag: RequestTag::DoctorTurn,
        system_prompt: doctor_system_prompt(profile),
        messages,
        max_chars: profile.reply_char_limit,
        temperature: 0.7,
    }
}

pub fn patient_request(
    emr: &Emr,
    fed: &FedNarrative,
    kg: &DsdKg,
    turns: &[DialogueTurn],
    doctor_text: &str,
) -> BackendRequest {
    let mut messages = conversation_window(turns, 8);
    messages.push(ChatMessage {
        role: String::from("assistant"),
        content: String::from(doctor_text),
    });
    BackendRequest {
        tag: RequestTag::PatientTurn,
        system_prompt: patient_system_prompt(emr, fed, kg),
        messages,
        max_chars: 400,
        temperature: 0.9,
    }
}

pub fn classifier_request(question: &str, reply: &str) -> BackendRequest {
    BackendRequest {
        tag: RequestTag::Classifier,
        system_prompt: classifier_system_prompt(),
        messages: alloc::vec![ChatMessage {
            role: String::from("user"),
            content: format!("Question: {question}\nReply: {reply}"),
        }],
        max_chars: 10,
        temperature: 0.0,
    }
}

/// Parses a backend classifier completion; `None` means unusable output
/// (callers fall back to [`classify_response_text`]).
pub fn parse_classifier_output(output: &str) -> Option<SymptomResponse> {
    match output.trim().to_lowercase().as_str() {
        "present" => Some(SymptomResponse::Present),
        "absent" => Some(SymptomResponse::Absent),
        _ => None,
    }
}

/// Label frequencies over a list of ordered schedules; test helper for
/// scheduling fairness.
pub fn first_label_histogram(orders: &[Vec<DisorderLabel>]) -> BTreeMap<DisorderLabel, usize> {
    let mut hist = BTreeMap::new();
    for order in orders {
        if let Some(first) = order.first() {
            *hist.entry(*first).or_insert(0) += 1;
        }
    }
    hist
}
