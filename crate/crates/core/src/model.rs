//! Shared domain types: disorders, patient records, experiences, doctor
//! profiles and dialogue records.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::knowledge::{DsdKg, SymptomId};

/// The four disorders covered by the interview machines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DisorderLabel {
    MDD,
    AD,
    BD,
    ADHD,
}

impl DisorderLabel {
    /// Fixed label order used for tie-breaking and display.
    pub const ALL: [DisorderLabel; 4] = [
        DisorderLabel::MDD,
        DisorderLabel::AD,
        DisorderLabel::BD,
        DisorderLabel::ADHD,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            DisorderLabel::MDD => "MDD",
            DisorderLabel::AD => "AD",
            DisorderLabel::BD => "BD",
            DisorderLabel::ADHD => "ADHD",
        }
    }

    pub fn parse(code: &str) -> Option<DisorderLabel> {
        match code {
            "MDD" => Some(DisorderLabel::MDD),
            "AD" => Some(DisorderLabel::AD),
            "BD" => Some(DisorderLabel::BD),
            "ADHD" => Some(DisorderLabel::ADHD),
            _ => None,
        }
    }
}

impl core::fmt::Display for DisorderLabel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.code())
    }
}

/// A set of co-occurring disorder labels.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComorbidityProfile {
    pub labels: BTreeSet<DisorderLabel>,
}

impl ComorbidityProfile {
    pub fn new<I: IntoIterator<Item = DisorderLabel>>(labels: I) -> Self {
        ComorbidityProfile {
            labels: labels.into_iter().collect(),
        }
    }

    /// The six disease combinations a session must predict to be
    /// dataset-eligible.
    pub fn eligible_combinations() -> [ComorbidityProfile; 6] {
        use DisorderLabel::*;
        [
            ComorbidityProfile::new([AD, MDD]),
            ComorbidityProfile::new([BD, MDD]),
            ComorbidityProfile::new([ADHD, AD, MDD]),
            ComorbidityProfile::new([ADHD, MDD]),
            ComorbidityProfile::new([AD, BD, MDD]),
            ComorbidityProfile::new([ADHD, AD]),
        ]
    }

    pub fn is_eligible(&self) -> bool {
        Self::eligible_combinations().iter().any(|c| c == self)
    }

    pub fn contains(&self, label: DisorderLabel) -> bool {
        self.labels.contains(&label)
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demographic {
    pub gender: Gender,
    pub age: u32,
    pub education: String,
    pub marital_status: String,
    pub occupation: String,
}

/// Seven-section structured patient record grounding the patient agent.
///
/// `symptom_ids` carries the ground-truth symptom inventory; the free-text
/// sections are never parsed back into symptoms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Emr {
    pub emr_id: String,
    pub demographic: Demographic,
    pub chief_complaint: String,
    pub medical_condition: String,
    pub medical_history: String,
    pub personal_history: String,
    pub family_history: String,
    pub preliminary_diagnosis: ComorbidityProfile,
    pub symptom_ids: BTreeSet<SymptomId>,
}

/// Returns human-readable invariant violations; empty means the record is
/// well formed and consistent with the knowledge graph.
pub fn validate_emr(emr: &Emr, kg: &DsdKg) -> Vec<String> {
    let mut issues = Vec::new();
    if emr.emr_id.trim().is_empty() {
        issues.push(String::from("emr_id is empty"));
    }
    if emr.demographic.age == 0 {
        issues.push(String::from("demographic: age must be > 0"));
    }
    for (name, text) in [
        ("demographic.education", &emr.demographic.education),
        ("demographic.marital_status", &emr.demographic.marital_status),
        ("demographic.occupation", &emr.demographic.occupation),
        ("chief_complaint", &emr.chief_complaint),
        ("medical_condition", &emr.medical_condition),
        ("medical_history", &emr.medical_history),
        ("personal_history", &emr.personal_history),
        ("family_history", &emr.family_history),
    ] {
        if text.trim().is_empty() {
            issues.push(format!("section {name} is empty"));
        }
    }
    if emr.preliminary_diagnosis.is_empty() {
        issues.push(String::from("preliminary_diagnosis is empty"));
    }
    for label in &emr.preliminary_diagnosis.labels {
        let supported = kg
            .symptoms_of(*label)
            .map(|set| set.iter().any(|s| emr.symptom_ids.contains(s)))
            .unwrap_or(false);
        if !supported {
            issues.push(format!(
                "diagnosis {label} has no supporting symptom in symptom_ids"
            ));
        }
    }
    issues
}

/// Minimal count-bearing record used by the user filter. The upstream
/// posting corpus is not modelled; only the two counts matter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedUser {
    pub user_id: String,
    pub symptom_post_count: u32,
    pub distinct_symptom_count: u32,
}

/// Retains users with at least 10 symptom posts and at least 20 distinct
/// symptom types. Both bounds are inclusive.
pub fn filter_users(users: Vec<AnnotatedUser>) -> Vec<AnnotatedUser> {
    users
        .into_iter()
        .filter(|u| u.symptom_post_count >= 10 && u.distinct_symptom_count >= 20)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FictitiousExperience {
    pub experience_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonalHistory {
    pub history_id: String,
    pub text: String,
}

/// A first-person narrative pairing one personal history with one
/// fictitious experience of the same record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FedNarrative {
    pub emr_id: String,
    pub history_id: String,
    pub experience_id: String,
    pub narrative: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verbosity {
    Terse,
    Moderate,
    Verbose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagnosticSpeed {
    Fast,
    Deliberate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplanationFrequency {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DoctorProfile {
    pub profile_id: u8,
    pub age_band: String,
    pub specialty: String,
    pub empathy_style: String,
    pub verbosity: Verbosity,
    pub diagnostic_speed: DiagnosticSpeed,
    pub explanation_frequency: ExplanationFrequency,
    pub reply_char_limit: usize,
    pub empathy_phrases: Vec<String>,
}

/// The five built-in interviewer personas.
pub fn builtin_doctor_profiles() -> Vec<DoctorProfile> {
    fn phrases(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| String::from(*s)).collect()
    }
    alloc::vec![
        DoctorProfile {
            profile_id: 1,
            age_band: String::from("30-39"),
            specialty: String::from("general psychiatry"),
            empathy_style: String::from("warm and reassuring"),
            verbosity: Verbosity::Moderate,
            diagnostic_speed: DiagnosticSpeed::Deliberate,
            explanation_frequency: ExplanationFrequency::High,
            reply_char_limit: 160,
            empathy_phrases: phrases(&[
                "I hear you.",
                "Thank you for sharing that.",
                "That sounds difficult.",
            ]),
        },
        DoctorProfile {
            profile_id: 2,
            age_band: String::from("50-59"),
            specialty: String::from("mood disorders"),
            empathy_style: String::from("calm and analytical"),
            verbosity: Verbosity::Terse,
            diagnostic_speed: DiagnosticSpeed::Fast,
            explanation_frequency: ExplanationFrequency::Low,
            reply_char_limit: 90,
            empathy_phrases: phrases(&["I see.", "Understood.", "Noted."]),
        },
        DoctorProfile {
            profile_id: 3,
            age_band: String::from("40-49"),
            specialty: String::from("anxiety disorders"),
            empathy_style: String::from("gentle and patient"),
            verbosity: Verbosity::Verbose,
            diagnostic_speed: DiagnosticSpeed::Deliberate,
            explanation_frequency: ExplanationFrequency::High,
            reply_char_limit: 220,
            empathy_phrases: phrases(&[
                "Take your time, there is no rush.",
                "That must have been hard to talk about.",
                "I appreciate you telling me this.",
            ]),
        },
        DoctorProfile {
            profile_id: 4,
            age_band: String::from("30-39"),
            specialty: String::from("adult ADHD"),
            empathy_style: String::from("direct but friendly"),
            verbosity: Verbosity::Moderate,
            diagnostic_speed: DiagnosticSpeed::Fast,
            explanation_frequency: ExplanationFrequency::Low,
            reply_char_limit: 130,
            empathy_phrases: phrases(&["Got it.", "Thanks, that helps.", "Okay."]),
        },
        DoctorProfile {
            profile_id: 5,
            age_band: String::from("60-69"),
            specialty: String::from("general psychiatry"),
            empathy_style: String::from("grandfatherly and unhurried"),
            verbosity: Verbosity::Verbose,
            diagnostic_speed: DiagnosticSpeed::Deliberate,
            explanation_frequency: ExplanationFrequency::High,
            reply_char_limit: 240,
            empathy_phrases: phrases(&[
                "Mm, I understand.",
                "Many people feel this way, you are not alone.",
                "Let us look at this together.",
            ]),
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Doctor,
    Patient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymptomResponse {
    Present,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueTurn {
    pub index: u32,
    pub role: Role,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub topic_state: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classified_response: Option<SymptomResponse>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulingStrategy {
    Random,
    SymptomInformed,
}

impl SchedulingStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulingStrategy::Random => "random",
            SchedulingStrategy::SymptomInformed => "symptom_informed",
        }
    }
}

/// One generated interview with its per-machine outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueSession {
    pub session_id: String,
    pub emr_id: String,
    pub fed: FedNarrative,
    pub doctor_profile_id: u8,
    pub strategy: SchedulingStrategy,
    pub rng_seed: u64,
    pub turns: Vec<DialogueTurn>,
    pub final_diagnoses: BTreeMap<DisorderLabel, String>,
    pub predicted_labels: ComorbidityProfile,
}

impl DialogueSession {
    /// Checks turn alternation (doctor first) and index contiguity.
    pub fn check_turn_invariants(&self) -> Vec<String> {
        let mut issues = Vec::new();
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.index as usize != i {
                issues.push(format!("turn {i} has index {}", turn.index));
            }
            let expected = if i % 2 == 0 { Role::Doctor } else { Role::Patient };
            if turn.role != expected {
                issues.push(format!("turn {i} breaks doctor/patient alternation"));
            }
        }
        issues
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::kg_from_machines;
    use crate::machine::builtin_machine_defs;
    use alloc::string::ToString;
    use alloc::vec;

    fn user(posts: u32, symptoms: u32) -> AnnotatedUser {
        AnnotatedUser {
            user_id: "u".to_string(),
            symptom_post_count: posts,
            distinct_symptom_count: symptoms,
        }
    }

    #[test]
    fn filter_users_boundaries() {
        let kept = filter_users(vec![user(10, 20), user(9, 25), user(30, 19)]);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].symptom_post_count, 10);
    }

    #[test]
    fn filter_users_idempotent() {
        let input = vec![user(10, 20), user(9, 25), user(12, 40), user(30, 19)];
        let once = filter_users(input);
        let twice = filter_users(once.clone());
        assert_eq!(once, twice);
    }

    fn sample_emr() -> Emr {
        Emr {
            emr_id: "emr-1".to_string(),
            demographic: Demographic {
                gender: Gender::Female,
                age: 24,
                education: "university".to_string(),
                marital_status: "single".to_string(),
                occupation: "student".to_string(),
            },
            chief_complaint: "persistent low mood and poor sleep".to_string(),
            medical_condition: "symptoms for six months".to_string(),
            medical_history: "none notable".to_string(),
            personal_history: "non-smoker".to_string(),
            family_history: "mother treated for depression".to_string(),
            preliminary_diagnosis: ComorbidityProfile::new([DisorderLabel::MDD]),
            symptom_ids: [SymptomId::new("A1"), SymptomId::new("A6")]
                .into_iter()
                .collect(),
        }
    }

    #[test]
    fn validate_emr_consistent_case() {
        let kg = kg_from_machines(&builtin_machine_defs()).unwrap();
        assert!(validate_emr(&sample_emr(), &kg).is_empty());
    }

    #[test]
    fn validate_emr_missing_symptom_support() {
        let kg = kg_from_machines(&builtin_machine_defs()).unwrap();
        let mut emr = sample_emr();
        emr.preliminary_diagnosis = ComorbidityProfile::new([DisorderLabel::BD]);
        let issues = validate_emr(&emr, &kg);
        assert_eq!(issues.len(), 1);
        assert!(issues[0].contains("BD"));
    }

    #[test]
    fn validate_emr_empty_section() {
        let kg = kg_from_machines(&builtin_machine_defs()).unwrap();
        let mut emr = sample_emr();
        emr.family_history = String::new();
        let issues = validate_emr(&emr, &kg);
        assert_eq!(issues.len(), 1);
        assert!(issues[0].contains("family_history"));
    }

    #[test]
    fn eligibility_matches_the_six_combinations() {
        use DisorderLabel::*;
        assert!(ComorbidityProfile::new([AD, MDD]).is_eligible());
        assert!(ComorbidityProfile::new([ADHD, AD]).is_eligible());
        assert!(!ComorbidityProfile::new([MDD]).is_eligible());
        assert!(!ComorbidityProfile::new([MDD, AD, BD, ADHD]).is_eligible());
    }
}
