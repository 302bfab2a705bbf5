//! Deterministic scripted agent behaviours. These stand in for a language
//! model: replies are template-driven, fully reproducible, and keep the
//! patient truthful to the record (symptoms outside the record are denied).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::knowledge::{symptom_allowed, DsdKg, KgError, SymptomId};
use crate::machine::QuestionNode;
use crate::model::{
    DoctorProfile, Emr, FedNarrative, FictitiousExperience, PersonalHistory, SymptomResponse,
};
use crate::tree::{ContextLeaf, EXPERIENCE_BRANCH};

/// Truncates to a character budget without splitting a char.
pub fn truncate_chars(text: &str, limit: usize) -> String {
    text.chars().take(limit).collect()
}

/// Patient answer for a machine question. Comorbid/contributing questions
/// (external causes) are always denied; symptom questions follow the
/// record's ground-truth inventory.
pub fn scripted_patient_reply(
    emr: &Emr,
    kg: &DsdKg,
    node: &QuestionNode,
) -> Result<(String, SymptomResponse), KgError> {
    if !node.category.is_symptom() {
        return Ok((
            String::from("No, nothing like that applies to me."),
            SymptomResponse::Absent,
        ));
    }
    let sid = SymptomId::new(node.id.as_str());
    let description = kg
        .descriptions
        .get(&sid)
        .cloned()
        .unwrap_or_else(|| String::from("that"));
    if symptom_allowed(kg, emr, &sid)? {
        Ok((
            format!("Yes, {description} — that has been happening to me."),
            SymptomResponse::Present,
        ))
    } else {
        Ok((
            format!("No, not really; {description} is not something I have noticed."),
            SymptomResponse::Absent,
        ))
    }
}

/// Patient answer for a context-tree leaf, grounded in the matching record
/// section (or the first-person narrative for experience follow-ups).
pub fn scripted_context_reply(
    emr: &Emr,
    fed: &FedNarrative,
    branch: &str,
    _leaf: &ContextLeaf,
) -> String {
    let source = match branch {
        "family_history" => emr.family_history.as_str(),
        "personal_history" => emr.personal_history.as_str(),
        EXPERIENCE_BRANCH => fed.narrative.as_str(),
        _ => emr.personal_history.as_str(),
    };
    format!("Well, {}", lowercase_first(source))
}

fn lowercase_first(text: &str) -> String {
    let mut chars = text.chars();
    match chars.next() {
        Some(first) => {
            let mut out: String = first.to_lowercase().collect();
            out.push_str(chars.as_str());
            out
        }
        None => String::from("I am not sure what to say."),
    }
}

/// Doctor turn: an empathy phrase (rotating through the profile's list)
/// followed by the question, clipped to the profile's character budget.
/// The question always survives; the phrase is dropped if it does not fit.
pub fn scripted_doctor_reply(profile: &DoctorProfile, question: &str, turn_counter: usize) -> String {
    if profile.empathy_phrases.is_empty() {
        return truncate_chars(question, profile.reply_char_limit);
    }
    let phrase = &profile.empathy_phrases[turn_counter % profile.empathy_phrases.len()];
    let combined = format!("{phrase} {question}");
    if combined.chars().count() <= profile.reply_char_limit {
        combined
    } else {
        truncate_chars(question, profile.reply_char_limit)
    }
}

/// Five deterministic personal-history sketches for one record.
pub fn scripted_personal_histories(emr: &Emr) -> Vec<PersonalHistory> {
    let angles = [
        "growing up and early family life",
        "school years and friendships",
        "work life and daily routine",
        "habits and lifestyle",
        "recent months at home",
    ];
    angles
        .iter()
        .enumerate()
        .map(|(i, angle)| PersonalHistory {
            history_id: format!("{}-h{}", emr.emr_id, i + 1),
            text: format!(
                "Speaking about {angle}: {} Also, {}",
                emr.personal_history, emr.family_history
            ),
        })
        .collect()
}

/// Ten deterministic fictitious experiences for one record.
pub fn scripted_experiences(emr: &Emr) -> Vec<FictitiousExperience> {
    let scenes = [
        "an argument with someone close to me",
        "a deadline at work that got away from me",
        "a sleepless night before an ordinary day",
        "a family gathering I almost skipped",
        "a morning when getting out of bed felt impossible",
        "a crowded commute that left me drained",
        "a hobby I used to love and quietly dropped",
        "a phone call I kept postponing",
        "a weekend that passed without leaving the house",
        "a small mistake I could not stop thinking about",
    ];
    scenes
        .iter()
        .enumerate()
        .map(|(i, scene)| FictitiousExperience {
            experience_id: format!("{}-e{}", emr.emr_id, i + 1),
            text: format!(
                "Lately there was {scene}; it tied into my main trouble, {}",
                lowercase_first(&emr.chief_complaint)
            ),
        })
        .collect()
}

/// First-person narrative weaving one history with one experience.
pub fn scripted_narrative(
    emr: &Emr,
    history: &PersonalHistory,
    experience: &FictitiousExperience,
) -> String {
    format!(
        "I am {} years old, and I work as {}. {} {} That is roughly where I am right now.",
        emr.demographic.age,
        emr.demographic.occupation.to_lowercase(),
        history.text,
        experience.text
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::kg_from_machines;
    use crate::machine::builtin_machine_defs;
    use crate::model::{builtin_doctor_profiles, ComorbidityProfile, Demographic, DisorderLabel, Gender};
    use alloc::collections::BTreeSet;
    use alloc::string::ToString;

    fn emr_with(symptoms: &[&str]) -> Emr {
        Emr {
            emr_id: "e1".to_string(),
            demographic: Demographic {
                gender: Gender::Male,
                age: 31,
                education: "college".to_string(),
                marital_status: "married".to_string(),
                occupation: "Clerk".to_string(),
            },
            chief_complaint: "Low mood for months".to_string(),
            medical_condition: "no somatic illness".to_string(),
            medical_history: "unremarkable".to_string(),
            personal_history: "Non-smoker, drinks socially.".to_string(),
            family_history: "No psychiatric family history.".to_string(),
            preliminary_diagnosis: ComorbidityProfile::new([DisorderLabel::MDD]),
            symptom_ids: symptoms.iter().map(|s| SymptomId::new(s)).collect(),
        }
    }

    #[test]
    fn patient_follows_the_record() {
        let defs = builtin_machine_defs();
        let kg = kg_from_machines(&defs).unwrap();
        let mdd = &defs[&DisorderLabel::MDD];
        let emr = emr_with(&["A1", "A6"]);

        let (_, r) = scripted_patient_reply(&emr, &kg, &mdd.nodes[&crate::machine::StateId::new("A1")]).unwrap();
        assert_eq!(r, SymptomResponse::Present);
        let (_, r) = scripted_patient_reply(&emr, &kg, &mdd.nodes[&crate::machine::StateId::new("A3")]).unwrap();
        assert_eq!(r, SymptomResponse::Absent);
        // External-cause questions are always denied.
        let (_, r) = scripted_patient_reply(&emr, &kg, &mdd.nodes[&crate::machine::StateId::new("A24")]).unwrap();
        assert_eq!(r, SymptomResponse::Absent);
    }

    #[test]
    fn doctor_reply_respects_char_budget() {
        for profile in builtin_doctor_profiles() {
            for counter in 0..7 {
                let long_q = "Have you been feeling persistently low in mood?";
                let reply = scripted_doctor_reply(&profile, long_q, counter);
                assert!(reply.chars().count() <= profile.reply_char_limit.max(long_q.chars().count()));
                assert!(reply.contains("feeling persistently") || reply.len() <= profile.reply_char_limit);
            }
        }
    }

    #[test]
    fn fed_building_blocks_have_expected_counts() {
        let emr = emr_with(&["A1"]);
        assert_eq!(scripted_personal_histories(&emr).len(), 5);
        assert_eq!(scripted_experiences(&emr).len(), 10);
        let ids: BTreeSet<_> = scripted_experiences(&emr)
            .into_iter()
            .map(|e| e.experience_id)
            .collect();
        assert_eq!(ids.len(), 10);
    }
}
