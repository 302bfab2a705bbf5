//! Synthetic patient records whose symptom inventories drive the scripted
//! interview to the exact diagnoses listed in the record. Used by the
//! bundled demo corpus and the test suite.

use std::collections::BTreeSet;

use diasim_core::knowledge::SymptomId;
use diasim_core::model::{ComorbidityProfile, Demographic, DisorderLabel, Emr, Gender};

/// Symptom inventory that makes the scripted patient confirm a primary
/// current episode for the disorder.
fn positive_symptoms(label: DisorderLabel) -> &'static [&'static str] {
    match label {
        // Current depressive episode: low mood two weeks plus six of the
        // nine episode symptoms; external causes denied by the script.
        DisorderLabel::MDD => &["A1", "A1Y", "A3", "A6", "A12", "A13", "A16", "A17"],
        // Six-month uncontrollable worry plus three somatic symptoms,
        // without panic attacks.
        DisorderLabel::AD => &["F140", "F142_1", "F142_2", "F143", "F144", "F145", "F146"],
        // A full manic week with five peak symptoms and impairment.
        DisorderLabel::BD => &[
            "A134", "A135", "A135_1", "A137", "A137Y", "A138", "A139", "A140", "A141", "A142",
            "A148",
        ],
        // Inattention pattern: five of the group plus persistence.
        DisorderLabel::ADHD => &["K2", "K6", "K7", "K9", "K12", "K14", "K5"],
    }
}

fn complaint_fragment(label: DisorderLabel) -> &'static str {
    match label {
        DisorderLabel::MDD => "I feel depressed and hopeless most days",
        DisorderLabel::AD => "I worry constantly and feel on edge",
        DisorderLabel::BD => "I have stretches of unusually high energy and racing thoughts",
        DisorderLabel::ADHD => "I cannot focus and I am easily distracted",
    }
}

const OCCUPATIONS: &[&str] = &["Teacher", "Nurse", "Engineer", "Cashier", "Driver", "Writer"];
const EDUCATION: &[&str] = &["high school", "college", "university", "graduate school"];
const MARITAL: &[&str] = &["single", "married", "divorced"];

/// Builds `n_per_combo` records for each of the six eligible disorder
/// combinations. Every record passes validation, and a scripted session
/// over it predicts exactly its listed diagnosis.
pub fn sample_emrs(n_per_combo: usize) -> Vec<Emr> {
    let combos = ComorbidityProfile::eligible_combinations();
    let mut emrs = Vec::new();
    for (ci, combo) in combos.iter().enumerate() {
        for i in 0..n_per_combo {
            let mut symptom_ids: BTreeSet<SymptomId> = BTreeSet::new();
            let mut complaint_parts = Vec::new();
            for label in &combo.labels {
                symptom_ids.extend(positive_symptoms(*label).iter().map(|s| SymptomId::new(s)));
                complaint_parts.push(complaint_fragment(*label));
            }
            let variant = ci * n_per_combo + i;
            emrs.push(Emr {
                emr_id: format!("emr-{}-{:02}", ci + 1, i + 1),
                demographic: Demographic {
                    gender: if variant % 2 == 0 { Gender::Female } else { Gender::Male },
                    age: 22 + (variant as u32 * 3) % 40,
                    education: EDUCATION[variant % EDUCATION.len()].to_string(),
                    marital_status: MARITAL[variant % MARITAL.len()].to_string(),
                    occupation: OCCUPATIONS[variant % OCCUPATIONS.len()].to_string(),
                },
                chief_complaint: format!("{}.", complaint_parts.join("; also, ")),
                medical_condition: "Symptoms have been building for several months.".to_string(),
                medical_history: "No chronic somatic illness; no current medication.".to_string(),
                personal_history: format!(
                    "{} Sleeps irregularly, little exercise.",
                    if variant % 3 == 0 {
                        "Non-smoker, drinks occasionally."
                    } else {
                        "Smokes a few cigarettes a day, rarely drinks."
                    }
                ),
                family_history: if variant % 2 == 0 {
                    "A parent was treated for a mood disorder.".to_string()
                } else {
                    "No known psychiatric illness in the family.".to_string()
                },
                preliminary_diagnosis: combo.clone(),
                symptom_ids,
            });
        }
    }
    emrs
}
