//! Per-session interview engine: schedules the disorder machines, drives
//! doctor/patient turns, handles experience digressions and the context
//! tree, and assembles the final dialogue record.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::agents::{
    classifier_request, classify_response_text, doctor_request, is_dial_end, need_exp_branch,
    order_gen, parse_classifier_output, patient_request,
};
use crate::backend::{Backend, BackendError, BackendRequest};
use crate::knowledge::{DsdKg, KgError};
use crate::machine::{
    init_runtime, labels_from_terminals, render_question, EpisodeFlag, MachineError,
    StateMachineDef,
};
use crate::model::{
    validate_emr, DialogueSession, DialogueTurn, DisorderLabel, DoctorProfile, Emr, FedNarrative,
    FictitiousExperience, PersonalHistory, Role, SchedulingStrategy, SymptomResponse,
};
use crate::rng::SessionRng;
use crate::scripted::{
    scripted_context_reply, scripted_doctor_reply, scripted_experiences, scripted_narrative,
    scripted_patient_reply, scripted_personal_histories, truncate_chars,
};
use crate::tree::{init_tree, ContextLeaf, ContextTreeDef, EXPERIENCE_BRANCH};

/// Hard ceiling on turns per session; exceeding it is an engine fault, not
/// a silent truncation.
pub const TURN_CAP: usize = 200;

#[derive(Debug)]
pub enum SessionError {
    InvalidEmr(Vec<String>),
    FedMismatch { fed_emr: String, emr: String },
    TurnCapExceeded { cap: usize },
    Machine(MachineError),
    Knowledge(KgError),
    Backend(BackendError),
}

impl core::fmt::Display for SessionError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SessionError::InvalidEmr(issues) => {
                write!(f, "record failed validation ({} issues)", issues.len())
            }
            SessionError::FedMismatch { fed_emr, emr } => {
                write!(f, "narrative belongs to record {fed_emr}, not {emr}")
            }
            SessionError::TurnCapExceeded { cap } => {
                write!(f, "session exceeded the {cap}-turn cap")
            }
            SessionError::Machine(e) => write!(f, "machine fault: {e}"),
            SessionError::Knowledge(e) => write!(f, "knowledge graph fault: {e}"),
            SessionError::Backend(e) => write!(f, "{e}"),
        }
    }
}

impl From<MachineError> for SessionError {
    fn from(e: MachineError) -> Self {
        SessionError::Machine(e)
    }
}

impl From<KgError> for SessionError {
    fn from(e: KgError) -> Self {
        SessionError::Knowledge(e)
    }
}

impl From<BackendError> for SessionError {
    fn from(e: BackendError) -> Self {
        SessionError::Backend(e)
    }
}

/// Generated narrative building blocks for one record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FedBundle {
    pub histories: Vec<PersonalHistory>,
    pub experiences: Vec<FictitiousExperience>,
}

impl FedBundle {
    /// Number of distinct (history, experience) narrative pairs.
    pub fn capacity(&self) -> usize {
        self.histories.len() * self.experiences.len()
    }
}

/// Builds the narrative pool for a record: five personal histories and ten
/// fictitious experiences. The record must be valid first.
pub fn generate_fed(emr: &Emr, kg: &DsdKg) -> Result<FedBundle, SessionError> {
    let issues = validate_emr(emr, kg);
    if !issues.is_empty() {
        return Err(SessionError::InvalidEmr(issues));
    }
    Ok(FedBundle {
        histories: scripted_personal_histories(emr),
        experiences: scripted_experiences(emr),
    })
}

/// Renders one first-person narrative from a (history, experience) pair.
/// Both parts must belong to the given record.
pub fn render_narrative(
    emr: &Emr,
    history: &PersonalHistory,
    experience: &FictitiousExperience,
) -> Result<FedNarrative, SessionError> {
    let h_prefix = format!("{}-h", emr.emr_id);
    let e_prefix = format!("{}-e", emr.emr_id);
    if !history.history_id.starts_with(h_prefix.as_str()) {
        return Err(SessionError::FedMismatch {
            fed_emr: history.history_id.clone(),
            emr: emr.emr_id.clone(),
        });
    }
    if !experience.experience_id.starts_with(e_prefix.as_str()) {
        return Err(SessionError::FedMismatch {
            fed_emr: experience.experience_id.clone(),
            emr: emr.emr_id.clone(),
        });
    }
    Ok(FedNarrative {
        emr_id: emr.emr_id.clone(),
        history_id: history.history_id.clone(),
        experience_id: experience.experience_id.clone(),
        narrative: scripted_narrative(emr, history, experience),
    })
}

/// How agent text is produced.
pub enum AgentMode<'a> {
    /// Deterministic template agents; fully offline.
    Scripted,
    /// Doctor/patient/classifier text from a completion backend.
    Backend(&'a dyn Backend),
}

pub struct SessionInputs<'a> {
    pub session_id: String,
    pub emr: &'a Emr,
    pub fed: &'a FedNarrative,
    pub profile: &'a DoctorProfile,
    pub strategy: SchedulingStrategy,
    pub seed: u64,
    pub defs: &'a BTreeMap<DisorderLabel, StateMachineDef>,
    pub kg: &'a DsdKg,
    pub tree: &'a ContextTreeDef,
}

/// The depression machine must run before the bipolar machine so a
/// confirmed depressive episode can inform the bipolar-II clause.
pub fn ensure_mdd_before_bd(order: &mut Vec<DisorderLabel>) {
    let mdd = order.iter().position(|l| *l == DisorderLabel::MDD);
    let bd = order.iter().position(|l| *l == DisorderLabel::BD);
    if let (Some(mdd), Some(bd)) = (mdd, bd) {
        if mdd > bd {
            let label = order.remove(mdd);
            order.insert(bd, label);
        }
    }
}

struct Transcript {
    turns: Vec<DialogueTurn>,
}

impl Transcript {
    fn push(
        &mut self,
        role: Role,
        text: String,
        topic_state: Option<String>,
        classified: Option<SymptomResponse>,
    ) -> Result<(), SessionError> {
        if self.turns.len() >= TURN_CAP {
            return Err(SessionError::TurnCapExceeded { cap: TURN_CAP });
        }
        self.turns.push(DialogueTurn {
            index: self.turns.len() as u32,
            role,
            text,
            topic_state,
            classified_response: classified,
        });
        Ok(())
    }

    fn doctor_count(&self) -> usize {
        self.turns.iter().filter(|t| t.role == Role::Doctor).count()
    }
}

fn complete(backend: &dyn Backend, request: &BackendRequest) -> Result<String, SessionError> {
    Ok(backend.complete(request)?)
}

fn doctor_text(
    mode: &AgentMode<'_>,
    profile: &DoctorProfile,
    transcript: &Transcript,
    question: &str,
) -> Result<String, SessionError> {
    match mode {
        AgentMode::Scripted => Ok(scripted_doctor_reply(
            profile,
            question,
            transcript.doctor_count(),
        )),
        AgentMode::Backend(backend) => {
            let text = complete(*backend, &doctor_request(profile, &transcript.turns, question))?;
            Ok(truncate_chars(&text, profile.reply_char_limit))
        }
    }
}

fn patient_free_text(
    mode: &AgentMode<'_>,
    inputs: &SessionInputs<'_>,
    transcript: &Transcript,
    doctor_line: &str,
    scripted_reply: String,
) -> Result<String, SessionError> {
    match mode {
        AgentMode::Scripted => Ok(scripted_reply),
        AgentMode::Backend(backend) => complete(
            *backend,
            &patient_request(inputs.emr, inputs.fed, inputs.kg, &transcript.turns, doctor_line),
        ),
    }
}

fn classify(
    mode: &AgentMode<'_>,
    question: &str,
    reply: &str,
) -> Result<SymptomResponse, SessionError> {
    match mode {
        AgentMode::Scripted => Ok(classify_response_text(reply)),
        AgentMode::Backend(backend) => {
            match backend.complete(&classifier_request(question, reply)) {
                Ok(output) => {
                    Ok(parse_classifier_output(&output)
                        .unwrap_or_else(|| classify_response_text(reply)))
                }
                // The rule classifier covers transient classifier failures;
                // doctor/patient completions still fail hard.
                Err(BackendError::Timeout { .. }) => Ok(classify_response_text(reply)),
                Err(e) => Err(SessionError::Backend(e)),
            }
        }
    }
}

fn branch_of<'d>(tree: &'d ContextTreeDef, leaf_id: &str) -> &'d str {
    tree.branches
        .iter()
        .find(|(_, leaves)| leaves.iter().any(|l| l.id == leaf_id))
        .map(|(branch, _)| branch.as_str())
        .unwrap_or("personal_history")
}

fn ask_context_leaf(
    mode: &AgentMode<'_>,
    inputs: &SessionInputs<'_>,
    transcript: &mut Transcript,
    leaf: &ContextLeaf,
    branch: &str,
) -> Result<(), SessionError> {
    let doctor_line = doctor_text(mode, inputs.profile, transcript, &leaf.question)?;
    transcript.push(Role::Doctor, doctor_line.clone(), Some(leaf.id.clone()), None)?;
    let scripted = scripted_context_reply(inputs.emr, inputs.fed, branch, leaf);
    let reply = patient_free_text(mode, inputs, transcript, &doctor_line, scripted)?;
    transcript.push(Role::Patient, reply, Some(leaf.id.clone()), None)?;
    Ok(())
}

/// Runs one complete interview and returns the dialogue record.
pub fn run_session(
    inputs: &SessionInputs<'_>,
    mode: &AgentMode<'_>,
) -> Result<DialogueSession, SessionError> {
    if inputs.fed.emr_id != inputs.emr.emr_id {
        return Err(SessionError::FedMismatch {
            fed_emr: inputs.fed.emr_id.clone(),
            emr: inputs.emr.emr_id.clone(),
        });
    }

    let mut rng = SessionRng::from_seed(inputs.seed);
    let mut transcript = Transcript { turns: Vec::new() };
    let mut tree_rt = init_tree(inputs.tree, inputs.emr.demographic.gender);
    let mut experience_count = 0usize;

    // Opening exchange: greeting, then the complaint in the patient's words.
    let greeting = "Hello, please have a seat. What brings you in today?";
    let line = doctor_text(mode, inputs.profile, &transcript, greeting)?;
    transcript.push(Role::Doctor, line.clone(), None, None)?;
    let opening = format!(
        "{} Mostly, {}",
        inputs.fed.narrative,
        lowercase_first(&inputs.emr.chief_complaint)
    );
    let opening = patient_free_text(mode, inputs, &transcript, &line, opening)?;
    transcript.push(Role::Patient, opening.clone(), None, None)?;

    // Schedule the machines off the complaint as voiced by the patient.
    let mut order = order_gen(inputs.strategy, &opening, &mut rng);
    ensure_mdd_before_bd(&mut order);

    let mut final_diagnoses: BTreeMap<DisorderLabel, String> = BTreeMap::new();
    let mut past_mde = false;

    for disorder in order {
        let Some(def) = inputs.defs.get(&disorder) else {
            continue;
        };
        let mut machine = init_runtime(def);
        if disorder == DisorderLabel::BD && past_mde {
            machine.inject_flag(EpisodeFlag::PastMde);
        }
        let mut saw_present = false;

        while !machine.is_terminal() {
            let node = machine.current_topic()?;
            let position = machine.current_group_position();
            let question = render_question(node, position, &def.precise_cue);
            let doctor_line = doctor_text(mode, inputs.profile, &transcript, &question)?;
            transcript.push(
                Role::Doctor,
                doctor_line.clone(),
                Some(node.id.as_str().to_string()),
                None,
            )?;

            let (scripted_reply, _) = scripted_patient_reply(inputs.emr, inputs.kg, node)?;
            let reply = patient_free_text(mode, inputs, &transcript, &doctor_line, scripted_reply)?;
            let answer = classify(mode, &question, &reply)?;
            transcript.push(
                Role::Patient,
                reply,
                Some(node.id.as_str().to_string()),
                Some(answer),
            )?;

            machine.apply_response(answer, &mut rng)?;

            // First confirmed symptom in a machine invites an open-ended
            // digression, budget permitting.
            if answer == SymptomResponse::Present
                && need_exp_branch(!saw_present, experience_count)
            {
                if let Some(leaf) = tree_rt.trigger_experience_branch() {
                    let leaf = leaf.clone();
                    ask_context_leaf(mode, inputs, &mut transcript, &leaf, EXPERIENCE_BRANCH)?;
                    tree_rt.mark_visited(&leaf.id);
                    experience_count += 1;
                }
            }
            if answer == SymptomResponse::Present {
                saw_present = true;
            }
        }

        let terminal = machine
            .terminal()
            .expect("loop exits only on terminal")
            .to_string();
        if disorder == DisorderLabel::MDD
            && machine.episode_flags().contains(&EpisodeFlag::PastMde)
        {
            past_mde = true;
        }
        final_diagnoses.insert(disorder, terminal);
    }

    // Remaining background topics, in random order.
    while let Some(leaf) = tree_rt.next_required_leaf(&mut rng) {
        let leaf = leaf.clone();
        let branch = branch_of(inputs.tree, &leaf.id).to_string();
        ask_context_leaf(mode, inputs, &mut transcript, &leaf, &branch)?;
        tree_rt.mark_visited(&leaf.id);
    }

    debug_assert!(is_dial_end(true, tree_rt.required_complete()));

    let predicted_labels = labels_from_terminals(&final_diagnoses, inputs.defs);
    let verdict = if predicted_labels.is_empty() {
        String::from("I do not see a diagnosable disorder today, but let us stay in touch.")
    } else {
        let codes: Vec<&str> = predicted_labels.labels.iter().map(|l| l.code()).collect();
        format!(
            "Thank you for your openness. My assessment points to: {}. We will discuss next steps.",
            codes.join(", ")
        )
    };
    let line = doctor_text(mode, inputs.profile, &transcript, &verdict)?;
    transcript.push(Role::Doctor, line, None, None)?;
    transcript.push(
        Role::Patient,
        String::from("Thank you, doctor."),
        None,
        None,
    )?;

    Ok(DialogueSession {
        session_id: inputs.session_id.clone(),
        emr_id: inputs.emr.emr_id.clone(),
        fed: inputs.fed.clone(),
        doctor_profile_id: inputs.profile.profile_id,
        strategy: inputs.strategy,
        rng_seed: inputs.seed,
        turns: transcript.turns,
        final_diagnoses,
        predicted_labels,
    })
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
