//! Declarative diagnostic state machines and their runtime.
//!
//! Each disorder has one sub-machine described by a JSON document: question
//! nodes with present/absent successors, sub-state groups evaluated against
//! a present-count threshold, terminal diagnoses, and (for the bipolar
//! machine) determinative clauses resolved from episode flags. The runtime
//! walks a machine under binary responses, performing a localized random
//! traversal inside groups.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{ComorbidityProfile, DisorderLabel, SymptomResponse};
use crate::rng::SessionRng;

/// Stable topic/state code, e.g. `A1`, `F144`, `K13N`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub String);

impl StateId {
    pub fn new(code: &str) -> Self {
        StateId(code.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl core::fmt::Display for StateId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Level {
    ILS,
    BLS,
}

/// The four clinical question categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    AffectiveCognitive,
    PhysioBehavioral,
    ImpairmentRisk,
    ComorbidContributing,
}

impl Category {
    /// Categories whose nodes describe patient symptoms (and therefore feed
    /// the knowledge graph). Comorbid/contributing factor questions ask
    /// about external causes, not symptoms.
    pub fn is_symptom(&self) -> bool {
        !matches!(self, Category::ComorbidContributing)
    }
}

/// Where a transition may lead: another question node, a sub-state group,
/// or a terminal diagnosis code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    Node(StateId),
    Group(String),
    Terminal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionNode {
    pub id: StateId,
    pub level: Level,
    pub category: Category,
    /// Question text with a `{time}` placeholder for the temporal cue.
    pub question_template: String,
    pub group_id: Option<String>,
    pub present_next: Option<Target>,
    pub absent_next: Option<Target>,
}

impl QuestionNode {
    fn successor(&self, answer: SymptomResponse) -> Option<&Target> {
        match answer {
            SymptomResponse::Present => self.present_next.as_ref(),
            SymptomResponse::Absent => self.absent_next.as_ref(),
        }
    }

    /// A group member without successors in either direction; these gate
    /// the group transition.
    pub fn is_group_terminal(&self) -> bool {
        self.group_id.is_some() && self.present_next.is_none() && self.absent_next.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubStateGroup {
    pub group_id: String,
    pub member_ids: Vec<StateId>,
    pub threshold: u32,
    pub positive_next: Target,
    pub negative_next: Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeFlag {
    ManicEpisode,
    HypomanicEpisode,
    PastMde,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerminalDiagnosis {
    pub code: String,
    pub description: String,
    /// The disorder this terminal asserts as present, if any.
    pub contributes_label: Option<DisorderLabel>,
    /// Episode flag raised when traversal reaches this terminal, consumed
    /// by the determinative clauses.
    pub sets_flag: Option<EpisodeFlag>,
}

/// A determinative clause: when its required flags all hold at terminal
/// resolution time, the clause's terminal replaces the one reached by
/// traversal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeterminativeClause {
    pub clause_id: String,
    pub requires: BTreeSet<EpisodeFlag>,
    pub terminal: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateMachineDef {
    pub disorder: DisorderLabel,
    pub entry: StateId,
    /// Precise temporal cue for the first question of a group (and for
    /// ungrouped questions), e.g. "in the past two weeks".
    pub precise_cue: String,
    pub nodes: BTreeMap<StateId, QuestionNode>,
    pub groups: BTreeMap<String, SubStateGroup>,
    pub terminals: BTreeMap<String, TerminalDiagnosis>,
    pub clauses: Vec<DeterminativeClause>,
}

// ---------------------------------------------------------------------------
// Document format

#[derive(Debug, Deserialize)]
struct NodeDoc {
    level: Level,
    category: Category,
    template: String,
    #[serde(default)]
    group: Option<String>,
    #[serde(default)]
    present_next: Option<String>,
    #[serde(default)]
    absent_next: Option<String>,
}

#[derive(Debug, Deserialize)]
struct GroupDoc {
    members: Vec<String>,
    threshold: u32,
    positive_next: String,
    negative_next: String,
}

#[derive(Debug, Deserialize)]
struct TerminalDoc {
    description: String,
    #[serde(default)]
    contributes: Option<DisorderLabel>,
    #[serde(default)]
    sets_flag: Option<EpisodeFlag>,
}

#[derive(Debug, Deserialize)]
struct ClauseDoc {
    clause: String,
    requires: Vec<EpisodeFlag>,
    terminal: String,
}

#[derive(Debug, Deserialize)]
struct MachineDoc {
    disorder: DisorderLabel,
    entry: String,
    precise_cue: String,
    nodes: BTreeMap<String, NodeDoc>,
    groups: BTreeMap<String, GroupDoc>,
    terminals: BTreeMap<String, TerminalDoc>,
    #[serde(default)]
    clauses: Vec<ClauseDoc>,
}

#[derive(Debug)]
pub enum LoadError {
    /// Malformed document, with line/column of the offending token.
    Parse { line: usize, column: usize, message: String },
    /// Structurally valid document violating machine invariants.
    Invalid(Vec<String>),
}

impl core::fmt::Display for LoadError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            LoadError::Parse { line, column, message } => {
                write!(f, "parse error at line {line}, column {column}: {message}")
            }
            LoadError::Invalid(issues) => {
                write!(f, "invalid machine definition ({} issues):", issues.len())?;
                for issue in issues {
                    write!(f, "\n  - {issue}")?;
                }
                Ok(())
            }
        }
    }
}

fn resolve_target(
    raw: &str,
    nodes: &BTreeMap<String, NodeDoc>,
    groups: &BTreeMap<String, GroupDoc>,
    terminals: &BTreeMap<String, TerminalDoc>,
) -> Option<Target> {
    if nodes.contains_key(raw) {
        Some(Target::Node(StateId::new(raw)))
    } else if groups.contains_key(raw) {
        Some(Target::Group(raw.to_string()))
    } else if terminals.contains_key(raw) {
        Some(Target::Terminal(raw.to_string()))
    } else {
        None
    }
}

/// Parses a machine-definition document and validates the result. The
/// returned definition passes [`validate_machine`] with zero issues.
pub fn load_machine_def(source: &str) -> Result<StateMachineDef, LoadError> {
    let doc: MachineDoc = serde_json::from_str(source).map_err(|e| LoadError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut issues = Vec::new();
    let mut nodes = BTreeMap::new();
    for (id, node) in &doc.nodes {
        let mut resolve = |raw: &Option<String>, dir: &str| -> Option<Target> {
            raw.as_ref().and_then(|raw| {
                let target = resolve_target(raw, &doc.nodes, &doc.groups, &doc.terminals);
                if target.is_none() {
                    issues.push(format!("node {id}: {dir} references unknown state \"{raw}\""));
                }
                target
            })
        };
        let present_next = resolve(&node.present_next, "present_next");
        let absent_next = resolve(&node.absent_next, "absent_next");
        nodes.insert(
            StateId::new(id),
            QuestionNode {
                id: StateId::new(id),
                level: node.level,
                category: node.category,
                question_template: node.template.clone(),
                group_id: node.group.clone(),
                present_next,
                absent_next,
            },
        );
    }

    let mut groups = BTreeMap::new();
    for (gid, group) in &doc.groups {
        let mut resolve = |raw: &str, dir: &str| -> Target {
            resolve_target(raw, &doc.nodes, &doc.groups, &doc.terminals).unwrap_or_else(|| {
                issues.push(format!("group {gid}: {dir} references unknown state \"{raw}\""));
                Target::Terminal(raw.to_string())
            })
        };
        let positive_next = resolve(&group.positive_next, "positive_next");
        let negative_next = resolve(&group.negative_next, "negative_next");
        groups.insert(
            gid.clone(),
            SubStateGroup {
                group_id: gid.clone(),
                member_ids: group.members.iter().map(|m| StateId::new(m)).collect(),
                threshold: group.threshold,
                positive_next,
                negative_next,
            },
        );
    }

    let terminals = doc
        .terminals
        .iter()
        .map(|(code, t)| {
            (
                code.clone(),
                TerminalDiagnosis {
                    code: code.clone(),
                    description: t.description.clone(),
                    contributes_label: t.contributes,
                    sets_flag: t.sets_flag,
                },
            )
        })
        .collect();

    let clauses = doc
        .clauses
        .iter()
        .map(|c| DeterminativeClause {
            clause_id: c.clause.clone(),
            requires: c.requires.iter().copied().collect(),
            terminal: c.terminal.clone(),
        })
        .collect();

    let def = StateMachineDef {
        disorder: doc.disorder,
        entry: StateId::new(&doc.entry),
        precise_cue: doc.precise_cue,
        nodes,
        groups,
        terminals,
        clauses,
    };

    issues.extend(validate_machine(&def));
    if issues.is_empty() {
        Ok(def)
    } else {
        Err(LoadError::Invalid(issues))
    }
}

// ---------------------------------------------------------------------------
// Validation

/// A traversal unit for reachability and path enumeration: either a single
/// node or a whole group abstracted to its two outcomes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Unit {
    Node(StateId),
    Group(String),
    Terminal(String),
}

fn target_unit(target: &Target, def: &StateMachineDef) -> Unit {
    match target {
        Target::Node(id) => {
            // Entering a member node directly means entering its group.
            if let Some(gid) = def.nodes.get(id).and_then(|n| n.group_id.clone()) {
                Unit::Group(gid)
            } else {
                Unit::Node(id.clone())
            }
        }
        Target::Group(gid) => Unit::Group(gid.clone()),
        Target::Terminal(code) => Unit::Terminal(code.clone()),
    }
}

fn unit_successors(unit: &Unit, def: &StateMachineDef) -> Vec<Unit> {
    match unit {
        Unit::Node(id) => {
            let node = &def.nodes[id];
            [&node.present_next, &node.absent_next]
                .iter()
                .filter_map(|t| t.as_ref())
                .map(|t| target_unit(t, def))
                .collect()
        }
        Unit::Group(gid) => {
            let group = &def.groups[gid];
            alloc::vec![
                target_unit(&group.positive_next, def),
                target_unit(&group.negative_next, def),
            ]
        }
        Unit::Terminal(_) => Vec::new(),
    }
}

/// Statistics from exhaustive path enumeration with each group abstracted
/// to its two outcomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathStats {
    pub path_count: u64,
    pub reached_terminals: BTreeSet<String>,
}

/// Walks every present/absent path of the machine. Fails on cycles, on a
/// missing successor outside a group, or when the path count exceeds the
/// cap (pathological hand-edited definitions).
pub fn enumerate_paths(def: &StateMachineDef) -> Result<PathStats, String> {
    const PATH_CAP: u64 = 50_000_000;
    let mut stats = PathStats {
        path_count: 0,
        reached_terminals: BTreeSet::new(),
    };
    let mut stack: Vec<Unit> = Vec::new();
    let entry = target_unit(&Target::Node(def.entry.clone()), def);
    walk(&entry, def, &mut stack, &mut stats, PATH_CAP)?;
    return Ok(stats);

    fn walk(
        unit: &Unit,
        def: &StateMachineDef,
        stack: &mut Vec<Unit>,
        stats: &mut PathStats,
        cap: u64,
    ) -> Result<(), String> {
        if let Unit::Terminal(code) = unit {
            stats.path_count += 1;
            if stats.path_count > cap {
                return Err(format!("path count exceeds cap {cap}"));
            }
            stats.reached_terminals.insert(code.clone());
            return Ok(());
        }
        if stack.contains(unit) {
            return Err(format!("cycle through {unit:?}"));
        }
        let successors = unit_successors(unit, def);
        if let Unit::Node(id) = unit {
            if successors.len() != 2 {
                return Err(format!("node {id} lacks a successor; path cannot terminate"));
            }
        }
        stack.push(unit.clone());
        for succ in &successors {
            walk(succ, def, stack, stats, cap)?;
        }
        stack.pop();
        Ok(())
    }
}

/// Structural validation; empty result means every invariant holds.
pub fn validate_machine(def: &StateMachineDef) -> Vec<String> {
    let mut issues = Vec::new();

    if !def.nodes.contains_key(&def.entry) {
        issues.push(format!("entry state {} does not exist", def.entry));
        return issues;
    }
    if def.nodes.get(&def.entry).is_some_and(|n| n.group_id.is_some()) {
        issues.push(format!("entry state {} must not be a group member", def.entry));
    }
    if def.terminals.is_empty() {
        issues.push("machine has no terminal diagnoses".to_string());
    }

    for (gid, group) in &def.groups {
        if group.member_ids.is_empty() {
            issues.push(format!("group {gid} has no members"));
            continue;
        }
        if group.threshold == 0 || group.threshold as usize > group.member_ids.len() {
            issues.push(format!(
                "group {gid}: threshold {} exceeds group size {}",
                group.threshold,
                group.member_ids.len()
            ));
        }
        for member in &group.member_ids {
            match def.nodes.get(member) {
                None => issues.push(format!("group {gid}: member {member} does not exist")),
                Some(node) => {
                    if node.group_id.as_deref() != Some(gid.as_str()) {
                        issues.push(format!(
                            "group {gid}: member {member} is not tagged with this group"
                        ));
                    }
                    if node.level != Level::BLS {
                        issues.push(format!("group {gid}: member {member} is not a BLS node"));
                    }
                    for target in [&node.present_next, &node.absent_next].into_iter().flatten() {
                        match target {
                            Target::Node(id) if group.member_ids.contains(id) => {}
                            _ => issues.push(format!(
                                "group {gid}: member {member} successor must stay inside the group"
                            )),
                        }
                    }
                }
            }
        }
    }

    for (id, node) in &def.nodes {
        match &node.group_id {
            Some(gid) => match def.groups.get(gid) {
                None => issues.push(format!("node {id} references unknown group {gid}")),
                Some(group) => {
                    if !group.member_ids.contains(id) {
                        issues.push(format!("node {id} tagged {gid} but not listed as a member"));
                    }
                }
            },
            None => {
                if node.present_next.is_none() || node.absent_next.is_none() {
                    issues.push(format!("node {id} outside any group must have both successors"));
                }
            }
        }
    }

    for clause in &def.clauses {
        if !def.terminals.contains_key(&clause.terminal) {
            issues.push(format!(
                "clause {} targets unknown terminal {}",
                clause.clause_id, clause.terminal
            ));
        }
    }

    if !issues.is_empty() {
        return issues;
    }

    // Reachability over traversal units.
    let mut reachable_nodes: BTreeSet<StateId> = BTreeSet::new();
    let mut seen: BTreeSet<Unit> = BTreeSet::new();
    let mut queue: Vec<Unit> = alloc::vec![target_unit(&Target::Node(def.entry.clone()), def)];
    while let Some(unit) = queue.pop() {
        if !seen.insert(unit.clone()) {
            continue;
        }
        match &unit {
            Unit::Node(id) => {
                reachable_nodes.insert(id.clone());
            }
            Unit::Group(gid) => {
                reachable_nodes.extend(def.groups[gid].member_ids.iter().cloned());
            }
            Unit::Terminal(_) => {}
        }
        queue.extend(unit_successors(&unit, def));
    }
    for id in def.nodes.keys() {
        if !reachable_nodes.contains(id) {
            issues.push(format!("node {id} is unreachable from entry"));
        }
    }

    // Totality: every path must reach a terminal.
    if let Err(e) = enumerate_paths(def) {
        issues.push(format!("path enumeration failed: {e}"));
    }

    issues
}

// ---------------------------------------------------------------------------
// Runtime

#[derive(Debug, Clone, PartialEq, Eq)]
enum Cursor {
    Node(StateId),
    InGroup { group_id: String, member: StateId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransitionOutcome {
    /// Moved to a new question node (possibly the first member of a group).
    NextNode(StateId),
    /// Localized random traversal continued inside the current group.
    GroupContinues(StateId),
    /// A terminal diagnosis was reached (after clause resolution).
    Terminal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MachineError {
    AlreadyTerminated,
    DoubleAnswer(StateId),
    GroupExhausted(String),
}

impl core::fmt::Display for MachineError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MachineError::AlreadyTerminated => write!(f, "machine already reached a terminal"),
            MachineError::DoubleAnswer(id) => write!(f, "state {id} was already answered"),
            MachineError::GroupExhausted(gid) => {
                write!(f, "group {gid} has no unvisited member left")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupOutcome {
    Positive,
    Absent,
}

/// Positive iff the present-response tally meets the group threshold.
pub fn evaluate_group(tally: u32, group: &SubStateGroup) -> GroupOutcome {
    if tally >= group.threshold {
        GroupOutcome::Positive
    } else {
        GroupOutcome::Absent
    }
}

/// Mutable traversal state of one machine within one session.
#[derive(Debug, Clone)]
pub struct MachineRuntime<'d> {
    def: &'d StateMachineDef,
    cursor: Cursor,
    visited: BTreeSet<StateId>,
    responses: BTreeMap<StateId, SymptomResponse>,
    group_tallies: BTreeMap<String, u32>,
    /// Terminal reached by traversal, before clause resolution.
    raw_terminal: Option<String>,
    /// Final terminal after clause resolution.
    terminal: Option<String>,
    episode_flags: BTreeSet<EpisodeFlag>,
}

/// Positions the runtime at the machine entry with empty traversal state.
pub fn init_runtime(def: &StateMachineDef) -> MachineRuntime<'_> {
    MachineRuntime {
        def,
        cursor: Cursor::Node(def.entry.clone()),
        visited: BTreeSet::new(),
        responses: BTreeMap::new(),
        group_tallies: BTreeMap::new(),
        raw_terminal: None,
        terminal: None,
        episode_flags: BTreeSet::new(),
    }
}

impl<'d> MachineRuntime<'d> {
    pub fn def(&self) -> &'d StateMachineDef {
        self.def
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal.is_some()
    }

    /// Final terminal code, once reached.
    pub fn terminal(&self) -> Option<&str> {
        self.terminal.as_deref()
    }

    /// Terminal reached by traversal before clause resolution.
    pub fn raw_terminal(&self) -> Option<&str> {
        self.raw_terminal.as_deref()
    }

    pub fn visited(&self) -> &BTreeSet<StateId> {
        &self.visited
    }

    pub fn responses(&self) -> &BTreeMap<StateId, SymptomResponse> {
        &self.responses
    }

    pub fn group_tally(&self, group_id: &str) -> u32 {
        self.group_tallies.get(group_id).copied().unwrap_or(0)
    }

    pub fn episode_flags(&self) -> &BTreeSet<EpisodeFlag> {
        &self.episode_flags
    }

    /// Injects an externally established episode flag (e.g. a major
    /// depressive episode confirmed by another machine).
    pub fn inject_flag(&mut self, flag: EpisodeFlag) {
        self.episode_flags.insert(flag);
    }

    /// The question node at the cursor.
    pub fn current_topic(&self) -> Result<&'d QuestionNode, MachineError> {
        if self.is_terminal() {
            return Err(MachineError::AlreadyTerminated);
        }
        let id = match &self.cursor {
            Cursor::Node(id) => id,
            Cursor::InGroup { member, .. } => member,
        };
        Ok(&self.def.nodes[id])
    }

    /// 0-based position of the current question within its group (0 for
    /// ungrouped questions), used for temporal-cue selection.
    pub fn current_group_position(&self) -> usize {
        match &self.cursor {
            Cursor::Node(_) => 0,
            Cursor::InGroup { group_id, .. } => {
                let group = &self.def.groups[group_id];
                group
                    .member_ids
                    .iter()
                    .filter(|m| self.visited.contains(m))
                    .count()
            }
        }
    }

    /// Uniform choice among unvisited members of the current group.
    pub fn localized_random_pick(&self, rng: &mut SessionRng) -> Result<StateId, MachineError> {
        let group_id = match &self.cursor {
            Cursor::InGroup { group_id, .. } => group_id,
            Cursor::Node(_) => return Err(MachineError::GroupExhausted(String::from("<none>"))),
        };
        self.pick_in_group(group_id, rng)
    }

    fn pick_in_group(&self, group_id: &str, rng: &mut SessionRng) -> Result<StateId, MachineError> {
        let group = &self.def.groups[group_id];
        let unvisited: Vec<&StateId> = group
            .member_ids
            .iter()
            .filter(|m| !self.visited.contains(*m))
            .collect();
        if unvisited.is_empty() {
            return Err(MachineError::GroupExhausted(group_id.to_string()));
        }
        Ok(unvisited[rng.pick_index(unvisited.len())].clone())
    }

    fn enter(&mut self, target: &Target, rng: &mut SessionRng) -> Result<TransitionOutcome, MachineError> {
        match target {
            Target::Node(id) => {
                if let Some(gid) = self.def.nodes[id].group_id.clone() {
                    self.cursor = Cursor::InGroup { group_id: gid, member: id.clone() };
                } else {
                    self.cursor = Cursor::Node(id.clone());
                }
                Ok(TransitionOutcome::NextNode(id.clone()))
            }
            Target::Group(gid) => {
                let member = self.pick_in_group(gid, rng)?;
                self.cursor = Cursor::InGroup { group_id: gid.clone(), member: member.clone() };
                Ok(TransitionOutcome::NextNode(member))
            }
            Target::Terminal(code) => {
                self.raw_terminal = Some(code.clone());
                if let Some(flag) = self.def.terminals[code].sets_flag {
                    self.episode_flags.insert(flag);
                }
                let resolved = resolve_clauses(self.def, &self.episode_flags)
                    .unwrap_or(code.as_str())
                    .to_string();
                self.terminal = Some(resolved.clone());
                Ok(TransitionOutcome::Terminal(resolved))
            }
        }
    }

    /// Records the patient's answer to the current question and advances
    /// the machine.
    pub fn apply_response(
        &mut self,
        answer: SymptomResponse,
        rng: &mut SessionRng,
    ) -> Result<TransitionOutcome, MachineError> {
        if self.is_terminal() {
            return Err(MachineError::AlreadyTerminated);
        }
        let (current, group_id) = match self.cursor.clone() {
            Cursor::Node(id) => (id, None),
            Cursor::InGroup { group_id, member } => (member, Some(group_id)),
        };
        if self.visited.contains(&current) {
            return Err(MachineError::DoubleAnswer(current));
        }
        self.visited.insert(current.clone());
        self.responses.insert(current.clone(), answer);

        let Some(group_id) = group_id else {
            let node = &self.def.nodes[&current];
            let target = node
                .successor(answer)
                .cloned()
                .expect("validated machine: ungrouped node has both successors");
            return self.enter(&target, rng);
        };

        if answer == SymptomResponse::Present {
            *self.group_tallies.entry(group_id.clone()).or_insert(0) += 1;
        }

        // Inside a group: follow an intra-group successor when present,
        // otherwise continue the localized random traversal until every
        // group-terminal member has been visited.
        let node = &self.def.nodes[&current];
        if let Some(Target::Node(next)) = node.successor(answer) {
            if !self.visited.contains(next) {
                let next = next.clone();
                self.cursor = Cursor::InGroup { group_id, member: next.clone() };
                return Ok(TransitionOutcome::GroupContinues(next));
            }
        }

        let group = &self.def.groups[&group_id];
        let all_terminal_members_visited = group
            .member_ids
            .iter()
            .filter(|m| self.def.nodes[*m].is_group_terminal())
            .all(|m| self.visited.contains(m));
        if !all_terminal_members_visited {
            let next = self.pick_in_group(&group_id, rng)?;
            self.cursor = Cursor::InGroup { group_id, member: next.clone() };
            return Ok(TransitionOutcome::GroupContinues(next));
        }

        let tally = self.group_tally(&group_id);
        let target = match evaluate_group(tally, group) {
            GroupOutcome::Positive => group.positive_next.clone(),
            GroupOutcome::Absent => group.negative_next.clone(),
        };
        self.enter(&target, rng)
    }
}

/// Applies the determinative clauses to a flag set; `None` means the
/// traversal terminal stands.
pub fn resolve_clauses<'a>(
    def: &'a StateMachineDef,
    flags: &BTreeSet<EpisodeFlag>,
) -> Option<&'a str> {
    def.clauses
        .iter()
        .find(|c| c.requires.iter().all(|f| flags.contains(f)))
        .map(|c| c.terminal.as_str())
}

/// Renders a question template: position 0 (or an ungrouped node) gets the
/// machine's precise temporal cue, later positions the looser "recently".
pub fn render_question(node: &QuestionNode, position_in_group: usize, precise_cue: &str) -> String {
    let cue = if position_in_group == 0 { precise_cue } else { "recently" };
    node.question_template.replace("{time}", cue)
}

/// Union of `contributes_label` over the final terminal of each executed
/// machine.
pub fn labels_from_terminals(
    finals: &BTreeMap<DisorderLabel, String>,
    defs: &BTreeMap<DisorderLabel, StateMachineDef>,
) -> ComorbidityProfile {
    let mut labels = BTreeSet::new();
    for (disorder, code) in finals {
        if let Some(def) = defs.get(disorder) {
            if let Some(label) = def.terminals.get(code).and_then(|t| t.contributes_label) {
                labels.insert(label);
            }
        }
    }
    ComorbidityProfile { labels }
}

// ---------------------------------------------------------------------------
// Shipped definitions

pub const MDD_MACHINE_JSON: &str = include_str!("../data/machines/mdd.json");
pub const AD_MACHINE_JSON: &str = include_str!("../data/machines/ad.json");
pub const BD_MACHINE_JSON: &str = include_str!("../data/machines/bd.json");
pub const ADHD_MACHINE_JSON: &str = include_str!("../data/machines/adhd.json");

/// The four shipped disorder machines, keyed by disorder.
pub fn builtin_machine_defs() -> BTreeMap<DisorderLabel, StateMachineDef> {
    [MDD_MACHINE_JSON, AD_MACHINE_JSON, BD_MACHINE_JSON, ADHD_MACHINE_JSON]
        .iter()
        .map(|src| {
            let def = load_machine_def(src).expect("shipped machine definition must be valid");
            (def.disorder, def)
        })
        .collect()
}
