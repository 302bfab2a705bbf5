//! Diagnostic context tree: background topics the interviewer covers
//! outside the disorder machines. Three branches: family history, personal
//! history (both with required leaves) and an on-demand experience-inquiry
//! branch for open-ended follow-ups.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::Gender;
use crate::rng::SessionRng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextLeaf {
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub required: bool,
    /// When set, the leaf applies only to patients of this gender.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextTreeDef {
    pub branches: alloc::collections::BTreeMap<String, Vec<ContextLeaf>>,
}

pub const EXPERIENCE_BRANCH: &str = "experience_inquiry";

#[derive(Debug)]
pub enum TreeError {
    Parse(String),
    Invalid(Vec<String>),
}

impl core::fmt::Display for TreeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TreeError::Parse(msg) => write!(f, "context tree parse error: {msg}"),
            TreeError::Invalid(issues) => {
                write!(f, "invalid context tree ({} issues):", issues.len())?;
                for issue in issues {
                    write!(f, "\n  - {issue}")?;
                }
                Ok(())
            }
        }
    }
}

pub fn load_tree_def(source: &str) -> Result<ContextTreeDef, TreeError> {
    let def: ContextTreeDef =
        serde_json::from_str(source).map_err(|e| TreeError::Parse(e.to_string()))?;
    let mut issues = Vec::new();
    let mut seen = BTreeSet::new();
    for (branch, leaves) in &def.branches {
        if leaves.is_empty() {
            issues.push(alloc::format!("branch {branch} has no leaves"));
        }
        for leaf in leaves {
            if !seen.insert(leaf.id.clone()) {
                issues.push(alloc::format!("duplicate leaf id {}", leaf.id));
            }
        }
    }
    if !def.branches.contains_key(EXPERIENCE_BRANCH) {
        issues.push(alloc::format!("missing branch {EXPERIENCE_BRANCH}"));
    }
    if issues.is_empty() {
        Ok(def)
    } else {
        Err(TreeError::Invalid(issues))
    }
}

pub const CONTEXT_TREE_JSON: &str = include_str!("../data/context_tree.json");

pub fn builtin_tree_def() -> ContextTreeDef {
    load_tree_def(CONTEXT_TREE_JSON).expect("shipped context tree must be valid")
}

/// Per-session traversal state over one tree definition.
#[derive(Debug, Clone)]
pub struct TreeRuntime<'d> {
    def: &'d ContextTreeDef,
    gender: Gender,
    visited: BTreeSet<String>,
}

pub fn init_tree(def: &ContextTreeDef, gender: Gender) -> TreeRuntime<'_> {
    TreeRuntime {
        def,
        gender,
        visited: BTreeSet::new(),
    }
}

impl<'d> TreeRuntime<'d> {
    fn applies(&self, leaf: &ContextLeaf) -> bool {
        leaf.gender.map_or(true, |g| g == self.gender)
    }

    fn remaining_required(&self) -> Vec<&'d ContextLeaf> {
        self.def
            .branches
            .iter()
            .filter(|(branch, _)| branch.as_str() != EXPERIENCE_BRANCH)
            .flat_map(|(_, leaves)| leaves.iter())
            .filter(|l| l.required && self.applies(l) && !self.visited.contains(&l.id))
            .collect()
    }

    /// Uniform pick among unvisited required leaves; `None` once all are
    /// covered.
    pub fn next_required_leaf(&self, rng: &mut SessionRng) -> Option<&'d ContextLeaf> {
        let remaining = self.remaining_required();
        if remaining.is_empty() {
            None
        } else {
            Some(remaining[rng.pick_index(remaining.len())])
        }
    }

    /// Next unvisited experience-inquiry leaf in definition order; `None`
    /// when the branch is exhausted.
    pub fn trigger_experience_branch(&self) -> Option<&'d ContextLeaf> {
        self.def
            .branches
            .get(EXPERIENCE_BRANCH)?
            .iter()
            .find(|l| self.applies(l) && !self.visited.contains(&l.id))
    }

    pub fn mark_visited(&mut self, leaf_id: &str) {
        self.visited.insert(leaf_id.to_string());
    }

    pub fn required_complete(&self) -> bool {
        self.remaining_required().is_empty()
    }

    pub fn visited(&self) -> &BTreeSet<String> {
        &self.visited
    }
}
