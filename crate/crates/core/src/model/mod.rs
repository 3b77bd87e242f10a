//! The ALO object model.
//!
//! Every type here is a plain value: construct it, run [`validate`] on it,
//! and share it freely afterwards. The [`Registry`] is the only stateful
//! piece and owns the on-disk layout.

mod policy;
mod registry;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use policy::{CmpOp, Condition, Literal, PolicyParseError, Sensor, SkillRef};
pub use registry::{LoadIssue, LoadIssueKind, LoadReport, Registry, RegistryError};
pub use validate::{validate, ValidationReport, Violation, ViolationCode};

/// Sub-object names that would be misread: `sense` by the policy language,
/// the section titles by the markdown heading repair.
pub const RESERVED_SUB_NAMES: &[&str] = &["sense", "subObjList", "managerObj", "stepObjList"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Authored,
    LlmGenerated,
    Derived,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Authored => "authored",
            Provenance::LlmGenerated => "llm-generated",
            Provenance::Derived => "derived",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "authored" => Some(Provenance::Authored),
            "llm-generated" => Some(Provenance::LlmGenerated),
            "derived" => Some(Provenance::Derived),
            _ => None,
        }
    }
}

/// A complete Abstract Language Object.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Alo {
    pub name: String,
    #[serde(rename = "mainObj")]
    pub main_obj: String,
    #[serde(rename = "subObjList")]
    pub sub_objects: Vec<SubObject>,
    #[serde(rename = "managerObj")]
    pub manager: ManagerObject,
    #[serde(rename = "stepObjList")]
    pub steps: Vec<StepObject>,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubObject {
    pub name: String,
    pub skills: Vec<SkillSpec>,
    pub knowledge: Vec<String>,
    pub states: BTreeMap<String, StateVariable>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVariable {
    pub name: String,
    pub kind: StateKind,
}

/// A typed state value together with its domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum StateKind {
    Scalar {
        value: f64,
        min: f64,
        max: f64,
        unit: String,
    },
    Boolean {
        value: bool,
    },
    Label {
        value: String,
        domain: Vec<String>,
    },
    Vector3 {
        value: [f64; 3],
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Primitive {
    Move,
    Rotate,
    Jump,
    Emit,
    Wander,
    Flee,
    Seek,
    Idle,
}

impl Primitive {
    pub const ALL: [Primitive; 8] = [
        Primitive::Move,
        Primitive::Rotate,
        Primitive::Jump,
        Primitive::Emit,
        Primitive::Wander,
        Primitive::Flee,
        Primitive::Seek,
        Primitive::Idle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Primitive::Move => "move",
            Primitive::Rotate => "rotate",
            Primitive::Jump => "jump",
            Primitive::Emit => "emit",
            Primitive::Wander => "wander",
            Primitive::Flee => "flee",
            Primitive::Seek => "seek",
            Primitive::Idle => "idle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Primitive::ALL.into_iter().find(|p| p.as_str() == s)
    }

    /// Parameters the primitive cannot run without.
    pub fn required_parameters(self) -> &'static [ParamRequirement] {
        use ParamRequirement::*;
        match self {
            Primitive::Move => &[NonNegative("speed")],
            Primitive::Rotate => &[Number("rate")],
            Primitive::Jump => &[Positive("height")],
            Primitive::Emit => &[Label("event")],
            Primitive::Wander => &[Positive("speed"), NonNegative("jitter")],
            Primitive::Flee => &[Positive("radius"), Positive("speed")],
            Primitive::Seek => &[Label("target"), Positive("speed")],
            Primitive::Idle => &[],
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRequirement {
    Number(&'static str),
    NonNegative(&'static str),
    Positive(&'static str),
    Label(&'static str),
}

impl ParamRequirement {
    pub fn name(self) -> &'static str {
        match self {
            ParamRequirement::Number(n)
            | ParamRequirement::NonNegative(n)
            | ParamRequirement::Positive(n)
            | ParamRequirement::Label(n) => n,
        }
    }

    pub fn accepts(self, value: &ParamValue) -> bool {
        match (self, value) {
            (ParamRequirement::Number(_), ParamValue::Number(v)) => v.is_finite(),
            (ParamRequirement::NonNegative(_), ParamValue::Number(v)) => v.is_finite() && *v >= 0.0,
            (ParamRequirement::Positive(_), ParamValue::Number(v)) => v.is_finite() && *v > 0.0,
            (ParamRequirement::Label(_), ParamValue::Label(l)) => is_identifier(l),
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Label(String),
}

impl ParamValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            ParamValue::Number(v) => Some(*v),
            ParamValue::Label(_) => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            ParamValue::Label(l) => Some(l),
            ParamValue::Number(_) => None,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(v) => write!(f, "{v}"),
            ParamValue::Label(l) => f.write_str(l),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkillSpec {
    pub name: String,
    pub primitive: Primitive,
    pub parameters: BTreeMap<String, ParamValue>,
    /// Set when the source named a primitive we don't know; the skill then
    /// runs as `idle` and the original name is kept here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SkillSpec {
    pub fn new(name: impl Into<String>, primitive: Primitive) -> Self {
        Self {
            name: name.into(),
            primitive,
            parameters: BTreeMap::new(),
            note: None,
        }
    }

    pub fn with_number(mut self, key: &str, value: f64) -> Self {
        self.parameters.insert(key.to_string(), ParamValue::Number(value));
        self
    }

    pub fn with_label(mut self, key: &str, value: &str) -> Self {
        self.parameters
            .insert(key.to_string(), ParamValue::Label(value.to_string()));
        self
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        self.parameters.get(key).and_then(ParamValue::as_number)
    }

    pub fn label(&self, key: &str) -> Option<&str> {
        self.parameters.get(key).and_then(ParamValue::as_label)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyRule {
    pub when: Condition,
    pub skill: SkillRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub then: Option<String>,
}

impl fmt::Display for PolicyRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "when {} do {}", self.when, self.skill)?;
        if let Some(next) = &self.then {
            write!(f, " then {next}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManagerObject {
    #[serde(rename = "currentState")]
    pub current_state: String,
    #[serde(rename = "stateSet")]
    pub state_set: Vec<String>,
    pub policy: Vec<PolicyRule>,
    /// Logged only. Nothing reads it back to adjust the policy.
    #[serde(rename = "rewardAccumulator")]
    pub reward_accumulator: f64,
}

impl ManagerObject {
    /// A manager with a single state and no policy.
    pub fn idle(state: &str) -> Self {
        Self {
            current_state: state.to_string(),
            state_set: vec![state.to_string()],
            policy: Vec::new(),
            reward_accumulator: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepObject {
    pub index: u64,
    pub tick: u64,
    pub actor: String,
    pub skill: String,
    #[serde(rename = "resultingState")]
    pub resulting_state: String,
    pub note: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum AloError {
    #[error("ALO name must not be empty")]
    EmptyName,
    #[error("duplicate sub-object `{0}`")]
    DuplicateSubObject(String),
    #[error("manager policy targets missing skill `{0}`")]
    DanglingSkillReference(String),
    #[error("invalid ALO: {0}")]
    Invalid(ValidationReport),
}

impl Alo {
    /// Builds an authored ALO with an empty step log and validates it.
    pub fn new(
        name: &str,
        sub_objects: Vec<SubObject>,
        manager: ManagerObject,
    ) -> Result<Alo, AloError> {
        if name.trim().is_empty() {
            return Err(AloError::EmptyName);
        }
        let mut seen = std::collections::BTreeSet::new();
        for sub in &sub_objects {
            if !seen.insert(sub.name.as_str()) {
                return Err(AloError::DuplicateSubObject(sub.name.clone()));
            }
        }
        let alo = Alo {
            name: name.to_string(),
            main_obj: name.to_string(),
            sub_objects,
            manager,
            steps: Vec::new(),
            provenance: Provenance::Authored,
        };
        let report = validate(&alo);
        if let Some(v) = report.first(ViolationCode::DanglingSkillReference) {
            let idx = policy_index(&v.path);
            let skill = idx
                .and_then(|i| alo.manager.policy.get(i))
                .map(|r| r.skill.to_string())
                .unwrap_or_default();
            return Err(AloError::DanglingSkillReference(skill));
        }
        if !report.is_empty() {
            return Err(AloError::Invalid(report));
        }
        Ok(alo)
    }

    pub fn sub_object(&self, name: &str) -> Option<&SubObject> {
        self.sub_objects.iter().find(|s| s.name == name)
    }

    /// First skill with this name, searching sub-objects in order.
    pub fn skill(&self, name: &str) -> Option<&SkillSpec> {
        self.sub_objects
            .iter()
            .flat_map(|s| s.skills.iter())
            .find(|k| k.name == name)
    }

    pub fn skills(&self) -> impl Iterator<Item = &SkillSpec> {
        self.sub_objects.iter().flat_map(|s| s.skills.iter())
    }

    pub fn state(&self, sub: &str, var: &str) -> Option<&StateVariable> {
        self.sub_object(sub).and_then(|s| s.states.get(var))
    }

    /// Appends a step, assigning the next index.
    pub fn push_step(
        &mut self,
        tick: u64,
        actor: &str,
        skill: &str,
        resulting_state: &str,
        note: &str,
    ) {
        let index = self.steps.len() as u64;
        self.steps.push(StepObject {
            index,
            tick,
            actor: actor.to_string(),
            skill: skill.to_string(),
            resulting_state: resulting_state.to_string(),
            note: note.to_string(),
        });
    }
}

fn policy_index(path: &str) -> Option<usize> {
    let rest = path.strip_prefix("managerObj.policy[")?;
    rest.split(']').next()?.parse().ok()
}

impl SubObject {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            skills: Vec::new(),
            knowledge: Vec::new(),
            states: BTreeMap::new(),
        }
    }

    pub fn with_skill(mut self, skill: SkillSpec) -> Self {
        self.skills.push(skill);
        self
    }

    pub fn with_knowledge(mut self, fact: &str) -> Self {
        self.knowledge.push(fact.to_string());
        self
    }

    pub fn with_state(mut self, state: StateVariable) -> Self {
        self.states.insert(state.name.clone(), state);
        self
    }
}

impl StateVariable {
    pub fn scalar(name: &str, value: f64, min: f64, max: f64, unit: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: StateKind::Scalar {
                value,
                min,
                max,
                unit: unit.to_string(),
            },
        }
    }

    pub fn boolean(name: &str, value: bool) -> Self {
        Self {
            name: name.to_string(),
            kind: StateKind::Boolean { value },
        }
    }

    pub fn label(name: &str, value: &str, domain: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: StateKind::Label {
                value: value.to_string(),
                domain: domain.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    pub fn vector3(name: &str, value: [f64; 3]) -> Self {
        Self {
            name: name.to_string(),
            kind: StateKind::Vector3 { value },
        }
    }

    /// Human-readable value, used in prose and image prompts.
    pub fn display_value(&self) -> String {
        match &self.kind {
            StateKind::Scalar { value, unit, .. } if unit.is_empty() => format!("{value}"),
            StateKind::Scalar { value, unit, .. } => format!("{value} {unit}"),
            StateKind::Boolean { value } => value.to_string(),
            StateKind::Label { value, .. } => value.clone(),
            StateKind::Vector3 { value } => {
                format!("({}, {}, {})", value[0], value[1], value[2])
            }
        }
    }
}

/// `[A-Za-z_][A-Za-z0-9_-]*`, excluding the boolean literals.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    let Some(first) = chars.next() else {
        return false;
    };
    (first.is_ascii_alphabetic() || first == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        && s != "true"
        && s != "false"
}

/// Parses a numeric token. Rust's float parser also accepts `inf` and
/// `nan`, which are valid identifiers here, so tokens must start with a
/// digit, sign or point.
pub fn parse_number(s: &str) -> Option<f64> {
    let first = s.chars().next()?;
    if !(first.is_ascii_digit() || matches!(first, '-' | '+' | '.')) {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// ALO names are free text (`cat meets roomba`) but double as file stems
/// and appear inside policy expressions, so a few characters are banned.
pub fn is_alo_name(s: &str) -> bool {
    !s.is_empty()
        && s.trim() == s
        && !s
            .chars()
            .any(|c| c.is_control() || matches!(c, '/' | '\\' | '.' | '#' | '"' | '|' | '>'))
}

/// Single-line text with no surrounding whitespace.
pub fn is_single_line(s: &str) -> bool {
    s.trim() == s && !s.chars().any(char::is_control)
}
