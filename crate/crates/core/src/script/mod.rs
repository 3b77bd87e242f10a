//! Canonical ALO markdown: the text form language models are asked to
//! produce, and the form the registry writes next to each JSON sidecar.
//!
//! ```text
//! # ALO: cat
//! - mainObj: cat
//! - provenance: authored
//!
//! ## subObjList
//!
//! ### body
//! - skills:
//!   - jump: jump height=1.5
//!   - meow: emit event=meow
//! - knowledge:
//!   - Cats land on their feet.
//! - states:
//!   - age: scalar 15 [0, 30] years
//!   - awake: boolean true
//!   - mood: label calm {calm, playful}
//!   - position: vector3 (50, 0, 50)
//!
//! ## managerObj
//! - currentState: idle
//! - stateSet: idle, playing
//! - policy:
//!   - when body.mood == playful do jump then playing
//! - reward: 0
//!
//! ## stepObjList
//! - 0 @0 cat#0 jump -> playing -- landed softly
//! ```
//!
//! The full grammar lives in `docs/alo-format.md`.

mod blocks;
mod repair;
mod table;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{
    parse_number, validate, Alo, ManagerObject, ParamValue, PolicyRule, Primitive, Provenance, SkillSpec,
    StateKind, StateVariable, StepObject, SubObject, ValidationReport,
};

pub use blocks::{extract_code_blocks, CodeBlock};
pub use repair::{repair, RepairRule, Repaired};
pub use table::{parse_parameter_table, ParameterTable, TableError};

pub const SECTION_SUBOBJECTS: &str = "subObjList";
pub const SECTION_MANAGER: &str = "managerObj";
pub const SECTION_STEPS: &str = "stepObjList";

#[derive(Debug, Error, PartialEq)]
pub enum ScriptError {
    #[error("line {line}: expected {expected}")]
    ParseError { line: usize, expected: String },
    #[error("document parsed but failed validation: {0}")]
    ValidationFailed(ValidationReport),
}

fn expected<T>(line: usize, what: impl Into<String>) -> Result<T, ScriptError> {
    Err(ScriptError::ParseError {
        line,
        expected: what.into(),
    })
}

/// Renders the canonical document. Deterministic.
pub fn serialize(alo: &Alo) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# ALO: {}", alo.name);
    let _ = writeln!(out, "- mainObj: {}", alo.main_obj);
    let _ = writeln!(out, "- provenance: {}", alo.provenance.as_str());
    let _ = writeln!(out, "\n## {SECTION_SUBOBJECTS}");
    for sub in &alo.sub_objects {
        let _ = writeln!(out, "\n### {}", sub.name);
        out.push_str("- skills:\n");
        for skill in &sub.skills {
            let primitive = skill.note.as_deref().unwrap_or(skill.primitive.as_str());
            let _ = write!(out, "  - {}: {primitive}", skill.name);
            for (k, v) in &skill.parameters {
                let _ = write!(out, " {k}={v}");
            }
            out.push('\n');
        }
        out.push_str("- knowledge:\n");
        for fact in &sub.knowledge {
            let _ = writeln!(out, "  - {fact}");
        }
        out.push_str("- states:\n");
        for state in sub.states.values() {
            let _ = writeln!(out, "  - {}: {}", state.name, state_text(&state.kind));
        }
    }
    let m = &alo.manager;
    let _ = writeln!(out, "\n## {SECTION_MANAGER}");
    let _ = writeln!(out, "- currentState: {}", m.current_state);
    let _ = writeln!(out, "- stateSet: {}", m.state_set.join(", "));
    out.push_str("- policy:\n");
    for rule in &m.policy {
        let _ = writeln!(out, "  - {rule}");
    }
    let _ = writeln!(out, "- reward: {}", m.reward_accumulator);
    let _ = writeln!(out, "\n## {SECTION_STEPS}");
    for s in &alo.steps {
        let _ = write!(
            out,
            "- {} @{} {} {} -> {}",
            s.index, s.tick, s.actor, s.skill, s.resulting_state
        );
        if !s.note.is_empty() {
            let _ = write!(out, " -- {}", s.note);
        }
        out.push('\n');
    }
    out
}

fn state_text(kind: &StateKind) -> String {
    match kind {
        StateKind::Scalar { value, min, max, unit } if unit.is_empty() => {
            format!("scalar {value} [{min}, {max}]")
        }
        StateKind::Scalar { value, min, max, unit } => format!("scalar {value} [{min}, {max}] {unit}"),
        StateKind::Boolean { value } => format!("boolean {value}"),
        StateKind::Label { value, domain } => format!("label {value} {{{}}}", domain.join(", ")),
        StateKind::Vector3 { value: [x, y, z] } => format!("vector3 ({x}, {y}, {z})"),
    }
}

/// Repairs, parses and validates a model response. Line numbers in errors
/// refer to the repaired text.
pub fn parse_alo_markdown(text: &str) -> Result<Alo, ScriptError> {
    let repaired = repair(text);
    parse_canonical(&repaired.text)
}

/// Parses a document that is already in canonical form, then validates it.
pub fn parse_canonical(text: &str) -> Result<Alo, ScriptError> {
    let alo = Parser::new(text).document()?;
    let report = validate(&alo);
    if !report.is_empty() {
        return Err(ScriptError::ValidationFailed(report));
    }
    Ok(alo)
}

struct Parser<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty())
            .collect();
        let last_line = text.lines().count().max(1);
        Self {
            lines,
            pos: 0,
            last_line,
        }
    }

    fn peek(&self) -> Option<(usize, &'a str)> {
        self.lines.get(self.pos).copied()
    }

    fn line_no(&self) -> usize {
        self.peek().map(|(n, _)| n).unwrap_or(self.last_line)
    }

    fn document(mut self) -> Result<Alo, ScriptError> {
        let Some((n, first)) = self.peek() else {
            return expected(1, "\"# ALO:\"");
        };
        let Some(name) = first.strip_prefix("# ALO:") else {
            return expected(n, "\"# ALO:\"");
        };
        let name = name.trim().to_string();
        self.pos += 1;

        let mut main_obj = None;
        let mut provenance = None;
        while let Some((n, line)) = self.peek() {
            if line.starts_with('#') {
                break;
            }
            let Some((key, value)) = top_key(line) else {
                return expected(n, "\"- mainObj:\" or \"- provenance:\"");
            };
            match key {
                "mainObj" => main_obj = Some(value.to_string()),
                "provenance" => match Provenance::parse(value) {
                    Some(p) => provenance = Some(p),
                    None => return expected(n, "authored, llm-generated or derived"),
                },
                _ => return expected(n, "\"- mainObj:\" or \"- provenance:\""),
            }
            self.pos += 1;
        }

        let mut sub_objects = Vec::new();
        if self.heading(2) == Some(SECTION_SUBOBJECTS) {
            self.pos += 1;
            while let Some(sub_name) = self.heading(3) {
                self.pos += 1;
                sub_objects.push(self.sub_object(sub_name)?);
            }
        }

        if self.heading(2) != Some(SECTION_MANAGER) {
            return expected(self.line_no(), format!("\"## {SECTION_MANAGER}\""));
        }
        self.pos += 1;
        let manager = self.manager()?;

        let mut steps = Vec::new();
        if self.heading(2) == Some(SECTION_STEPS) {
            self.pos += 1;
            while let Some((n, line)) = self.peek() {
                if line.starts_with('#') {
                    break;
                }
                steps.push(parse_step(n, line)?);
                self.pos += 1;
            }
        }
        if let Some((n, _)) = self.peek() {
            return expected(n, "end of document");
        }

        Ok(Alo {
            main_obj: main_obj.unwrap_or_else(|| name.clone()),
            name,
            sub_objects,
            manager,
            steps,
            provenance: provenance.unwrap_or(Provenance::LlmGenerated),
        })
    }

    /// Text of the next line if it is a heading of exactly `level`.
    fn heading(&self, level: usize) -> Option<&'a str> {
        let (_, line) = self.peek()?;
        let hashes = line.chars().take_while(|&c| c == '#').count();
        (hashes == level && line[hashes..].starts_with(' ')).then(|| line[hashes..].trim())
    }

    /// Child lines (`  - ...`) under the current key.
    fn children(&mut self) -> Vec<(usize, &'a str)> {
        let mut out = Vec::new();
        while let Some((n, line)) = self.peek() {
            match line.strip_prefix("  - ") {
                Some(rest) => out.push((n, rest)),
                None if line == "  -" => out.push((n, "")),
                None => break,
            }
            self.pos += 1;
        }
        out
    }

    fn sub_object(&mut self, name: &str) -> Result<SubObject, ScriptError> {
        let mut sub = SubObject::new(name);
        while let Some((n, line)) = self.peek() {
            if line.starts_with('#') {
                break;
            }
            let Some((key, rest)) = top_key(line) else {
                return expected(n, "\"- skills:\", \"- knowledge:\" or \"- states:\"");
            };
            if !rest.is_empty() {
                return expected(n, format!("nothing after \"- {key}:\""));
            }
            self.pos += 1;
            let children = self.children();
            match key {
                "skills" => {
                    for (n, item) in children {
                        sub.skills.push(parse_skill(n, item)?);
                    }
                }
                "knowledge" => sub.knowledge.extend(children.into_iter().map(|(_, t)| t.to_string())),
                "states" => {
                    for (n, item) in children {
                        let state = parse_state(n, item)?;
                        sub.states.insert(state.name.clone(), state);
                    }
                }
                _ => return expected(n, "\"- skills:\", \"- knowledge:\" or \"- states:\""),
            }
        }
        Ok(sub)
    }

    fn manager(&mut self) -> Result<ManagerObject, ScriptError> {
        let mut current = None;
        let mut state_set = None;
        let mut policy = Vec::new();
        let mut reward = 0.0;
        while let Some((n, line)) = self.peek() {
            if line.starts_with('#') {
                break;
            }
            let Some((key, value)) = top_key(line) else {
                return expected(n, "a managerObj key");
            };
            self.pos += 1;
            match key {
                "currentState" => current = Some(value.to_string()),
                "stateSet" => {
                    state_set = Some(
                        value
                            .split(',')
                            .map(str::trim)
                            .filter(|s| !s.is_empty())
                            .map(str::to_string)
                            .collect::<Vec<_>>(),
                    )
                }
                "policy" => {
                    for (n, item) in self.children() {
                        policy.push(parse_rule(n, item)?);
                    }
                }
                "reward" => match value.parse::<f64>() {
                    Ok(v) => reward = v,
                    Err(_) => return expected(n, "a numeric reward"),
                },
                _ => return expected(n, "currentState, stateSet, policy or reward"),
            }
        }
        let Some(current_state) = current else {
            return expected(self.line_no(), "\"- currentState:\"");
        };
        Ok(ManagerObject {
            state_set: state_set.unwrap_or_else(|| vec![current_state.clone()]),
            current_state,
            policy,
            reward_accumulator: reward,
        })
    }
}

/// `- key: value` at the top level of a section.
fn top_key(line: &str) -> Option<(&str, &str)> {
    let rest = line.strip_prefix("- ")?;
    let (key, value) = rest.split_once(':')?;
    if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return None;
    }
    Some((key, value.trim()))
}

fn parse_skill(n: usize, item: &str) -> Result<SkillSpec, ScriptError> {
    let Some((name, rest)) = item.split_once(':') else {
        return expected(n, "\"<skill>: <primitive> [key=value ...]\"");
    };
    let mut tokens = rest.split_whitespace();
    let Some(prim) = tokens.next() else {
        return expected(n, "a primitive after the skill name");
    };
    let (primitive, note) = match Primitive::parse(prim) {
        Some(p) => (p, None),
        None => (Primitive::Idle, Some(prim.to_string())),
    };
    let mut parameters = BTreeMap::new();
    for tok in tokens {
        let Some((k, v)) = tok.split_once('=') else {
            return expected(n, format!("key=value, got `{tok}`"));
        };
        parameters.insert(k.to_string(), parse_param(v));
    }
    Ok(SkillSpec {
        name: name.trim().to_string(),
        primitive,
        parameters,
        note,
    })
}

fn parse_param(v: &str) -> ParamValue {
    match parse_number(v) {
        Some(x) => ParamValue::Number(x),
        None => ParamValue::Label(v.to_string()),
    }
}

fn parse_num(n: usize, s: &str) -> Result<f64, ScriptError> {
    s.trim().parse::<f64>().or_else(|_| expected(n, format!("a number, got `{}`", s.trim())))
}

fn parse_state(n: usize, item: &str) -> Result<StateVariable, ScriptError> {
    let Some((name, rest)) = item.split_once(':') else {
        return expected(n, "\"<state>: <kind> <value>\"");
    };
    let name = name.trim();
    let rest = rest.trim();
    let (kind, body) = rest.split_once(' ').unwrap_or((rest, ""));
    let body = body.trim();
    let kind = match kind {
        "scalar" => {
            let Some((value, rest)) = body.split_once(' ') else {
                return expected(n, "\"scalar <value> [<min>, <max>] [unit]\"");
            };
            let rest = rest.trim_start();
            let Some(inner) = rest.strip_prefix('[') else {
                return expected(n, "\"[<min>, <max>]\"");
            };
            let Some((range, unit)) = inner.split_once(']') else {
                return expected(n, "closing \"]\"");
            };
            let Some((min, max)) = range.split_once(',') else {
                return expected(n, "\"<min>, <max>\"");
            };
            StateKind::Scalar {
                value: parse_num(n, value)?,
                min: parse_num(n, min)?,
                max: parse_num(n, max)?,
                unit: unit.trim().to_string(),
            }
        }
        "boolean" => match body {
            "true" => StateKind::Boolean { value: true },
            "false" => StateKind::Boolean { value: false },
            _ => return expected(n, "true or false"),
        },
        "label" => {
            let Some((value, rest)) = body.split_once(' ') else {
                return expected(n, "\"label <value> {<a>, <b>}\"");
            };
            let Some(inner) = rest.trim().strip_prefix('{').and_then(|r| r.strip_suffix('}')) else {
                return expected(n, "\"{<a>, <b>}\"");
            };
            StateKind::Label {
                value: value.to_string(),
                domain: inner
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect(),
            }
        }
        "vector3" => {
            let Some(inner) = body.strip_prefix('(').and_then(|r| r.strip_suffix(')')) else {
                return expected(n, "\"(<x>, <y>, <z>)\"");
            };
            let parts: Vec<&str> = inner.split(',').collect();
            let [x, y, z] = parts[..] else {
                return expected(n, "three vector components");
            };
            StateKind::Vector3 {
                value: [parse_num(n, x)?, parse_num(n, y)?, parse_num(n, z)?],
            }
        }
        _ => return expected(n, "scalar, boolean, label or vector3"),
    };
    Ok(StateVariable {
        name: name.to_string(),
        kind,
    })
}

fn parse_rule(n: usize, item: &str) -> Result<PolicyRule, ScriptError> {
    let Some(body) = item.strip_prefix("when ") else {
        return expected(n, "\"when <condition> do <skill> [then <state>]\"");
    };
    // Names may themselves contain " do " or " then ", so try every split
    // and keep the first that parses.
    for (i, _) in body.match_indices(" do ") {
        let Ok(when) = body[..i].parse() else {
            continue;
        };
        let rest = &body[i + 4..];
        if let Some((skill, next)) = rest.rsplit_once(" then ") {
            if crate::model::is_identifier(next.trim()) {
                if let Ok(skill) = skill.parse() {
                    return Ok(PolicyRule {
                        when,
                        skill,
                        then: Some(next.trim().to_string()),
                    });
                }
            }
        }
        if let Ok(skill) = rest.parse() {
            return Ok(PolicyRule {
                when,
                skill,
                then: None,
            });
        }
    }
    expected(n, "\"when <condition> do <skill> [then <state>]\"")
}

fn parse_step(n: usize, line: &str) -> Result<StepObject, ScriptError> {
    const SHAPE: &str = "\"- <index> @<tick> <actor> <skill> -> <state> [-- <note>]\"";
    let Some(rest) = line.strip_prefix("- ") else {
        return expected(n, SHAPE);
    };
    let Some((index, rest)) = rest.split_once(' ') else {
        return expected(n, SHAPE);
    };
    let Some((tick, rest)) = rest.split_once(' ') else {
        return expected(n, SHAPE);
    };
    let (Ok(index), Some(Ok(tick))) = (index.parse::<u64>(), tick.strip_prefix('@').map(str::parse::<u64>)) else {
        return expected(n, SHAPE);
    };
    let Some((who, result)) = rest.split_once(" -> ") else {
        return expected(n, SHAPE);
    };
    let Some((actor, skill)) = who.rsplit_once(' ') else {
        return expected(n, SHAPE);
    };
    let (state, note) = match result.split_once(" -- ") {
        Some((s, note)) => (s, note),
        None => (result, ""),
    };
    Ok(StepObject {
        index,
        tick,
        actor: actor.to_string(),
        skill: skill.to_string(),
        resulting_state: state.trim().to_string(),
        note: note.to_string(),
    })
}
