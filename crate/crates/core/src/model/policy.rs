//! The small condition language used by manager policies.
//!
//! ```text
//! always
//! state == idle
//! sense.nearest < 10
//! body.battery <= 20
//! near "cat" "roomba" < 10
//! ```
//!
//! Conditions and skill references serialize as their text form in both the
//! JSON sidecar and the markdown document.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{is_alo_name, is_identifier, parse_number};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{0}")]
pub struct PolicyParseError(pub String);

fn err<T>(msg: impl Into<String>) -> Result<T, PolicyParseError> {
    Err(PolicyParseError(msg.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "==" => CmpOp::Eq,
            "!=" => CmpOp::Ne,
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            _ => return None,
        })
    }

    pub fn is_equality(self) -> bool {
        matches!(self, CmpOp::Eq | CmpOp::Ne)
    }

    pub fn compare_f64(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }

    /// Equality operators only; ordering on non-numbers is always false.
    pub fn compare_eq<T: PartialEq + ?Sized>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            _ => false,
        }
    }
}

/// Values the world computes for each entity before the manager runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sensor {
    /// Distance to the nearest other entity (infinite when alone).
    Nearest,
    /// Whether the entity was clamped against the bounds last tick.
    Boundary,
    /// Current world tick.
    Tick,
}

impl Sensor {
    pub fn as_str(self) -> &'static str {
        match self {
            Sensor::Nearest => "nearest",
            Sensor::Boundary => "boundary",
            Sensor::Tick => "tick",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "nearest" => Sensor::Nearest,
            "boundary" => Sensor::Boundary,
            "tick" => Sensor::Tick,
            _ => return None,
        })
    }

    pub fn is_boolean(self) -> bool {
        matches!(self, Sensor::Boundary)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Literal {
    Number(f64),
    Bool(bool),
    Label(String),
}

impl Literal {
    pub fn parse(s: &str) -> Result<Self, PolicyParseError> {
        match s {
            "true" => return Ok(Literal::Bool(true)),
            "false" => return Ok(Literal::Bool(false)),
            _ => {}
        }
        if let Some(v) = parse_number(s) {
            return Ok(Literal::Number(v));
        }
        if is_identifier(s) {
            Ok(Literal::Label(s.to_string()))
        } else {
            err(format!("bad literal `{s}`"))
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(v) => write!(f, "{v}"),
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Label(l) => f.write_str(l),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Condition {
    Always,
    ManagerState {
        negate: bool,
        label: String,
    },
    Sense {
        sensor: Sensor,
        op: CmpOp,
        value: Literal,
    },
    State {
        sub: String,
        var: String,
        op: CmpOp,
        value: Literal,
    },
    /// True while an instance of `a` and an instance of `b` are closer
    /// than `radius`.
    Near {
        a: String,
        b: String,
        radius: f64,
    },
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Always => f.write_str("always"),
            Condition::ManagerState { negate, label } => {
                write!(f, "state {} {label}", if *negate { "!=" } else { "==" })
            }
            Condition::Sense { sensor, op, value } => {
                write!(f, "sense.{} {} {value}", sensor.as_str(), op.as_str())
            }
            Condition::State { sub, var, op, value } => {
                write!(f, "{sub}.{var} {} {value}", op.as_str())
            }
            Condition::Near { a, b, radius } => write!(f, "near \"{a}\" \"{b}\" < {radius}"),
        }
    }
}

impl FromStr for Condition {
    type Err = PolicyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "always" {
            return Ok(Condition::Always);
        }
        if let Some(rest) = s.strip_prefix("near ") {
            return parse_near(rest.trim());
        }
        let tokens: Vec<&str> = s.split_whitespace().collect();
        let [lhs, op, rhs] = tokens[..] else {
            return err(format!("expected `<lhs> <op> <value>`, got `{s}`"));
        };
        let Some(op) = CmpOp::parse(op) else {
            return err(format!("unknown operator `{op}`"));
        };
        if lhs == "state" {
            if !op.is_equality() || !is_identifier(rhs) {
                return err("manager state conditions take `==`/`!=` and a label");
            }
            return Ok(Condition::ManagerState {
                negate: op == CmpOp::Ne,
                label: rhs.to_string(),
            });
        }
        let value = Literal::parse(rhs)?;
        let Some((sub, var)) = lhs.split_once('.') else {
            return err(format!("expected `<sub>.<state>`, got `{lhs}`"));
        };
        if sub == "sense" {
            let Some(sensor) = Sensor::parse(var) else {
                return err(format!("unknown sensor `{var}`"));
            };
            return Ok(Condition::Sense { sensor, op, value });
        }
        if !is_identifier(sub) || !is_identifier(var) {
            return err(format!("bad state path `{lhs}`"));
        }
        Ok(Condition::State {
            sub: sub.to_string(),
            var: var.to_string(),
            op,
            value,
        })
    }
}

fn parse_near(rest: &str) -> Result<Condition, PolicyParseError> {
    let (a, rest) = quoted(rest)?;
    let (b, rest) = quoted(rest.trim_start())?;
    let Some(radius) = rest.trim().strip_prefix('<') else {
        return err("expected `< <radius>` after near pair");
    };
    let radius: f64 = radius
        .trim()
        .parse()
        .map_err(|_| PolicyParseError(format!("bad radius `{}`", radius.trim())))?;
    Ok(Condition::Near {
        a: a.to_string(),
        b: b.to_string(),
        radius,
    })
}

fn quoted(s: &str) -> Result<(&str, &str), PolicyParseError> {
    let Some(inner) = s.strip_prefix('"') else {
        return err("expected quoted ALO name");
    };
    let Some(end) = inner.find('"') else {
        return err("unterminated quote");
    };
    let name = &inner[..end];
    if !is_alo_name(name) {
        return err(format!("bad ALO name `{name}`"));
    }
    Ok((name, &inner[end + 1..]))
}

impl Serialize for Condition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Condition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A skill on this ALO (`flee`) or on another registered one (`roomba.flee`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SkillRef {
    pub alo: Option<String>,
    pub skill: String,
}

impl SkillRef {
    pub fn local(skill: &str) -> Self {
        Self {
            alo: None,
            skill: skill.to_string(),
        }
    }

    pub fn on(alo: &str, skill: &str) -> Self {
        Self {
            alo: Some(alo.to_string()),
            skill: skill.to_string(),
        }
    }

    /// The ALO the skill lives on, resolving unqualified refs to `owner`.
    pub fn target<'a>(&'a self, owner: &'a str) -> &'a str {
        self.alo.as_deref().unwrap_or(owner)
    }
}

impl fmt::Display for SkillRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.alo {
            Some(alo) => write!(f, "{alo}.{}", self.skill),
            None => f.write_str(&self.skill),
        }
    }
}

impl FromStr for SkillRef {
    type Err = PolicyParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (alo, skill) = match s.rsplit_once('.') {
            Some((alo, skill)) => (Some(alo), skill),
            None => (None, s),
        };
        if !is_identifier(skill) {
            return err(format!("bad skill name `{skill}`"));
        }
        if let Some(alo) = alo {
            if !is_alo_name(alo) {
                return err(format!("bad ALO name `{alo}`"));
            }
        }
        Ok(SkillRef {
            alo: alo.map(str::to_string),
            skill: skill.to_string(),
        })
    }
}

impl Serialize for SkillRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SkillRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
