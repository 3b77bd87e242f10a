use serde::{Deserialize, Serialize};

use super::SimError;
use crate::model::{Alo, Condition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Responder {
    First,
    Second,
}

/// When an instance of one pair member comes within `trigger_radius` of an
/// instance of the other, the responder runs `response_skill`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionRule {
    pub name: String,
    pub pair: (String, String),
    #[serde(rename = "triggerRadius")]
    pub trigger_radius: f64,
    #[serde(rename = "responseSkill")]
    pub response_skill: String,
    pub responder: Responder,
}

impl InteractionRule {
    /// A rule where the second member of the pair responds.
    pub fn new(name: &str, trigger: &str, responder: &str, radius: f64, skill: &str) -> Self {
        Self {
            name: name.to_string(),
            pair: (trigger.to_string(), responder.to_string()),
            trigger_radius: radius,
            response_skill: skill.to_string(),
            responder: Responder::Second,
        }
    }

    pub fn responder_name(&self) -> &str {
        match self.responder {
            Responder::First => &self.pair.0,
            Responder::Second => &self.pair.1,
        }
    }

    pub fn trigger_name(&self) -> &str {
        match self.responder {
            Responder::First => &self.pair.1,
            Responder::Second => &self.pair.0,
        }
    }

    pub(crate) fn check(&self) -> Result<(), SimError> {
        if !(self.trigger_radius > 0.0 && self.trigger_radius.is_finite()) {
            return Err(SimError::InvalidRule(format!(
                "trigger radius {} must be positive",
                self.trigger_radius
            )));
        }
        if self.name.trim().is_empty() || self.response_skill.trim().is_empty() {
            return Err(SimError::InvalidRule("name and response skill are required".into()));
        }
        Ok(())
    }

    /// Rules carried by a pair ALO: every policy rule of the form
    /// `when near "a" "b" < r do <a|b>.<skill>`. Other rules are ignored.
    pub fn from_pair_alo(alo: &Alo) -> Vec<InteractionRule> {
        let mut out = Vec::new();
        for rule in &alo.manager.policy {
            let Condition::Near { a, b, radius } = &rule.when else {
                continue;
            };
            let Some(target) = rule.skill.alo.as_deref() else {
                continue;
            };
            let responder = if target == b {
                Responder::Second
            } else if target == a {
                Responder::First
            } else {
                continue;
            };
            let name = if out.is_empty() {
                alo.name.clone()
            } else {
                format!("{} ({})", alo.name, out.len())
            };
            out.push(InteractionRule {
                name,
                pair: (a.clone(), b.clone()),
                trigger_radius: *radius,
                response_skill: rule.skill.skill.clone(),
                responder,
            });
        }
        out
    }
}
