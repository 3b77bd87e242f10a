use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    is_alo_name, is_identifier, is_single_line, Alo, Condition, Literal, ManagerObject, Primitive,
    StateKind, SubObject, RESERVED_SUB_NAMES,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViolationCode {
    EmptyName,
    InvalidName,
    MainObjMismatch,
    DuplicateSubObject,
    ReservedName,
    InvalidIdentifier,
    InvalidText,
    DuplicateSkill,
    MissingPrimitiveParameter,
    InvalidPrimitiveParameter,
    StateNameMismatch,
    InvalidDomain,
    DomainExceeded,
    NonFiniteValue,
    EmptyStateSet,
    DuplicateState,
    UnknownManagerState,
    DanglingSkillReference,
    UnknownStateReference,
    TypeMismatch,
    StepIndexGap,
    StepTickDecreasing,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub path: String,
    pub message: String,
}

/// Outcome of [`validate`]. Empty means every invariant holds.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.first(code).is_some()
    }

    pub fn first(&self, code: ViolationCode) -> Option<&Violation> {
        self.violations.iter().find(|v| v.code == code)
    }

    fn push(&mut self, code: ViolationCode, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            code,
            path: path.into(),
            message: message.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("no violations");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{:?} at {}: {}", v.code, v.path, v.message)?;
        }
        Ok(())
    }
}

/// Checks every single-ALO invariant. References to other ALOs
/// (`roomba.flee`, `near "cat" "roomba"`) are left to the registry.
pub fn validate(alo: &Alo) -> ValidationReport {
    use ViolationCode::*;
    let mut r = ValidationReport::default();

    if alo.name.is_empty() {
        r.push(EmptyName, "name", "name is empty");
    } else if !is_alo_name(&alo.name) {
        r.push(InvalidName, "name", format!("`{}` is not a valid ALO name", alo.name));
    }
    if alo.main_obj != alo.name {
        r.push(MainObjMismatch, "mainObj", format!("mainObj `{}` != name", alo.main_obj));
    }

    let mut seen = BTreeSet::new();
    for (i, sub) in alo.sub_objects.iter().enumerate() {
        let path = format!("subObjList[{i}]");
        if !seen.insert(sub.name.as_str()) {
            r.push(DuplicateSubObject, format!("{path}.name"), format!("duplicate `{}`", sub.name));
        }
        validate_sub(sub, &path, &mut r);
    }

    validate_manager(alo, &alo.manager, &mut r);

    for (i, step) in alo.steps.iter().enumerate() {
        let path = format!("stepObjList[{i}]");
        if step.index != i as u64 {
            r.push(StepIndexGap, format!("{path}.index"), format!("expected {i}, got {}", step.index));
        }
        if i > 0 && step.tick < alo.steps[i - 1].tick {
            r.push(StepTickDecreasing, format!("{path}.tick"), "tick went backwards");
        }
        if step.actor.is_empty() || !is_single_line(&step.actor) || step.actor.contains("->") {
            r.push(InvalidText, format!("{path}.actor"), "bad actor");
        }
        if !is_identifier(&step.skill) {
            r.push(InvalidIdentifier, format!("{path}.skill"), "bad skill name");
        }
        if !is_identifier(&step.resulting_state) {
            r.push(InvalidIdentifier, format!("{path}.resultingState"), "bad state label");
        }
        if !is_single_line(&step.note) {
            r.push(InvalidText, format!("{path}.note"), "note must be single-line and trimmed");
        }
    }
    r
}

fn validate_sub(sub: &SubObject, path: &str, r: &mut ValidationReport) {
    use ViolationCode::*;
    if !is_identifier(&sub.name) {
        r.push(InvalidIdentifier, format!("{path}.name"), format!("`{}`", sub.name));
    } else if RESERVED_SUB_NAMES.contains(&sub.name.as_str()) {
        r.push(ReservedName, format!("{path}.name"), format!("`{}` is reserved", sub.name));
    }

    let mut skills = BTreeSet::new();
    for (j, skill) in sub.skills.iter().enumerate() {
        let sp = format!("{path}.skills[{j}]");
        if !is_identifier(&skill.name) {
            r.push(InvalidIdentifier, format!("{sp}.name"), format!("`{}`", skill.name));
        }
        if !skills.insert(skill.name.as_str()) {
            r.push(DuplicateSkill, format!("{sp}.name"), format!("duplicate `{}`", skill.name));
        }
        for req in skill.primitive.required_parameters() {
            match skill.parameters.get(req.name()) {
                None => r.push(
                    MissingPrimitiveParameter,
                    format!("{sp}.parameters.{}", req.name()),
                    format!("{} requires `{}`", skill.primitive, req.name()),
                ),
                Some(v) if !req.accepts(v) => r.push(
                    InvalidPrimitiveParameter,
                    format!("{sp}.parameters.{}", req.name()),
                    format!("{req:?} rejects `{v}`"),
                ),
                Some(_) => {}
            }
        }
        for (key, value) in &skill.parameters {
            if !is_identifier(key) {
                r.push(InvalidIdentifier, format!("{sp}.parameters.{key}"), "bad parameter name");
            }
            match value {
                super::ParamValue::Number(v) if !v.is_finite() => {
                    r.push(NonFiniteValue, format!("{sp}.parameters.{key}"), "non-finite")
                }
                super::ParamValue::Label(l) if !is_identifier(l) => {
                    r.push(InvalidIdentifier, format!("{sp}.parameters.{key}"), format!("`{l}`"))
                }
                _ => {}
            }
        }
        if let Some(note) = &skill.note {
            // Only unknown primitives carry a note, and they always run as idle.
            if skill.primitive != Primitive::Idle || !is_identifier(note) || Primitive::parse(note).is_some() {
                r.push(InvalidText, format!("{sp}.note"), "note must name an unknown primitive on an idle skill");
            }
        }
    }

    for (k, fact) in sub.knowledge.iter().enumerate() {
        if fact.is_empty() || !is_single_line(fact) {
            r.push(InvalidText, format!("{path}.knowledge[{k}]"), "knowledge must be one trimmed line");
        }
    }

    for (key, state) in &sub.states {
        let sp = format!("{path}.states.{key}");
        if &state.name != key {
            r.push(StateNameMismatch, sp.clone(), format!("variable named `{}`", state.name));
        }
        if !is_identifier(key) {
            r.push(InvalidIdentifier, sp.clone(), "bad state name");
        }
        match &state.kind {
            StateKind::Scalar { value, min, max, unit } => {
                if !min.is_finite() || !max.is_finite() || min > max {
                    r.push(InvalidDomain, sp.clone(), format!("domain [{min}, {max}]"));
                }
                if !value.is_finite() {
                    r.push(NonFiniteValue, sp.clone(), "non-finite value");
                } else if value < min || value > max {
                    r.push(DomainExceeded, sp.clone(), format!("{value} outside [{min}, {max}]"));
                }
                if unit.chars().any(|c| c.is_whitespace() || c.is_control()) {
                    r.push(InvalidText, format!("{sp}.unit"), "unit must be one token");
                }
            }
            StateKind::Boolean { .. } => {}
            StateKind::Label { value, domain } => {
                let mut labels = BTreeSet::new();
                if domain.is_empty() {
                    r.push(InvalidDomain, sp.clone(), "empty label domain");
                }
                for l in domain {
                    if !is_identifier(l) || !labels.insert(l.as_str()) {
                        r.push(InvalidDomain, sp.clone(), format!("bad or repeated label `{l}`"));
                    }
                }
                if !domain.contains(value) {
                    r.push(DomainExceeded, sp.clone(), format!("`{value}` not in domain"));
                }
            }
            StateKind::Vector3 { value } => {
                if value.iter().any(|c| !c.is_finite()) {
                    r.push(NonFiniteValue, sp.clone(), "vector component not finite");
                }
            }
        }
    }
}

fn validate_manager(alo: &Alo, mgr: &ManagerObject, r: &mut ValidationReport) {
    use ViolationCode::*;
    if mgr.state_set.is_empty() {
        r.push(EmptyStateSet, "managerObj.stateSet", "no states declared");
    }
    let mut labels = BTreeSet::new();
    for (i, s) in mgr.state_set.iter().enumerate() {
        if !is_identifier(s) {
            r.push(InvalidIdentifier, format!("managerObj.stateSet[{i}]"), format!("`{s}`"));
        }
        if !labels.insert(s.as_str()) {
            r.push(DuplicateState, format!("managerObj.stateSet[{i}]"), format!("duplicate `{s}`"));
        }
    }
    if !labels.contains(mgr.current_state.as_str()) {
        r.push(
            UnknownManagerState,
            "managerObj.currentState",
            format!("`{}` not in stateSet", mgr.current_state),
        );
    }
    if !mgr.reward_accumulator.is_finite() {
        r.push(NonFiniteValue, "managerObj.rewardAccumulator", "non-finite");
    }

    for (i, rule) in mgr.policy.iter().enumerate() {
        let path = format!("managerObj.policy[{i}]");
        let local = rule.skill.alo.as_deref().is_none_or(|a| a == alo.name);
        if local && alo.skill(&rule.skill.skill).is_none() {
            r.push(
                DanglingSkillReference,
                format!("{path}.skill"),
                format!("no skill `{}`", rule.skill.skill),
            );
        }
        if let Some(next) = &rule.then {
            if !labels.contains(next.as_str()) {
                r.push(UnknownManagerState, format!("{path}.then"), format!("`{next}` not in stateSet"));
            }
        }
        validate_condition(alo, &rule.when, &labels, &format!("{path}.when"), r);
    }
}

fn validate_condition(
    alo: &Alo,
    cond: &Condition,
    labels: &BTreeSet<&str>,
    path: &str,
    r: &mut ValidationReport,
) {
    use ViolationCode::*;
    match cond {
        Condition::Always => {}
        Condition::ManagerState { label, .. } => {
            if !labels.contains(label.as_str()) {
                r.push(UnknownManagerState, path, format!("`{label}` not in stateSet"));
            }
        }
        Condition::Sense { sensor, op, value } => {
            let ok = match (sensor.is_boolean(), value) {
                (true, Literal::Bool(_)) => op.is_equality(),
                (false, Literal::Number(v)) => v.is_finite(),
                _ => false,
            };
            if !ok {
                r.push(TypeMismatch, path, format!("sense.{} vs `{value}`", sensor.as_str()));
            }
        }
        Condition::State { sub, var, op, value } => {
            let Some(state) = alo.state(sub, var) else {
                r.push(UnknownStateReference, path, format!("no state `{sub}.{var}`"));
                return;
            };
            let ok = match (&state.kind, value) {
                (StateKind::Scalar { .. }, Literal::Number(v)) => v.is_finite(),
                (StateKind::Boolean { .. }, Literal::Bool(_)) => op.is_equality(),
                (StateKind::Label { .. }, Literal::Label(_)) => op.is_equality(),
                _ => false,
            };
            if !ok {
                r.push(TypeMismatch, path, format!("`{sub}.{var} {} {value}`", op.as_str()));
            }
        }
        Condition::Near { a, b, radius } => {
            if !radius.is_finite() || *radius <= 0.0 {
                r.push(TypeMismatch, path, format!("radius {radius} must be positive"));
            }
            for n in [a, b] {
                if !is_alo_name(n) {
                    r.push(InvalidName, path, format!("`{n}`"));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;

    fn base() -> Alo {
        let body = SubObject::new("body")
            .with_skill(SkillSpec::new("jump", Primitive::Jump).with_number("height", 1.0))
            .with_state(StateVariable::scalar("battery", 5.0, 0.0, 10.0, "%"));
        Alo::new("roomba", vec![body], ManagerObject::idle("idle")).unwrap()
    }

    #[test]
    fn well_formed_is_empty() {
        assert!(validate(&base()).is_empty());
    }

    #[test]
    fn scalar_out_of_domain() {
        let mut alo = base();
        if let StateKind::Scalar { value, .. } =
            &mut alo.sub_objects[0].states.get_mut("battery").unwrap().kind
        {
            *value = 12.0;
        }
        let report = validate(&alo);
        assert_eq!(report.len(), 1);
        assert_eq!(report.violations[0].code, ViolationCode::DomainExceeded);
        assert_eq!(report.violations[0].path, "subObjList[0].states.battery");
    }

    #[test]
    fn unknown_manager_state() {
        let mut alo = base();
        alo.manager.current_state = "sleep".into();
        let report = validate(&alo);
        assert!(report.has(ViolationCode::UnknownManagerState));
        assert_eq!(report.len(), 1);
    }

    #[test]
    fn missing_and_invalid_primitive_parameters() {
        let mut alo = base();
        alo.sub_objects[0]
            .skills
            .push(SkillSpec::new("run", Primitive::Flee).with_number("speed", 0.0));
        let report = validate(&alo);
        assert!(report.has(ViolationCode::MissingPrimitiveParameter));
        assert!(report.has(ViolationCode::InvalidPrimitiveParameter));
    }

    #[test]
    fn label_and_vector_domains() {
        let mut alo = base();
        alo.sub_objects[0]
            .states
            .insert("mood".into(), StateVariable::label("mood", "angry", &["calm"]));
        alo.sub_objects[0]
            .states
            .insert("pos".into(), StateVariable::vector3("pos", [0.0, f64::NAN, 0.0]));
        let report = validate(&alo);
        assert_eq!(report.first(ViolationCode::DomainExceeded).unwrap().path, "subObjList[0].states.mood");
        assert!(report.has(ViolationCode::NonFiniteValue));
    }

    #[test]
    fn condition_typing() {
        let mut alo = base();
        alo.manager.policy.push(PolicyRule {
            when: "body.battery == true".parse().unwrap(),
            skill: SkillRef::local("jump"),
            then: None,
        });
        alo.manager.policy.push(PolicyRule {
            when: "body.missing < 1".parse().unwrap(),
            skill: SkillRef::local("jump"),
            then: Some("nowhere".into()),
        });
        let report = validate(&alo);
        assert!(report.has(ViolationCode::TypeMismatch));
        assert!(report.has(ViolationCode::UnknownStateReference));
        assert!(report.has(ViolationCode::UnknownManagerState));
    }

    #[test]
    fn qualified_skill_refs_are_not_checked_locally() {
        let mut alo = base();
        alo.manager.policy.push(PolicyRule {
            when: Condition::Always,
            skill: SkillRef::on("cat", "meow"),
            then: None,
        });
        assert!(validate(&alo).is_empty());
        alo.manager.policy.push(PolicyRule {
            when: Condition::Always,
            skill: SkillRef::on("roomba", "meow"),
            then: None,
        });
        assert!(validate(&alo).has(ViolationCode::DanglingSkillReference));
    }

    #[test]
    fn step_log_discipline() {
        let mut alo = base();
        alo.push_step(3, "roomba#0", "jump", "idle", "");
        alo.push_step(2, "roomba#0", "jump", "idle", "");
        alo.steps.push(StepObject {
            index: 7,
            tick: 3,
            actor: "roomba#0".into(),
            skill: "jump".into(),
            resulting_state: "idle".into(),
            note: String::new(),
        });
        let report = validate(&alo);
        assert!(report.has(ViolationCode::StepTickDecreasing));
        assert!(report.has(ViolationCode::StepIndexGap));
    }

    #[test]
    fn reserved_sub_name() {
        let mut alo = base();
        alo.sub_objects.push(SubObject::new("sense"));
        assert!(validate(&alo).has(ViolationCode::ReservedName));
    }
}
