use std::fmt::Write;

use super::{camel_case, update_fn_name, CodegenError};
use crate::model::{validate, Alo, CmpOp, Condition, Literal, ParamValue, Sensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dialect {
    /// The class-shaped script the browser harness documents.
    HarnessScript,
}

impl Dialect {
    pub fn parse(s: &str) -> Result<Self, CodegenError> {
        match s {
            "harness-script" => Ok(Dialect::HarnessScript),
            other => Err(CodegenError::UnsupportedDialect(other.to_string())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dialect::HarnessScript => "harness-script",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Dialect::HarnessScript => "update.harness.txt",
        }
    }
}

/// `<name>.update.harness.txt`.
pub fn script_file_name(alo_name: &str, dialect: Dialect) -> String {
    format!("{alo_name}.{}", dialect.extension())
}

/// Class name for an ALO; prefixed when the name starts with a digit.
pub fn class_name(alo_name: &str) -> String {
    let camel = camel_case(alo_name);
    if camel.starts_with(|c: char| c.is_ascii_digit()) || camel.is_empty() {
        format!("Alo{camel}")
    } else {
        camel
    }
}

fn js(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn js_op(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Eq => "===",
        CmpOp::Ne => "!==",
        other => other.as_str(),
    }
}

fn js_literal(l: &Literal) -> String {
    match l {
        Literal::Number(n) => format!("{n}"),
        Literal::Bool(b) => b.to_string(),
        Literal::Label(s) => js(s),
    }
}

/// The condition as a JS expression, or `None` when it is decided by the
/// manager state alone (`Some(true)`/`Some(false)` in the second slot).
fn js_condition(cond: &Condition, state: &str) -> Result<String, bool> {
    Ok(match cond {
        Condition::Always => "true".to_string(),
        Condition::ManagerState { negate, label } => return Err((label == state) != *negate),
        Condition::Sense { sensor, op, value } => {
            let field = match sensor {
                Sensor::Nearest => "nearest",
                Sensor::Boundary => "boundary",
                Sensor::Tick => "tick",
            };
            format!("sense.{field} {} {}", js_op(*op), js_literal(value))
        }
        Condition::State { sub, var, op, value } => {
            format!("this.states[{}] {} {}", js(&format!("{sub}.{var}")), js_op(*op), js_literal(value))
        }
        Condition::Near { a, b, radius } => format!("this.world.near({}, {}, {radius})", js(a), js(b)),
    })
}

fn js_param(v: &ParamValue) -> String {
    match v {
        ParamValue::Number(n) => format!("{n}"),
        ParamValue::Label(s) => js(s),
    }
}

/// A class whose constructor receives the prepared scene object and the
/// world, and whose per-frame method runs the manager policy as a switch
/// over manager states. Rules keep their first-match order in every case.
pub fn emit_update_script(alo: &Alo, dialect: &str) -> Result<String, CodegenError> {
    let Dialect::HarnessScript = Dialect::parse(dialect)?;
    let report = validate(alo);
    if !report.is_empty() {
        return Err(CodegenError::InvalidAlo(alo.name.clone(), report.to_string()));
    }
    let mut out = String::new();
    let class = class_name(&alo.name);
    let _ = writeln!(out, "// Update script for ALO {}.", js(&alo.name));
    let _ = writeln!(out, "class {class} {{");
    let _ = writeln!(out, "  constructor(sceneObject, world) {{");
    let _ = writeln!(out, "    this.sceneObject = sceneObject;");
    let _ = writeln!(out, "    this.world = world;");
    let _ = writeln!(out, "    this.state = {};", js(&alo.manager.current_state));
    out.push_str("    this.skills = {\n");
    for s in alo.skills() {
        let mut fields = vec![format!("primitive: {}", js(s.primitive.as_str()))];
        fields.extend(s.parameters.iter().map(|(k, v)| format!("{}: {}", js(k), js_param(v))));
        let _ = writeln!(out, "      {}: {{ {} }},", js(&s.name), fields.join(", "));
    }
    out.push_str("    };\n");
    out.push_str("    this.states = {\n");
    for sub in &alo.sub_objects {
        for st in sub.states.values() {
            let value = serde_json::to_value(&st.kind).expect("states serialize")["value"].to_string();
            let _ = writeln!(out, "      {}: {value},", js(&format!("{}.{}", sub.name, st.name)));
        }
    }
    out.push_str("    };\n  }\n\n");
    let _ = writeln!(out, "  {}(dt) {{", update_fn_name(&alo.name));
    out.push_str("    const sense = this.world.sense(this.sceneObject);\n");
    out.push_str("    switch (this.state) {\n");
    for state in &alo.manager.state_set {
        let _ = writeln!(out, "      case {}:", js(state));
        // (test, body) pairs up to and including the first unconditional rule.
        let mut arms: Vec<(String, Vec<String>)> = Vec::new();
        for rule in &alo.manager.policy {
            let test = match js_condition(&rule.when, state) {
                Ok(expr) => expr,
                Err(true) => "true".to_string(),
                Err(false) => continue,
            };
            let mut body = vec![match &rule.skill.alo {
                Some(target) if *target != alo.name => format!(
                    "this.world.dispatch({}, {}, dt);",
                    js(target),
                    js(&rule.skill.skill)
                ),
                _ => format!("this.world.run(this.sceneObject, this.skills[{}], dt);", js(&rule.skill.skill)),
            }];
            if let Some(next) = &rule.then {
                body.push(format!("this.state = {};", js(next)));
            }
            let last = test == "true";
            arms.push((test, body));
            if last {
                break;
            }
        }
        let unconditional = arms.last().is_some_and(|(t, _)| t == "true");
        if !unconditional {
            arms.push(("true".to_string(), vec!["this.world.run(this.sceneObject, null, dt);".to_string()]));
        }
        if arms.len() == 1 {
            for line in &arms[0].1 {
                let _ = writeln!(out, "        {line}");
            }
        } else {
            for (i, (test, body)) in arms.iter().enumerate() {
                let head = match (i, test.as_str()) {
                    (0, _) => format!("if ({test}) {{"),
                    (_, "true") => "} else {".to_string(),
                    _ => format!("}} else if ({test}) {{"),
                };
                let _ = writeln!(out, "        {head}");
                for line in body {
                    let _ = writeln!(out, "          {line}");
                }
            }
            out.push_str("        }\n");
        }
        out.push_str("        break;\n");
    }
    out.push_str("      default:\n        this.world.run(this.sceneObject, null, dt);\n    }\n  }\n}\n");
    Ok(out)
}
