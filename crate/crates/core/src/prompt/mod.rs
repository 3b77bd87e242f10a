//! Prompt rendering.
//!
//! Template bodies ship as plain-text resources (`resources/prompts/*.txt`)
//! using `{slot}` placeholders. A directory of same-named files can replace
//! any of them at runtime, see [`TemplateSet::load_dir`].

mod lexicon;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::model::{Alo, Registry};

pub use lexicon::{classify_parameters, Classification, Lexicon, ParameterClass, ParameterLabel};

/// Suffix the image-generation prompts end with.
pub const DEFAULT_IMAGE_SUFFIX: &str = "--v 5";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("input must not be empty")]
    EmptyInput,
    #[error("`{0}` is not a registered ALO")]
    UnknownName(String),
    #[error("slot `{{{0}}}` is not bound")]
    MissingSlot(String),
    #[error("slot `{{{0}}}` appears more than once in the template")]
    DuplicateSlot(String),
    #[error("value for `{{{0}}}` contains a brace")]
    BraceInValue(String),
    #[error("could not read template pack: {0}")]
    Io(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TemplateId {
    SystemMarkdown,
    SystemCodegen,
    Create,
    Interact,
    Brainstorm,
    Tableize,
    Image,
}

impl TemplateId {
    pub const ALL: [TemplateId; 7] = [
        TemplateId::SystemMarkdown,
        TemplateId::SystemCodegen,
        TemplateId::Create,
        TemplateId::Interact,
        TemplateId::Brainstorm,
        TemplateId::Tableize,
        TemplateId::Image,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            TemplateId::SystemMarkdown => "system-markdown",
            TemplateId::SystemCodegen => "system-codegen",
            TemplateId::Create => "create",
            TemplateId::Interact => "interact",
            TemplateId::Brainstorm => "brainstorm",
            TemplateId::Tableize => "tableize",
            TemplateId::Image => "image",
        }
    }

    fn builtin_body(self) -> &'static str {
        match self {
            TemplateId::SystemMarkdown => include_str!("../../resources/prompts/system-markdown.txt"),
            TemplateId::SystemCodegen => include_str!("../../resources/prompts/system-codegen.txt"),
            TemplateId::Create => include_str!("../../resources/prompts/create.txt"),
            TemplateId::Interact => include_str!("../../resources/prompts/interact.txt"),
            TemplateId::Brainstorm => include_str!("../../resources/prompts/brainstorm.txt"),
            TemplateId::Tableize => include_str!("../../resources/prompts/tableize.txt"),
            TemplateId::Image => include_str!("../../resources/prompts/image.txt"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.file_stem())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub slots: Vec<String>,
    pub body: String,
}

impl PromptTemplate {
    /// Parses `{slot}` markers out of `body`. Each slot must appear once.
    pub fn new(id: TemplateId, body: &str) -> Result<Self, PromptError> {
        let body = body.trim_end_matches('\n').to_string();
        let mut slots: Vec<String> = Vec::new();
        for slot in slot_markers(&body) {
            if slots.iter().any(|s| s == slot) {
                return Err(PromptError::DuplicateSlot(slot.to_string()));
            }
            slots.push(slot.to_string());
        }
        Ok(Self { id, slots, body })
    }

    pub fn builtin(id: TemplateId) -> Self {
        Self::new(id, id.builtin_body()).expect("built-in templates are well formed")
    }

    /// Substitutes every slot. Extra bindings are ignored.
    pub fn render(&self, bindings: &[(&str, &str)]) -> Result<String, PromptError> {
        let mut out = self.body.clone();
        for slot in &self.slots {
            let Some((_, value)) = bindings.iter().find(|(k, _)| k == slot) else {
                return Err(PromptError::MissingSlot(slot.clone()));
            };
            if value.contains(['{', '}']) {
                return Err(PromptError::BraceInValue(slot.clone()));
            }
            out = out.replacen(&format!("{{{slot}}}"), value, 1);
        }
        Ok(out)
    }
}

/// `{identifier}` occurrences in order.
fn slot_markers(body: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        match after.find('}') {
            Some(close)
                if close > 0
                    && after[..close]
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_') =>
            {
                out.push(&after[..close]);
                rest = &after[close + 1..];
            }
            _ => rest = after,
        }
    }
    out
}

/// True when `text` still holds a `{slot}` marker.
pub fn has_unbound_slot(text: &str) -> bool {
    !slot_markers(text).is_empty()
}

/// All templates in use, built-ins unless overridden.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            templates: TemplateId::ALL
                .into_iter()
                .map(|id| (id, PromptTemplate::builtin(id)))
                .collect(),
        }
    }
}

impl TemplateSet {
    /// Built-ins, with any `<id>.txt` found in `dir` taking precedence.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let mut set = Self::default();
        for id in TemplateId::ALL {
            let path = dir.join(format!("{}.txt", id.file_stem()));
            if path.exists() {
                let body = fs::read_to_string(&path).map_err(|e| PromptError::Io(e.to_string()))?;
                set.templates.insert(id, PromptTemplate::new(id, &body)?);
            }
        }
        Ok(set)
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    pub fn system_prompt(&self, variant: SystemVariant) -> &str {
        &self.get(variant.template()).body
    }

    pub fn creation_prompt(&self, input: &str) -> Result<String, PromptError> {
        let input = non_empty(input)?;
        self.get(TemplateId::Create).render(&[("input", input)])
    }

    pub fn interaction_prompt(
        &self,
        registry: &Registry,
        a: &str,
        b: &str,
        context: Option<&str>,
    ) -> Result<String, PromptError> {
        for name in [a, b] {
            if !registry.contains(name) {
                return Err(PromptError::UnknownName(name.to_string()));
            }
        }
        self.render_interaction(a, b, context)
    }

    /// The meets-pattern without the registry check.
    pub fn render_interaction(&self, a: &str, b: &str, context: Option<&str>) -> Result<String, PromptError> {
        let a = non_empty(a)?;
        let b = non_empty(b)?;
        let setting = match context.map(str::trim).filter(|c| !c.is_empty()) {
            Some(ctx) => format!(" in ALOs({ctx})"),
            None => String::new(),
        };
        let pair = pair_name(a, b);
        self.get(TemplateId::Interact)
            .render(&[("a", a), ("b", b), ("setting", &setting), ("pair", &pair)])
    }

    pub fn brainstorm_sequence(&self, name: &str) -> Result<Vec<String>, PromptError> {
        let name = non_empty(name)?;
        Ok(vec![
            self.get(TemplateId::Brainstorm).render(&[("name", name)])?,
            self.tableize_prompt(name, name)?,
        ])
    }

    /// The table request. `subject` is the object named in the output clause;
    /// the brainstorm workflow always passes `name` again.
    pub fn tableize_prompt(&self, name: &str, subject: &str) -> Result<String, PromptError> {
        self.get(TemplateId::Tableize)
            .render(&[("name", non_empty(name)?), ("subject", non_empty(subject)?)])
    }

    pub fn image_prompt(&self, alo: &Alo, suffix: &str) -> Result<String, PromptError> {
        let body = flatten_parameters(alo);
        self.get(TemplateId::Image).render(&[("body", &body), ("suffix", suffix)])
    }
}

fn non_empty(s: &str) -> Result<&str, PromptError> {
    let t = s.trim();
    if t.is_empty() {
        Err(PromptError::EmptyInput)
    } else {
        Ok(t)
    }
}

/// Name of the ALO describing the meeting of `a` and `b`.
pub fn pair_name(a: &str, b: &str) -> String {
    format!("{a} meets {b}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SystemVariant {
    Markdown,
    Codegen,
}

impl SystemVariant {
    fn template(self) -> TemplateId {
        match self {
            SystemVariant::Markdown => TemplateId::SystemMarkdown,
            SystemVariant::Codegen => TemplateId::SystemCodegen,
        }
    }
}

/// Declarative sentences for every state, in sub-object order and then by
/// state name.
pub fn flatten_parameters(alo: &Alo) -> String {
    let mut sentences = vec![format!("This is {}.", alo.name)];
    for sub in &alo.sub_objects {
        for state in sub.states.values() {
            sentences.push(format!("{} is {}.", state.name, state.display_value()));
        }
    }
    sentences.join(" ")
}

// Free-function front doors over the built-in templates.

pub fn system_prompt(variant: SystemVariant) -> &'static str {
    variant.template().builtin_body().trim_end_matches('\n')
}

pub fn creation_prompt(input: &str) -> Result<String, PromptError> {
    TemplateSet::default().creation_prompt(input)
}

pub fn interaction_prompt(
    registry: &Registry,
    a: &str,
    b: &str,
    context: Option<&str>,
) -> Result<String, PromptError> {
    TemplateSet::default().interaction_prompt(registry, a, b, context)
}

pub fn brainstorm_sequence(name: &str) -> Result<Vec<String>, PromptError> {
    TemplateSet::default().brainstorm_sequence(name)
}

pub fn image_prompt(alo: &Alo, suffix: &str) -> String {
    TemplateSet::default()
        .image_prompt(alo, suffix)
        .expect("state values never contain braces")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ManagerObject, StateVariable, SubObject};

    fn registry(names: &[&str]) -> Registry {
        let mut reg = Registry::in_memory();
        for n in names {
            reg.put(Alo::new(n, vec![], ManagerObject::idle("idle")).unwrap()).unwrap();
        }
        reg
    }

    #[test]
    fn system_prompts_are_verbatim() {
        let md = system_prompt(SystemVariant::Markdown);
        assert!(md.starts_with("Create Abstract Language Objects (ALOs) for {input} using steps 1-11."));
        assert_eq!(md.lines().count(), 12);
        assert!(md.ends_with("Implement linguistic adjustments to prevent and rectify errors."));
        let js = system_prompt(SystemVariant::Codegen);
        assert!(js.contains("executable javascript + Three.js code"));
        assert_eq!(system_prompt(SystemVariant::Codegen), js);
    }

    #[test]
    fn creation() {
        assert_eq!(creation_prompt("cat").unwrap(), "Create ALOs(cat)");
        assert_eq!(creation_prompt("roomba").unwrap(), "Create ALOs(roomba)");
        assert_eq!(creation_prompt(""), Err(PromptError::EmptyInput));
        assert_eq!(creation_prompt("{x}"), Err(PromptError::BraceInValue("input".into())));
    }

    #[test]
    fn interaction() {
        let reg = registry(&["cat", "roomba", "teacher", "student"]);
        assert_eq!(
            interaction_prompt(&reg, "cat", "roomba", Some("bounded 3D physical world")).unwrap(),
            "ALOs(cat) meets ALOs(roomba) in ALOs(bounded 3D physical world). Create ALOs(cat meets roomba)"
        );
        assert_eq!(
            interaction_prompt(&reg, "teacher", "student", Some("classroom")).unwrap(),
            "ALOs(teacher) meets ALOs(student) in ALOs(classroom). Create ALOs(teacher meets student)"
        );
        assert_eq!(
            interaction_prompt(&reg, "cat", "roomba", None).unwrap(),
            "ALOs(cat) meets ALOs(roomba). Create ALOs(cat meets roomba)"
        );
        assert_eq!(
            interaction_prompt(&reg, "cat", "ghost", None),
            Err(PromptError::UnknownName("ghost".into()))
        );
    }

    #[test]
    fn brainstorm() {
        let seq = brainstorm_sequence("classroom").unwrap();
        assert_eq!(
            seq,
            [
                "ALOs(classroom) and brainstorm all parameters step-by-step to add and fill.",
                "get ALOs(classroom) object and brainstorm to fill subobject parameters and output one ALOs(classroom) object subobject list and parameters in table",
            ]
        );
        let seq = brainstorm_sequence("WiFi router").unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq[0], "ALOs(WiFi router) and brainstorm all parameters step-by-step to add and fill.");
        // The published IoT listing reuses "classroom" in the output clause.
        let set = TemplateSet::default();
        assert_eq!(
            set.tableize_prompt("WiFi router", "classroom").unwrap(),
            "get ALOs(WiFi router) object and brainstorm to fill subobject parameters and output one ALOs(classroom) object subobject list and parameters in table"
        );
        assert_eq!(brainstorm_sequence(" "), Err(PromptError::EmptyInput));
    }

    #[test]
    fn image_prompt_flattening() {
        let student = SubObject::new("profile")
            .with_state(StateVariable::scalar("age", 15.0, 0.0, 120.0, "years"))
            .with_state(StateVariable::label("grade", "B", &["A", "B", "C"]));
        let extra = SubObject::new("habits").with_state(StateVariable::boolean("attends", true));
        let alo = Alo::new("student", vec![student, extra], ManagerObject::idle("idle")).unwrap();
        let text = image_prompt(&alo, DEFAULT_IMAGE_SUFFIX);
        assert_eq!(
            text,
            "This is student. age is 15 years. grade is B. attends is true. --v 5"
        );
        assert_eq!(text, image_prompt(&alo, DEFAULT_IMAGE_SUFFIX));

        let empty = Alo::new("x", vec![], ManagerObject::idle("s")).unwrap();
        assert_eq!(image_prompt(&empty, "--v 5"), "This is x. --v 5");
    }

    #[test]
    fn templates_enforce_slot_rules() {
        assert_eq!(
            PromptTemplate::new(TemplateId::Create, "{a} and {a}"),
            Err(PromptError::DuplicateSlot("a".into()))
        );
        let t = PromptTemplate::new(TemplateId::Create, "hello {who}").unwrap();
        assert_eq!(t.render(&[]), Err(PromptError::MissingSlot("who".into())));
        for id in TemplateId::ALL {
            let t = PromptTemplate::builtin(id);
            let bindings: Vec<(&str, &str)> = t.slots.iter().map(|s| (s.as_str(), "x")).collect();
            assert!(!has_unbound_slot(&t.render(&bindings).unwrap()), "{id}");
        }
    }

    #[test]
    fn template_pack_overrides_builtins() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("create.txt"), "Please create ALOs({input}) now\n").unwrap();
        let set = TemplateSet::load_dir(dir.path()).unwrap();
        assert_eq!(set.creation_prompt("cat").unwrap(), "Please create ALOs(cat) now");
        assert_eq!(set.brainstorm_sequence("x").unwrap(), brainstorm_sequence("x").unwrap());
    }
}
