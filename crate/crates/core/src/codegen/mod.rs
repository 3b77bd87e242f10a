//! Scene bundles and per-frame update scripts for the browser harness.
//!
//! The bundle (`scene.bundle.json`) is the contract: plain data validated
//! against [`SCENE_BUNDLE_SCHEMA`]. Update scripts are illustrative text in
//! the harness dialect, exported next to it as `<name>.update.harness.txt`.

mod script;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate, Alo, ParamValue, Primitive, Registry, StateKind};
use crate::sim::{Bounds, InteractionRule, Scenario, SimError};

pub use script::{class_name, emit_update_script, script_file_name, Dialect};

pub const SCHEMA_VERSION: u32 = 1;
pub const ENTITY_KIND: &str = "unit-cube";
/// JSON Schema (draft 2020-12) for `scene.bundle.json`.
pub const SCENE_BUNDLE_SCHEMA: &str = include_str!("../../resources/schema/scene-bundle.schema.json");

#[derive(Debug, Error, PartialEq)]
pub enum CodegenError {
    #[error("ALO `{0}` is invalid: {1}")]
    InvalidAlo(String, String),
    #[error("unsupported dialect `{0}`")]
    UnsupportedDialect(String),
    #[error("`{0}` is not registered")]
    UnknownName(String),
    #[error("position {0:?} lies outside the world bounds")]
    OutOfBounds([f64; 3]),
    #[error("scenario rejected: {0}")]
    Scenario(SimError),
}

impl From<SimError> for CodegenError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::UnknownName(n) => CodegenError::UnknownName(n),
            SimError::OutOfBounds(p) => CodegenError::OutOfBounds(p),
            SimError::InvalidAlo(n, r) => CodegenError::InvalidAlo(n, r),
            other => CodegenError::Scenario(other),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestSkill {
    pub name: String,
    pub primitive: Primitive,
    pub parameters: std::collections::BTreeMap<String, ParamValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestState {
    /// `<sub-object>.<state>`.
    pub path: String,
    #[serde(flatten)]
    pub kind: StateKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BehaviorManifest {
    #[serde(rename = "aloName")]
    pub alo_name: String,
    #[serde(rename = "entityKind")]
    pub entity_kind: String,
    #[serde(rename = "textureHint")]
    pub texture_hint: String,
    pub skills: Vec<ManifestSkill>,
    /// Policy rules in their textual form, first match wins.
    #[serde(rename = "managerPolicy")]
    pub manager_policy: Vec<String>,
    #[serde(rename = "initialState")]
    pub initial_state: String,
    #[serde(rename = "stateSet")]
    pub state_set: Vec<String>,
    pub states: Vec<ManifestState>,
    #[serde(rename = "updateFnName")]
    pub update_fn_name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub id: String,
    #[serde(rename = "aloName")]
    pub alo_name: String,
    pub position: [f64; 3],
    pub heading: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneBundle {
    #[serde(rename = "schemaVersion")]
    pub schema_version: u32,
    #[serde(rename = "worldBounds")]
    pub world_bounds: Bounds,
    pub dt: f64,
    pub seed: u64,
    pub manifests: Vec<BehaviorManifest>,
    pub entities: Vec<Placement>,
    #[serde(rename = "interactionRules")]
    pub interaction_rules: Vec<InteractionRule>,
}

impl SceneBundle {
    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundles serialize");
        s.push('\n');
        s
    }
}

/// `update` + CamelCase(name) + `PerFrame`.
pub fn update_fn_name(alo_name: &str) -> String {
    format!("update{}PerFrame", camel_case(alo_name))
}

/// Words split on anything that is not an ASCII letter or digit, each with
/// its first letter upper-cased.
pub fn camel_case(name: &str) -> String {
    name.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| {
            let mut c = w.chars();
            let first = c.next().expect("non-empty word").to_ascii_uppercase();
            format!("{first}{}", c.as_str())
        })
        .collect()
}

pub fn emit_manifest(alo: &Alo) -> Result<BehaviorManifest, CodegenError> {
    let report = validate(alo);
    if !report.is_empty() {
        return Err(CodegenError::InvalidAlo(alo.name.clone(), report.to_string()));
    }
    Ok(BehaviorManifest {
        alo_name: alo.name.clone(),
        entity_kind: ENTITY_KIND.to_string(),
        texture_hint: alo.name.clone(),
        skills: alo
            .skills()
            .map(|s| ManifestSkill {
                name: s.name.clone(),
                primitive: s.primitive,
                parameters: s.parameters.clone(),
            })
            .collect(),
        manager_policy: alo.manager.policy.iter().map(ToString::to_string).collect(),
        initial_state: alo.manager.current_state.clone(),
        state_set: alo.manager.state_set.clone(),
        states: alo
            .sub_objects
            .iter()
            .flat_map(|sub| {
                sub.states.values().map(move |st| ManifestState {
                    path: format!("{}.{}", sub.name, st.name),
                    kind: st.kind.clone(),
                })
            })
            .collect(),
        update_fn_name: update_fn_name(&alo.name),
    })
}

/// Builds the bundle for `scenario`. The scenario is also checked by
/// building the equivalent simulation world, so anything the simulator
/// would reject is rejected here too.
pub fn emit_scene(registry: &Registry, scenario: &Scenario) -> Result<SceneBundle, CodegenError> {
    let world = scenario.build_world(registry)?;
    let mut names: Vec<&str> = Vec::new();
    let mut seen = BTreeSet::new();
    for spec in &scenario.entities {
        if seen.insert(spec.alo.as_str()) {
            names.push(&spec.alo);
        }
    }
    for pair in &scenario.interactions {
        if seen.insert(pair.as_str()) {
            names.push(pair);
        }
    }
    let manifests = names
        .iter()
        .map(|n| {
            let alo = registry.get_ref(n).ok_or_else(|| CodegenError::UnknownName(n.to_string()))?;
            emit_manifest(alo)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SceneBundle {
        schema_version: SCHEMA_VERSION,
        world_bounds: scenario.bounds,
        dt: scenario.dt,
        seed: scenario.seed,
        manifests,
        entities: world
            .entities
            .iter()
            .map(|e| Placement {
                id: e.id.clone(),
                alo_name: e.alo.name.clone(),
                position: e.position,
                heading: e.heading,
            })
            .collect(),
        interaction_rules: world.rules.clone(),
    })
}
