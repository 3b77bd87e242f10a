use serde::{Deserialize, Serialize};

use super::{Bounds, InteractionRule, SimError, World, DEFAULT_DT};
use crate::model::Registry;

fn default_dt() -> f64 {
    DEFAULT_DT
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntitySpec {
    pub alo: String,
    pub position: [f64; 3],
    #[serde(default)]
    pub heading: f64,
}

/// A world description shared by simulation and export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub entities: Vec<EntitySpec>,
    /// Names of registered pair ALOs whose rules are bound.
    #[serde(default)]
    pub interactions: Vec<String>,
    /// Rules given inline, bound after those from `interactions`.
    #[serde(default)]
    pub rules: Vec<InteractionRule>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            bounds: Bounds::default(),
            seed: 0,
            dt: DEFAULT_DT,
            entities: Vec::new(),
            interactions: Vec::new(),
            rules: Vec::new(),
        }
    }
}

impl Scenario {
    /// Every interaction rule, pair ALOs first, in order.
    pub fn all_rules(&self, registry: &Registry) -> Result<Vec<InteractionRule>, SimError> {
        let mut rules = Vec::new();
        for name in &self.interactions {
            let alo = registry
                .get_ref(name)
                .ok_or_else(|| SimError::UnknownName(name.clone()))?;
            let found = InteractionRule::from_pair_alo(alo);
            if found.is_empty() {
                return Err(SimError::InvalidRule(format!("`{name}` carries no interaction rule")));
            }
            rules.extend(found);
        }
        rules.extend(self.rules.iter().cloned());
        Ok(rules)
    }

    pub fn build_world(&self, registry: &Registry) -> Result<World, SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidTimeStep(self.dt));
        }
        let mut world = World::spawn(self.bounds, self.seed)?;
        for spec in &self.entities {
            let alo = registry
                .get_ref(&spec.alo)
                .ok_or_else(|| SimError::UnknownName(spec.alo.clone()))?;
            world.add_entity_facing(alo, spec.position, spec.heading)?;
        }
        for rule in self.all_rules(registry)? {
            world.bind_interaction(rule)?;
        }
        Ok(world)
    }
}
