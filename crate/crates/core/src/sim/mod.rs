//! Deterministic tick-based world that runs ALOs as moving boxes.
//!
//! Each tick visits the entities in insertion order. For every entity:
//!
//! 1. sense: distance to the nearest other entity, last tick's contact flag;
//! 2. interaction rules: the first rule whose pair is within range forces
//!    the responder's skill;
//! 3. otherwise the manager's first matching policy rule picks the skill;
//! 4. the skill's primitive sets velocity (and heading);
//! 5. the position is integrated and clamped to the bounds, zeroing the
//!    outward velocity component on contact;
//! 6. one [`StepObject`] and one [`Snapshot`] are logged.
//!
//! Updates are sequential: an entity later in the list senses positions
//! already updated this tick. No wall clock is read and all randomness
//! comes from one seeded ChaCha stream, so equal inputs give equal traces.

mod rules;
mod scenario;
mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate, Alo, Condition, Literal, Primitive, Sensor, SkillSpec, StateKind, StepObject,
};

pub use rules::{InteractionRule, Responder};
pub use scenario::{EntitySpec, Scenario};
pub use trace::{Event, Snapshot, Trace};

/// Downward acceleration for jumps, units/s².
pub const GRAVITY: f64 = 9.8;
/// Default step length: one browser animation frame.
pub const DEFAULT_DT: f64 = 1.0 / 60.0;
/// Default arena edge length.
pub const DEFAULT_EXTENT: f64 = 100.0;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("bounds must have positive, finite extent on every axis")]
    DegenerateBounds,
    #[error("position {0:?} lies outside the world bounds")]
    OutOfBounds([f64; 3]),
    #[error("ALO `{0}` is invalid: {1}")]
    InvalidAlo(String, String),
    #[error("no entity or ALO named `{0}`")]
    UnknownName(String),
    #[error("`{responder}` has no skill `{skill}`")]
    MissingResponseSkill { responder: String, skill: String },
    #[error("invalid interaction rule: {0}")]
    InvalidRule(String),
    #[error("time step must be positive and finite, got {0}")]
    InvalidTimeStep(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for Bounds {
    fn default() -> Self {
        Self { min: [0.0; 3], max: [DEFAULT_EXTENT; 3] }
    }
}

impl Bounds {
    pub fn is_degenerate(&self) -> bool {
        (0..3).any(|i| {
            !self.min[i].is_finite() || !self.max[i].is_finite() || self.max[i] <= self.min[i]
        })
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|i| p[i].is_finite() && p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Entity {
    /// `<alo name>#<ordinal among entities of that ALO>`.
    pub id: String,
    /// Private copy of the ALO; its states are the entity's state snapshot.
    pub alo: Alo,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    /// Radians in the horizontal plane; 0 faces +x, π/2 faces +z.
    pub heading: f64,
    pub active_skill: Option<String>,
    pub manager_state: String,
    /// Clamped against the bounds during the last tick.
    pub contact: bool,
    pub max_speed: f64,
}

impl Entity {
    pub fn alo_name(&self) -> &str {
        &self.alo.name
    }

    fn has_jump(&self) -> bool {
        self.alo.skills().any(|s| s.primitive == Primitive::Jump)
    }
}

/// Upper bound on an entity's speed given its skills.
pub fn max_speed(alo: &Alo) -> f64 {
    let mut horizontal: f64 = 0.0;
    let mut vertical: f64 = 0.0;
    for s in alo.skills() {
        match s.primitive {
            Primitive::Move | Primitive::Wander | Primitive::Flee | Primitive::Seek => {
                horizontal = horizontal.max(s.number("speed").unwrap_or(0.0).abs());
            }
            Primitive::Jump => {
                vertical = vertical.max(takeoff_speed(s.number("height").unwrap_or(0.0)));
            }
            _ => {}
        }
    }
    libm::hypot(horizontal, vertical)
}

fn takeoff_speed(height: f64) -> f64 {
    (2.0 * GRAVITY * height.max(0.0)).sqrt()
}

/// Unit vector for a heading.
pub fn heading_vector(heading: f64) -> [f64; 3] {
    [libm::cos(heading), 0.0, libm::sin(heading)]
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

#[derive(Clone, Debug)]
pub struct World {
    pub bounds: Bounds,
    pub entities: Vec<Entity>,
    pub rules: Vec<InteractionRule>,
    pub tick: u64,
    pub seed: u64,
    rng: ChaCha8Rng,
    trace: Trace,
}

/// What drove an entity's choice this tick.
struct Choice {
    skill: Option<SkillSpec>,
    flee_from: Option<[f64; 3]>,
    rule: Option<String>,
    next_state: Option<String>,
}

impl World {
    pub fn spawn(bounds: Bounds, seed: u64) -> Result<Self, SimError> {
        if bounds.is_degenerate() {
            return Err(SimError::DegenerateBounds);
        }
        Ok(Self {
            bounds,
            entities: Vec::new(),
            rules: Vec::new(),
            tick: 0,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            trace: Trace::default(),
        })
    }

    /// Adds an entity facing +x.
    pub fn add_entity(&mut self, alo: &Alo, position: [f64; 3]) -> Result<&Entity, SimError> {
        self.add_entity_facing(alo, position, 0.0)
    }

    pub fn add_entity_facing(
        &mut self,
        alo: &Alo,
        position: [f64; 3],
        heading: f64,
    ) -> Result<&Entity, SimError> {
        if !self.bounds.contains(position) {
            return Err(SimError::OutOfBounds(position));
        }
        let report = validate(alo);
        if !report.is_empty() {
            return Err(SimError::InvalidAlo(alo.name.clone(), report.to_string()));
        }
        if !heading.is_finite() {
            return Err(SimError::InvalidRule(format!("heading {heading} is not finite")));
        }
        let ordinal = self.entities.iter().filter(|e| e.alo.name == alo.name).count();
        self.entities.push(Entity {
            id: format!("{}#{ordinal}", alo.name),
            alo: alo.clone(),
            position,
            velocity: [0.0; 3],
            heading,
            active_skill: None,
            manager_state: alo.manager.current_state.clone(),
            contact: false,
            max_speed: max_speed(alo),
        });
        Ok(self.entities.last().expect("just pushed"))
    }

    pub fn bind_interaction(&mut self, rule: InteractionRule) -> Result<(), SimError> {
        rule.check()?;
        for name in [&rule.pair.0, &rule.pair.1] {
            if !self.entities.iter().any(|e| &e.alo.name == name) {
                return Err(SimError::UnknownName(name.clone()));
            }
        }
        let responder = rule.responder_name();
        let entity = self
            .entities
            .iter()
            .find(|e| e.alo.name == responder)
            .expect("checked above");
        if entity.alo.skill(&rule.response_skill).is_none() {
            return Err(SimError::MissingResponseSkill {
                responder: responder.to_string(),
                skill: rule.response_skill.clone(),
            });
        }
        self.rules.push(rule);
        Ok(())
    }

    /// Everything logged since the world was spawned.
    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    /// Advances `n` ticks and returns just the records they produced.
    pub fn run(&mut self, n: u64, dt: f64) -> Result<Trace, SimError> {
        let from = (self.trace.steps.len(), self.trace.snapshots.len(), self.trace.events.len());
        for _ in 0..n {
            self.step(dt)?;
        }
        Ok(Trace {
            steps: self.trace.steps[from.0..].to_vec(),
            snapshots: self.trace.snapshots[from.1..].to_vec(),
            events: self.trace.events[from.2..].to_vec(),
        })
    }

    pub fn step(&mut self, dt: f64) -> Result<(), SimError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SimError::InvalidTimeStep(dt));
        }
        for i in 0..self.entities.len() {
            self.update_entity(i, dt);
        }
        self.tick += 1;
        Ok(())
    }

    fn nearest_other(&self, i: usize, filter: impl Fn(&Entity) -> bool) -> Option<(usize, f64)> {
        let here = self.entities[i].position;
        let mut best: Option<(usize, f64)> = None;
        for (j, e) in self.entities.iter().enumerate() {
            if j == i || !filter(e) {
                continue;
            }
            let d = distance(here, e.position);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        best
    }

    fn choose(&self, i: usize, nearest: f64) -> Choice {
        let me = &self.entities[i];
        for rule in &self.rules {
            if rule.responder_name() != me.alo.name {
                continue;
            }
            let other = rule.trigger_name();
            if let Some((j, d)) = self.nearest_other(i, |e| e.alo.name == other) {
                if d < rule.trigger_radius {
                    return Choice {
                        skill: me.alo.skill(&rule.response_skill).cloned(),
                        flee_from: Some(self.entities[j].position),
                        rule: Some(rule.name.clone()),
                        next_state: None,
                    };
                }
            }
        }
        for rule in &me.alo.manager.policy {
            if rule.skill.target(&me.alo.name) != me.alo.name {
                continue;
            }
            if !self.holds(i, &rule.when, nearest) {
                continue;
            }
            let Some(skill) = me.alo.skill(&rule.skill.skill) else {
                continue;
            };
            let flee_from = (skill.primitive == Primitive::Flee)
                .then(|| {
                    let radius = skill.number("radius").unwrap_or(0.0);
                    self.nearest_other(i, |_| true)
                        .filter(|&(_, d)| d < radius)
                        .map(|(j, _)| self.entities[j].position)
                })
                .flatten();
            return Choice {
                skill: Some(skill.clone()),
                flee_from,
                rule: None,
                next_state: rule.then.clone(),
            };
        }
        Choice { skill: None, flee_from: None, rule: None, next_state: None }
    }

    fn holds(&self, i: usize, cond: &Condition, nearest: f64) -> bool {
        let me = &self.entities[i];
        match cond {
            Condition::Always => true,
            Condition::ManagerState { negate, label } => (&me.manager_state == label) != *negate,
            Condition::Sense { sensor, op, value } => match (sensor, value) {
                (Sensor::Nearest, Literal::Number(n)) => op.compare_f64(nearest, *n),
                (Sensor::Tick, Literal::Number(n)) => op.compare_f64(self.tick as f64, *n),
                (Sensor::Boundary, Literal::Bool(b)) => op.compare_eq(&me.contact, b),
                _ => false,
            },
            Condition::State { sub, var, op, value } => {
                let Some(state) = me.alo.state(sub, var) else {
                    return false;
                };
                match (&state.kind, value) {
                    (StateKind::Scalar { value: v, .. }, Literal::Number(n)) => op.compare_f64(*v, *n),
                    (StateKind::Boolean { value: v }, Literal::Bool(b)) => op.compare_eq(v, b),
                    (StateKind::Label { value: v, .. }, Literal::Label(l)) => op.compare_eq(v.as_str(), l.as_str()),
                    _ => false,
                }
            }
            Condition::Near { a, b, radius } => self.entities.iter().enumerate().any(|(x, ea)| {
                &ea.alo.name == a
                    && self.entities.iter().enumerate().any(|(y, eb)| {
                        x != y && &eb.alo.name == b && distance(ea.position, eb.position) < *radius
                    })
            }),
        }
    }

    fn update_entity(&mut self, i: usize, dt: f64) {
        let tick = self.tick;
        let nearest = self.nearest_other(i, |_| true).map_or(f64::INFINITY, |(_, d)| d);
        let choice = self.choose(i, nearest);
        let bounds = self.bounds;
        let mut event = None;

        // Draw before borrowing the entity mutably.
        let wander_draw = match &choice.skill {
            Some(s) if s.primitive == Primitive::Wander => Some(self.rng.random::<f64>()),
            _ => None,
        };

        let e = &mut self.entities[i];
        let mut v = e.velocity;
        let grounded = e.position[1] <= bounds.min[1] && v[1] <= 0.0;
        match &choice.skill {
            None => {
                v[0] = 0.0;
                v[2] = 0.0;
            }
            Some(skill) => match skill.primitive {
                Primitive::Idle => {
                    v[0] = 0.0;
                    v[2] = 0.0;
                }
                Primitive::Move => {
                    let speed = skill.number("speed").unwrap_or(0.0);
                    let dir = heading_vector(e.heading);
                    v[0] = dir[0] * speed;
                    v[2] = dir[2] * speed;
                }
                Primitive::Rotate => {
                    e.heading += skill.number("rate").unwrap_or(0.0) * dt;
                    v[0] = 0.0;
                    v[2] = 0.0;
                }
                Primitive::Jump => {
                    if grounded {
                        v[1] = takeoff_speed(skill.number("height").unwrap_or(0.0));
                    }
                }
                Primitive::Emit => {
                    v[0] = 0.0;
                    v[2] = 0.0;
                    event = skill.label("event").map(str::to_string);
                }
                Primitive::Wander => {
                    let speed = skill.number("speed").unwrap_or(0.0);
                    let jitter = skill.number("jitter").unwrap_or(0.0);
                    let u = wander_draw.expect("drawn for wander");
                    e.heading += jitter * dt * (2.0 * u - 1.0);
                    let dir = heading_vector(e.heading);
                    v[0] = dir[0] * speed;
                    v[2] = dir[2] * speed;
                }
                Primitive::Flee => match choice.flee_from {
                    Some(from) => {
                        let speed = skill.number("speed").unwrap_or(0.0);
                        let away = [e.position[0] - from[0], e.position[2] - from[2]];
                        let len = (away[0] * away[0] + away[1] * away[1]).sqrt();
                        if len > 0.0 {
                            e.heading = libm::atan2(away[1], away[0]);
                        }
                        let dir = heading_vector(e.heading);
                        v[0] = dir[0] * speed;
                        v[2] = dir[2] * speed;
                    }
                    None => {
                        v[0] = 0.0;
                        v[2] = 0.0;
                    }
                },
                Primitive::Seek => {
                    let speed = skill.number("speed").unwrap_or(0.0);
                    let target = skill.label("target").unwrap_or("");
                    let here = e.position;
                    let goal = nearest_position(&self.entities, i, target);
                    let e = &mut self.entities[i];
                    match goal {
                        Some(g) => {
                            let to = [g[0] - here[0], g[2] - here[2]];
                            let len = (to[0] * to[0] + to[1] * to[1]).sqrt();
                            if len > 0.0 {
                                e.heading = libm::atan2(to[1], to[0]);
                            }
                            // Arrive instead of overshooting.
                            let s = speed.min(len / dt);
                            let dir = heading_vector(e.heading);
                            v[0] = dir[0] * s;
                            v[2] = dir[2] * s;
                        }
                        None => {
                            v[0] = 0.0;
                            v[2] = 0.0;
                        }
                    }
                }
            },
        }

        let e = &mut self.entities[i];
        if e.has_jump() && !(e.position[1] <= bounds.min[1] && v[1] <= 0.0) {
            v[1] -= GRAVITY * dt;
        }
        let speed = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if speed > e.max_speed {
            let k = if speed > 0.0 { e.max_speed / speed } else { 0.0 };
            for c in &mut v {
                *c *= k;
            }
        }
        let mut p = e.position;
        let mut contact = false;
        for axis in 0..3 {
            p[axis] += v[axis] * dt;
            if p[axis] < bounds.min[axis] {
                p[axis] = bounds.min[axis];
                v[axis] = v[axis].max(0.0);
                contact = true;
            } else if p[axis] > bounds.max[axis] {
                p[axis] = bounds.max[axis];
                v[axis] = v[axis].min(0.0);
                contact = true;
            }
        }
        e.position = p;
        e.velocity = v;
        e.contact = contact;
        e.active_skill = choice.skill.as_ref().map(|s| s.name.clone());
        if let Some(next) = choice.next_state {
            e.manager_state = next;
        }

        let mut note = Vec::new();
        if let Some(rule) = &choice.rule {
            note.push(format!("rule {rule}"));
        }
        if let Some(ev) = &event {
            note.push(format!("event {ev}"));
        }
        let index = self.trace.steps.len() as u64;
        let e = &self.entities[i];
        self.trace.steps.push(StepObject {
            index,
            tick,
            actor: e.id.clone(),
            skill: e.active_skill.clone().unwrap_or_else(|| "idle".to_string()),
            resulting_state: e.manager_state.clone(),
            note: note.join("; "),
        });
        self.trace.snapshots.push(Snapshot {
            tick,
            entity: e.id.clone(),
            position: e.position,
            velocity: e.velocity,
            heading: e.heading,
            skill: e.active_skill.clone(),
            contact: e.contact,
            flee_from: match &choice.skill {
                Some(s) if s.primitive == Primitive::Flee => choice.flee_from,
                _ => None,
            },
        });
        if let Some(name) = event {
            self.trace.events.push(Event { tick, entity: e.id.clone(), event: name });
        }
    }
}

fn nearest_position(entities: &[Entity], i: usize, alo: &str) -> Option<[f64; 3]> {
    let here = entities[i].position;
    let mut best: Option<([f64; 3], f64)> = None;
    for (j, e) in entities.iter().enumerate() {
        if j == i || e.alo.name != alo {
            continue;
        }
        let d = distance(here, e.position);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((e.position, d));
        }
    }
    best.map(|(p, _)| p)
}

/// True when a flee snapshot moves away from its trigger, or is exempt
/// because the entity touched the bounds.
pub fn flee_respected(s: &Snapshot) -> bool {
    match s.flee_from {
        Some(from) if !s.contact => {
            let d = [s.position[0] - from[0], s.position[1] - from[1], s.position[2] - from[2]];
            s.velocity[0] * d[0] + s.velocity[1] * d[1] + s.velocity[2] * d[2] >= 0.0
        }
        _ => true,
    }
}
