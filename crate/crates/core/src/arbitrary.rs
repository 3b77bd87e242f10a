//! Proptest strategies producing ALOs that pass [`validate`].
//!
//! Enabled by the `arbitrary` feature. The generated documents exercise
//! every state kind, primitive and condition form, and their skill and
//! state references always resolve locally, so they can be stored in a
//! registry without companions.
//!
//! [`validate`]: crate::model::validate

use std::collections::BTreeMap;

use proptest::collection::{btree_set, vec};
use proptest::prelude::*;
use proptest::sample::{select, Index};

use crate::model::{
    Alo, CmpOp, Condition, Literal, ManagerObject, ParamRequirement, ParamValue, PolicyRule,
    Primitive, Provenance, Sensor, SkillRef, SkillSpec, StateKind, StateVariable, StepObject,
    SubObject, RESERVED_SUB_NAMES,
};

/// Identifiers: a letter or underscore, then letters, digits, `_` or `-`.
pub fn identifier() -> impl Strategy<Value = String> {
    "[a-zA-Z_][a-zA-Z0-9_-]{0,9}".prop_filter("reserved word", |s| s != "true" && s != "false")
}

/// Free-text ALO names such as `robot vacuum` or `3D-world`.
pub fn alo_name() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9][a-zA-Z0-9 _'-]{0,14}[a-zA-Z0-9]|[a-zA-Z]"
}

/// Finite numbers: mostly short decimals, sometimes any normal float.
pub fn number() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => (-4000i32..4000).prop_map(|i| f64::from(i) / 8.0),
        1 => proptest::num::f64::NORMAL | proptest::num::f64::ZERO,
    ]
}

fn positive() -> impl Strategy<Value = f64> {
    prop_oneof![
        4 => (1i32..4000).prop_map(|i| f64::from(i) / 8.0),
        1 => (proptest::num::f64::POSITIVE | proptest::num::f64::NORMAL).prop_filter("zero", |v| *v > 0.0),
    ]
}

/// One trimmed line of prose.
pub fn sentence() -> impl Strategy<Value = String> {
    "[A-Za-z0-9][A-Za-z0-9 ,.;:!?'()=%-]{0,40}[A-Za-z0-9.!?)]"
}

fn param(req: ParamRequirement) -> BoxedStrategy<ParamValue> {
    match req {
        ParamRequirement::Number(_) => number().prop_map(ParamValue::Number).boxed(),
        ParamRequirement::NonNegative(_) => number().prop_map(|v| ParamValue::Number(v.abs())).boxed(),
        ParamRequirement::Positive(_) => positive().prop_map(ParamValue::Number).boxed(),
        ParamRequirement::Label(_) => identifier().prop_map(ParamValue::Label).boxed(),
    }
}

fn skill_body() -> impl Strategy<Value = (Primitive, BTreeMap<String, ParamValue>, Option<String>)> {
    let note = identifier().prop_filter("names a primitive", |n| Primitive::parse(n).is_none());
    (select(Primitive::ALL.to_vec()), proptest::option::weighted(0.3, note)).prop_flat_map(
        |(primitive, note)| {
            let reqs = primitive.required_parameters();
            let names: Vec<String> = reqs.iter().map(|r| r.name().to_string()).collect();
            let values: Vec<BoxedStrategy<ParamValue>> = reqs.iter().map(|r| param(*r)).collect();
            let note = if primitive == Primitive::Idle { note } else { None };
            values.prop_map(move |vals| {
                let params = names.iter().cloned().zip(vals).collect();
                (primitive, params, note.clone())
            })
        },
    )
}

fn state_kind() -> impl Strategy<Value = StateKind> {
    prop_oneof![
        (number(), number(), number(), "[a-zA-Z%/]{0,6}").prop_map(|(a, b, c, unit)| {
            let mut v = [a, b, c];
            v.sort_by(f64::total_cmp);
            StateKind::Scalar { value: v[1], min: v[0], max: v[2], unit }
        }),
        any::<bool>().prop_map(|value| StateKind::Boolean { value }),
        (btree_set(identifier(), 1..5), any::<Index>()).prop_map(|(domain, i)| {
            let domain: Vec<String> = domain.into_iter().collect();
            StateKind::Label { value: i.get(&domain).clone(), domain }
        }),
        [number(), number(), number()].prop_map(|value| StateKind::Vector3 { value }),
    ]
}

/// A sub-object with unique skill names and between zero and three of
/// each list.
pub fn sub_object(name: String) -> impl Strategy<Value = SubObject> {
    (
        btree_set(identifier(), 0..4).prop_flat_map(|names| {
            let names: Vec<String> = names.into_iter().collect();
            let n = names.len();
            vec(skill_body(), n).prop_map(move |bodies| {
                names
                    .iter()
                    .zip(bodies)
                    .map(|(name, (primitive, parameters, note))| SkillSpec {
                        name: name.clone(),
                        primitive,
                        parameters,
                        note,
                    })
                    .collect::<Vec<_>>()
            })
        }),
        vec(sentence(), 0..3),
        proptest::collection::btree_map(identifier(), state_kind(), 0..4),
    )
        .prop_map(move |(skills, knowledge, states)| SubObject {
            name: name.clone(),
            skills,
            knowledge,
            states: states
                .into_iter()
                .map(|(n, kind)| (n.clone(), StateVariable { name: n, kind }))
                .collect(),
        })
}

fn sense_condition() -> impl Strategy<Value = Condition> {
    let ordered = select(vec![CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge]);
    prop_oneof![
        (select(vec![CmpOp::Eq, CmpOp::Ne]), any::<bool>()).prop_map(|(op, b)| Condition::Sense {
            sensor: Sensor::Boundary,
            op,
            value: Literal::Bool(b),
        }),
        (select(vec![Sensor::Nearest, Sensor::Tick]), ordered, number()).prop_map(|(sensor, op, v)| {
            Condition::Sense { sensor, op, value: Literal::Number(v) }
        }),
    ]
}

fn state_condition(sub: String, var: String, kind: StateKind) -> BoxedStrategy<Condition> {
    let equality = select(vec![CmpOp::Eq, CmpOp::Ne]);
    let value: BoxedStrategy<(CmpOp, Literal)> = match kind {
        StateKind::Scalar { .. } => (
            select(vec![CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge]),
            number(),
        )
            .prop_map(|(op, v)| (op, Literal::Number(v)))
            .boxed(),
        StateKind::Boolean { .. } => (equality, any::<bool>()).prop_map(|(op, b)| (op, Literal::Bool(b))).boxed(),
        StateKind::Label { domain, .. } => (equality, select(domain))
            .prop_map(|(op, l)| (op, Literal::Label(l)))
            .boxed(),
        StateKind::Vector3 { .. } => return Just(Condition::Always).boxed(),
    };
    value
        .prop_map(move |(op, value)| Condition::State { sub: sub.clone(), var: var.clone(), op, value })
        .boxed()
}

fn condition(name: String, subs: &[SubObject], state_set: Vec<String>) -> BoxedStrategy<Condition> {
    let mut options: Vec<BoxedStrategy<Condition>> = vec![
        Just(Condition::Always).boxed(),
        sense_condition().boxed(),
        (any::<bool>(), select(state_set))
            .prop_map(|(negate, label)| Condition::ManagerState { negate, label })
            .boxed(),
        positive()
            .prop_map(move |radius| Condition::Near { a: name.clone(), b: name.clone(), radius })
            .boxed(),
    ];
    for sub in subs {
        for state in sub.states.values() {
            options.push(state_condition(sub.name.clone(), state.name.clone(), state.kind.clone()));
        }
    }
    proptest::strategy::Union::new(options).boxed()
}

fn manager(name: String, subs: Vec<SubObject>) -> impl Strategy<Value = ManagerObject> {
    let skills: Vec<String> = subs.iter().flat_map(|s| &s.skills).map(|s| s.name.clone()).collect();
    (btree_set(identifier(), 1..4), any::<Index>(), number()).prop_flat_map(
        move |(set, current, reward)| {
            let state_set: Vec<String> = set.into_iter().collect();
            let current_state = current.get(&state_set).clone();
            let rules = if skills.is_empty() {
                Just(Vec::new()).boxed()
            } else {
                let then = proptest::option::of(select(state_set.clone()));
                vec(
                    (condition(name.clone(), &subs, state_set.clone()), select(skills.clone()), then)
                        .prop_map(|(when, skill, then)| PolicyRule {
                            when,
                            skill: SkillRef::local(&skill),
                            then,
                        }),
                    0..4,
                )
                .boxed()
            };
            rules.prop_map(move |policy| ManagerObject {
                current_state: current_state.clone(),
                state_set: state_set.clone(),
                policy,
                reward_accumulator: reward,
            })
        },
    )
}

fn steps() -> impl Strategy<Value = Vec<StepObject>> {
    let actor = "[a-zA-Z][a-zA-Z0-9 _#-]{0,10}[a-zA-Z0-9#]".prop_filter("arrow", |a| !a.contains("->"));
    let note = prop_oneof![Just(String::new()), sentence()];
    vec((0u64..5, actor, identifier(), identifier(), note), 0..4).prop_map(|rows| {
        let mut tick = 0;
        rows.into_iter()
            .enumerate()
            .map(|(i, (dt, actor, skill, resulting_state, note))| {
                tick += dt;
                StepObject { index: i as u64, tick, actor, skill, resulting_state, note }
            })
            .collect()
    })
}

/// A valid ALO named by [`alo_name`].
pub fn alo() -> impl Strategy<Value = Alo> {
    alo_name().prop_flat_map(alo_named)
}

/// A valid ALO with the given name.
pub fn alo_named(name: String) -> BoxedStrategy<Alo> {
    let sub_names = btree_set(
        identifier().prop_filter("reserved", |n| !RESERVED_SUB_NAMES.contains(&n.as_str())),
        1..4,
    );
    (sub_names, select(vec![Provenance::Authored, Provenance::LlmGenerated, Provenance::Derived]))
        .prop_flat_map(move |(names, provenance)| {
            let subs: Vec<_> = names.into_iter().map(sub_object).collect();
            let name = name.clone();
            subs.prop_flat_map(move |subs| {
                let name = name.clone();
                (manager(name.clone(), subs.clone()), steps()).prop_map(move |(manager, steps)| Alo {
                    name: name.clone(),
                    main_obj: name.clone(),
                    sub_objects: subs.clone(),
                    manager,
                    steps,
                    provenance,
                })
            })
        })
        .boxed()
}
