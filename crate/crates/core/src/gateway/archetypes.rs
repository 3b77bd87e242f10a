//! Canned ALOs the mock answers creation prompts with.

use crate::model::{
    Alo, ManagerObject, PolicyRule, Primitive, Provenance, SkillRef, SkillSpec, StateVariable,
    SubObject,
};

/// Trigger radius used for generated interaction rules.
pub const PAIR_TRIGGER_RADIUS: f64 = 10.0;

fn rule(when: &str, skill: &str, then: Option<&str>) -> PolicyRule {
    PolicyRule {
        when: when.parse().expect("archetype conditions parse"),
        skill: skill.parse().expect("archetype skill refs parse"),
        then: then.map(str::to_string),
    }
}

fn manager(states: &[&str], policy: Vec<PolicyRule>) -> ManagerObject {
    ManagerObject {
        current_state: states[0].to_string(),
        state_set: states.iter().map(|s| s.to_string()).collect(),
        policy,
        reward_accumulator: 0.0,
    }
}

fn finish(name: &str, subs: Vec<SubObject>, mgr: ManagerObject) -> Alo {
    Alo {
        name: name.to_string(),
        main_obj: name.to_string(),
        sub_objects: subs,
        manager: mgr,
        steps: Vec::new(),
        provenance: Provenance::LlmGenerated,
    }
}

fn canonical_key(name: &str) -> String {
    name.trim()
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || *c == ' ')
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// The built-in ALO for a well-known object, named `name` verbatim.
pub fn archetype(name: &str) -> Option<Alo> {
    let key = canonical_key(name);
    let alo = match key.as_str() {
        "cat" | "cats" | "kitten" => cat(name),
        "roomba" | "robot vacuum" | "robotic vacuum" => roomba(name),
        "classroom" => classroom(name),
        "student" | "students" => student(name),
        "teacher" => teacher(name),
        "smartphone" | "phone" | "smart phone" => smartphone(name),
        "printer" => printer(name),
        "wifi router" | "wifi" | "router" | "wireless router" => wifi_router(name),
        "3d physical world" | "bounded 3d physical world" | "physical world" | "world" => world(name),
        _ => return None,
    };
    Some(alo)
}

/// Fallback ALO for names without an archetype.
pub fn generic_alo(name: &str) -> Alo {
    let core = SubObject::new("core")
        .with_skill(SkillSpec::new("rest", Primitive::Idle))
        .with_knowledge(&format!("{name} is an object described by its parts, skills and states."))
        .with_knowledge("Its parameters can be refined by further prompts.")
        .with_state(StateVariable::boolean("active", true));
    finish(name, vec![core], manager(&["ready"], vec![rule("always", "rest", None)]))
}

/// The ALO describing `a` meeting `b`: `b` answers with its first flee
/// skill (or first skill) when the two come within the trigger radius.
pub fn pair_alo(a: &str, b: &str, context: Option<&str>) -> Alo {
    let responder = archetype(b).unwrap_or_else(|| generic_alo(b));
    let response = responder
        .skills()
        .find(|s| s.primitive == Primitive::Flee)
        .or_else(|| responder.skills().next())
        .map(|s| s.name.clone())
        .unwrap_or_else(|| "rest".to_string());
    let mut encounter = SubObject::new("encounter")
        .with_knowledge(&format!("When {a} approaches, {b} reacts to keep its distance."))
        .with_state(StateVariable::scalar("trigger-radius", PAIR_TRIGGER_RADIUS, 0.0, 100.0, "units"));
    if let Some(ctx) = context {
        encounter = encounter.with_knowledge(&format!("The meeting takes place in {ctx}."));
    }
    let name = crate::prompt::pair_name(a, b);
    let policy = vec![PolicyRule {
        when: crate::model::Condition::Near {
            a: a.to_string(),
            b: b.to_string(),
            radius: PAIR_TRIGGER_RADIUS,
        },
        skill: SkillRef::on(b, &response),
        then: Some("reacting".to_string()),
    }];
    finish(&name, vec![encounter], manager(&["apart", "reacting"], policy))
}

fn cat(name: &str) -> Alo {
    let body = SubObject::new("body")
        .with_skill(SkillSpec::new("prowl", Primitive::Wander).with_number("speed", 3.0).with_number("jitter", 1.5))
        .with_skill(SkillSpec::new("pounce", Primitive::Jump).with_number("height", 1.2))
        .with_skill(SkillSpec::new("meow", Primitive::Emit).with_label("event", "meow"))
        .with_knowledge("A cat is a small carnivorous mammal often kept as a pet.")
        .with_knowledge("Cats usually land on their feet after a fall.")
        .with_knowledge("Cats sleep for many hours each day.")
        .with_state(StateVariable::scalar("age", 3.0, 0.0, 25.0, "years"))
        .with_state(StateVariable::label("fur-color", "tabby", &["tabby", "black", "white", "orange"]))
        .with_state(StateVariable::boolean("hungry", false));
    let senses = SubObject::new("senses")
        .with_knowledge("Cats see well in dim light and hear high-pitched sounds.")
        .with_state(StateVariable::scalar("alertness", 0.5, 0.0, 1.0, ""));
    finish(
        name,
        vec![body, senses],
        manager(
            &["roaming", "startled"],
            vec![
                rule("sense.boundary == true", "meow", Some("startled")),
                rule("always", "prowl", Some("roaming")),
            ],
        ),
    )
}

fn roomba(name: &str) -> Alo {
    let drive = SubObject::new("drive")
        .with_skill(SkillSpec::new("cruise", Primitive::Move).with_number("speed", 5.0))
        .with_skill(SkillSpec::new("turn", Primitive::Rotate).with_number("rate", 1.5))
        .with_skill(SkillSpec::new("escape", Primitive::Flee).with_number("radius", 10.0).with_number("speed", 10.0))
        .with_knowledge("A Roomba is a small robotic vacuum cleaner that moves around a room on its own.")
        .with_knowledge("It turns away when its bumper touches a wall.");
    let sensors = SubObject::new("sensors")
        .with_state(StateVariable::scalar("battery", 80.0, 0.0, 100.0, "percent"))
        .with_state(StateVariable::boolean("bumper", false))
        .with_state(StateVariable::boolean("dustbin-full", false));
    finish(
        name,
        vec![drive, sensors],
        manager(
            &["cleaning", "turning"],
            vec![
                rule("sense.boundary == true", "turn", Some("turning")),
                rule("always", "cruise", Some("cleaning")),
            ],
        ),
    )
}

fn classroom(name: &str) -> Alo {
    let room = SubObject::new("room")
        .with_skill(SkillSpec::new("ring", Primitive::Emit).with_label("event", "bell"))
        .with_skill(SkillSpec::new("wait", Primitive::Idle))
        .with_knowledge("A classroom is a room where students learn from a teacher.")
        .with_state(StateVariable::scalar("seats", 25.0, 0.0, 60.0, "seats"))
        .with_state(StateVariable::label("layout", "rows", &["rows", "circle", "groups"]));
    let board = SubObject::new("board")
        .with_knowledge("The board shows the lesson to the whole class.")
        .with_state(StateVariable::label("type", "whiteboard", &["whiteboard", "chalkboard", "smartboard"]));
    finish(
        name,
        vec![room, board],
        manager(
            &["in-session", "break"],
            vec![rule("sense.tick == 0", "ring", None), rule("always", "wait", None)],
        ),
    )
}

fn student(name: &str) -> Alo {
    let mind = SubObject::new("mind")
        .with_skill(SkillSpec::new("answer", Primitive::Emit).with_label("event", "answer"))
        .with_skill(SkillSpec::new("listen", Primitive::Idle))
        .with_knowledge("A student attends lessons to learn new subjects.")
        .with_knowledge("Students answer questions asked by the teacher.")
        .with_state(StateVariable::scalar("attention", 0.7, 0.0, 1.0, ""))
        .with_state(StateVariable::label("grade", "B", &["A", "B", "C", "D", "F"]))
        .with_state(StateVariable::scalar("age", 15.0, 5.0, 25.0, "years"));
    finish(
        name,
        vec![mind],
        manager(
            &["listening", "answering"],
            vec![
                rule("sense.tick == 30", "answer", Some("answering")),
                rule("always", "listen", Some("listening")),
            ],
        ),
    )
}

fn teacher(name: &str) -> Alo {
    let mind = SubObject::new("mind")
        .with_skill(SkillSpec::new("teach", Primitive::Emit).with_label("event", "teach"))
        .with_skill(SkillSpec::new("observe", Primitive::Idle))
        .with_knowledge("A teacher explains the lesson and asks questions.")
        .with_state(StateVariable::scalar("experience", 10.0, 0.0, 50.0, "years"))
        .with_state(StateVariable::label("subject", "math", &["math", "science", "history", "art"]));
    finish(
        name,
        vec![mind],
        manager(
            &["teaching", "observing"],
            vec![
                rule("sense.tick == 0", "teach", Some("teaching")),
                rule("always", "observe", Some("observing")),
            ],
        ),
    )
}

fn smartphone(name: &str) -> Alo {
    let screen = SubObject::new("screen")
        .with_knowledge("A smartphone is a handheld device with a touch screen.")
        .with_state(StateVariable::scalar("screen-size", 6.1, 3.0, 8.0, "inches"))
        .with_state(StateVariable::label("color", "black", &["black", "white", "blue", "red"]))
        .with_state(StateVariable::scalar("refresh-rate", 120.0, 30.0, 240.0, "Hz"));
    let power = SubObject::new("power")
        .with_skill(SkillSpec::new("ring", Primitive::Emit).with_label("event", "ring"))
        .with_skill(SkillSpec::new("standby", Primitive::Idle))
        .with_state(StateVariable::scalar("battery", 4000.0, 1000.0, 6000.0, "mAh"));
    finish(
        name,
        vec![screen, power],
        manager(&["standby"], vec![rule("always", "standby", None)]),
    )
}

fn printer(name: &str) -> Alo {
    let engine = SubObject::new("engine")
        .with_skill(SkillSpec::new("print", Primitive::Emit).with_label("event", "page"))
        .with_skill(SkillSpec::new("sleep", Primitive::Idle))
        .with_knowledge("A printer transfers text and images from a computer onto paper.")
        .with_state(StateVariable::scalar("print-speed", 30.0, 1.0, 100.0, "ppm"))
        .with_state(StateVariable::scalar("dpi", 1200.0, 300.0, 4800.0, ""))
        .with_state(StateVariable::scalar("tray-capacity", 250.0, 50.0, 1000.0, "sheets"))
        .with_state(StateVariable::scalar("power-draw", 400.0, 0.0, 1500.0, "W"));
    finish(
        name,
        vec![engine],
        manager(&["ready", "printing"], vec![rule("always", "sleep", None)]),
    )
}

fn wifi_router(name: &str) -> Alo {
    let radio = SubObject::new("radio")
        .with_skill(SkillSpec::new("beacon", Primitive::Emit).with_label("event", "beacon"))
        .with_skill(SkillSpec::new("serve", Primitive::Idle))
        .with_knowledge("A WiFi router connects nearby devices to a network without cables.")
        .with_state(StateVariable::scalar("range", 50.0, 0.0, 200.0, "m"))
        .with_state(StateVariable::scalar("bandwidth", 1200.0, 0.0, 10000.0, "Mbps"))
        .with_state(StateVariable::label("antenna-color", "white", &["white", "black"]));
    finish(
        name,
        vec![radio],
        manager(
            &["serving"],
            vec![rule("sense.tick == 0", "beacon", None), rule("always", "serve", None)],
        ),
    )
}

fn world(name: &str) -> Alo {
    let ground = SubObject::new("ground")
        .with_skill(SkillSpec::new("hold", Primitive::Idle))
        .with_knowledge("The world has a flat ground and a sky, and no physics engine.")
        .with_state(StateVariable::vector3("extent", [100.0, 100.0, 100.0]))
        .with_state(StateVariable::scalar("gravity", 9.8, 0.0, 20.0, "m/s^2"));
    let sky = SubObject::new("sky").with_state(StateVariable::label("color", "blue", &["blue", "grey", "black"]));
    finish(name, vec![ground, sky], manager(&["steady"], vec![rule("always", "hold", None)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    #[test]
    fn every_archetype_is_valid() {
        for name in [
            "cat", "roomba", "classroom", "student", "teacher", "smartphone", "printer", "WiFi router",
            "3D physical world",
        ] {
            let alo = archetype(name).unwrap_or_else(|| panic!("{name}"));
            assert_eq!(alo.name, name);
            let report = validate(&alo);
            assert!(report.is_empty(), "{name}: {report}");
        }
        assert!(archetype("dragon").is_none());
        assert!(validate(&generic_alo("dragon")).is_empty());
    }

    #[test]
    fn pair_prefers_flee() {
        let pair = pair_alo("cat", "roomba", Some("bounded 3D physical world"));
        assert_eq!(pair.name, "cat meets roomba");
        assert_eq!(pair.manager.policy[0].to_string(), "when near \"cat\" \"roomba\" < 10 do roomba.escape then reacting");
        let pair = pair_alo("cat", "dragon", None);
        assert_eq!(pair.manager.policy[0].skill.to_string(), "dragon.rest");
        assert!(validate(&pair).is_empty());
    }
}
