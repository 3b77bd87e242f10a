use alo_core::arbitrary;
use alo_core::codegen::{emit_scene, emit_update_script, update_fn_name, SCENE_BUNDLE_SCHEMA};
use alo_core::gateway::{archetype, pair_alo};
use alo_core::sim::{EntitySpec, Scenario};
use alo_core::{Alo, Registry};
use proptest::prelude::*;
use serde_json::Value;

fn schema_errors(bundle: &Value) -> Vec<String> {
    let schema: Value = serde_json::from_str(SCENE_BUNDLE_SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    validator.iter_errors(bundle).map(|e| format!("{} at {}", e, e.instance_path)).collect()
}

#[test]
fn pair_update_function_name() {
    assert_eq!(update_fn_name("cat meets roomba"), "updateCatMeetsRoombaPerFrame");
}

#[test]
fn cat_roomba_fixture_bundle_is_schema_valid_and_stable() {
    let mut reg = Registry::in_memory();
    reg.put(archetype("cat").unwrap()).unwrap();
    reg.put(archetype("roomba").unwrap()).unwrap();
    reg.put(pair_alo("cat", "roomba", None)).unwrap();
    let scenario: Scenario = serde_json::from_str(include_str!("../../../testdata/cat_roomba.scenario.json")).unwrap();
    let bundle = emit_scene(&reg, &scenario).unwrap();
    let json = bundle.to_json();
    assert!(schema_errors(&serde_json::from_str(&json).unwrap()).is_empty());
    assert_eq!(bundle.manifests.len(), 3);
    assert_eq!(bundle.interaction_rules.len(), 1);
    assert_eq!(emit_scene(&reg, &scenario).unwrap().to_json(), json);
}

fn distinct_alos() -> impl Strategy<Value = Vec<Alo>> {
    proptest::collection::btree_map(arbitrary::alo_name(), any::<u8>(), 1..5).prop_flat_map(|names| {
        names.into_keys().map(arbitrary::alo_named).collect::<Vec<_>>()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_registered_alos_export_schema_valid(alos in distinct_alos()) {
        let mut reg = Registry::in_memory();
        for alo in &alos {
            reg.put(alo.clone()).unwrap();
        }
        let scenario = Scenario {
            entities: alos
                .iter()
                .enumerate()
                .map(|(i, a)| EntitySpec { alo: a.name.clone(), position: [10.0 + 10.0 * i as f64, 0.0, 50.0], heading: 0.0 })
                .collect(),
            ..Scenario::default()
        };
        let bundle = emit_scene(&reg, &scenario).unwrap();
        let json = bundle.to_json();
        let errors = schema_errors(&serde_json::from_str(&json).unwrap());
        prop_assert!(errors.is_empty(), "{:?}\n{}", errors, json);
        prop_assert_eq!(emit_scene(&reg, &scenario).unwrap().to_json(), json);
        for alo in &alos {
            let script = emit_update_script(alo, "harness-script").unwrap();
            prop_assert!(script.contains(&update_fn_name(&alo.name)));
            prop_assert_eq!(emit_update_script(alo, "harness-script").unwrap(), script);
        }
    }
}
