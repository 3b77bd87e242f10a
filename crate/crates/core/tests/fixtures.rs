//! The shared files under `testdata/` stay loadable and consistent with
//! the library.

use alo_core::gateway::archetype;
use alo_core::model::Provenance;
use alo_core::script::{parse_alo_markdown, parse_canonical, repair, serialize};
use alo_core::variability::AnalyzeConfig;

#[test]
fn canonical_fixtures_match_the_built_in_archetypes() {
    for (name, text) in [
        ("cat", include_str!("../../../testdata/cat.alo.md")),
        ("roomba", include_str!("../../../testdata/roomba.alo.md")),
    ] {
        let alo = parse_canonical(text).unwrap();
        let mut expected = archetype(name).unwrap();
        expected.provenance = Provenance::LlmGenerated;
        assert_eq!(alo, expected, "{name}");
        assert_eq!(serialize(&alo), text, "{name}");
    }
}

#[test]
fn messy_response_repairs_to_the_canonical_roomba() {
    let messy = include_str!("../../../testdata/messy_roomba_response.md");
    let expected = parse_canonical(include_str!("../../../testdata/roomba.alo.md")).unwrap();
    assert!(parse_canonical(messy).is_err());
    assert_eq!(parse_alo_markdown(messy).unwrap(), expected);
    let once = repair(messy);
    assert!(!once.applied.is_empty());
    assert_eq!(repair(&once.text).text, once.text);
}

#[test]
fn banana_run_config_loads() {
    let cfg: AnalyzeConfig = serde_json::from_str(include_str!("../../../testdata/banana.run.json")).unwrap();
    assert_eq!(cfg.user_prompt, "What is a banana?");
    assert_eq!(cfg.n, 20);
    assert_eq!(cfg.temperatures, vec![0.0, 0.7, 2.0]);
}
