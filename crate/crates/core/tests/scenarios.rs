use std::fs;
use std::path::Path;

use mimo_placement::scenario::{load_scenario, scenario_to_json, ArrayMode};

#[test]
fn bundled_scenarios_load_and_reserialize() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let s = load_scenario(&fs::read_to_string(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(!s.targets().is_empty());
        assert_eq!(load_scenario(&scenario_to_json(&s)).unwrap(), s, "{}", path.display());
        seen += 1;
    }
    assert_eq!(seen, 5);
}

#[test]
fn cartesian_and_parametric_targets_agree() {
    let s = load_scenario(include_str!("../scenarios/single_target.json")).unwrap();
    let t = s.targets()[0];
    let p = t.position(&s.radar);
    assert!((p.x - 410.0).abs() < 1e-9 && (p.y + 710.0).abs() < 1e-9);
    let doc = format!(
        r#"{{ "array": {{ "mode": "transceiver", "tx": [[-0.15, 0.0], [0.0, 0.0], [0.15, 0.0]] }},
              "targets": [{{ "cell": {}, "theta_rad": {}, "beta": {}, "xi": 3.0, "zeta": 3.0 }}] }}"#,
        t.cell, t.theta, t.beta
    );
    let q = load_scenario(&doc).unwrap().targets()[0];
    assert_eq!((q.cell, q.theta, q.beta), (t.cell, t.theta, t.beta));
}

#[test]
fn separate_arrays_keep_their_sides() {
    let s = load_scenario(include_str!("../scenarios/separate_2x2.json")).unwrap();
    assert_eq!(s.array.mode, ArrayMode::Separate);
    assert_eq!((s.array.m(), s.array.n()), (2, 2));
}

#[test]
fn malformed_documents_name_the_field() {
    let err = load_scenario(r#"{ "array": { "mode": "transceiver", "tx": [[0.0, "a"]] }, "targets": [] }"#).unwrap_err();
    assert!(err.to_string().contains("array"), "{err}");
}
