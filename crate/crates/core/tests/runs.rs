use polinfer::document::{pretty_json, ScenarioDocument};
use polinfer::pollinator::{self, published_scenarios};
use polinfer::runs::{evaluate, EvaluationError, RunRecord, RunStore};

fn scenario(name: &str) -> ScenarioDocument {
    let s = published_scenarios().into_iter().find(|s| s.name == name).unwrap();
    ScenarioDocument::from_scenario(&s, 10)
}

#[test]
fn evaluation_carries_the_model_hash_and_every_marginal() {
    let model = pollinator::bundled_model().unwrap();
    let e = evaluate(&model, &scenario("1a")).unwrap();
    assert_eq!(e.model_hash, model.hash);
    assert_eq!(e.marginals.len(), 10);
    assert_eq!(e.marginals[0].marginals.len(), 10);
    let hb = e.marginals[0].marginals[pollinator::HONEYBEE][0];
    assert_eq!(hb, e.timeline.records[0].good[0]);
    // The fixed pesticide state shows up as a point mass.
    assert_eq!(e.marginals[0].marginals[pollinator::PESTICIDE], vec![0.0, 1.0]);
}

#[test]
fn scenario_errors_surface_as_scenario_errors() {
    let model = pollinator::bundled_model().unwrap();
    let mut doc = scenario("1b");
    doc.interventions[0].window = [0, 3];
    assert!(matches!(evaluate(&model, &doc), Err(EvaluationError::Scenario(_))));
}

#[test]
fn run_ids_depend_on_model_and_scenario_only() {
    let model = pollinator::bundled_model().unwrap();
    let a = RunRecord::from_evaluation(evaluate(&model, &scenario("2")).unwrap()).unwrap();
    let b = RunRecord::from_evaluation(evaluate(&model, &scenario("2")).unwrap()).unwrap();
    assert_eq!(a.id, b.id);
    assert_ne!(a.id, RunRecord::id_for(&model.hash, &scenario("3")).unwrap());
    assert_ne!(a.id, RunRecord::id_for(&"0".repeat(64), &scenario("2")).unwrap());
}

#[test]
fn store_is_append_only() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path().join("runs")).unwrap();
    let model = pollinator::bundled_model().unwrap();
    let mut first = RunRecord::from_evaluation(evaluate(&model, &scenario("4")).unwrap()).unwrap();
    first.created_unix = 100;
    let stored = store.append(&first).unwrap();
    assert_eq!(stored, first);
    let path = dir.path().join("runs").join(format!("{}.json", first.id));
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(bytes, pretty_json(&first).unwrap().into_bytes());

    // A second append of the same run keeps the original file.
    let mut again = first.clone();
    again.created_unix = 200;
    assert_eq!(store.append(&again).unwrap().created_unix, 100);
    assert_eq!(std::fs::read(&path).unwrap(), bytes);

    assert_eq!(store.get(&first.id).unwrap().unwrap(), first);
    assert!(store.get(&"a".repeat(64)).unwrap().is_none());
    assert!(store.get("../../etc/passwd").unwrap().is_none());
    let listed = store.list().unwrap();
    assert_eq!(listed.len(), 1);
    assert_eq!(listed[0].scenario, "4");
}

#[test]
fn store_lists_oldest_first_and_ignores_strays() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    let model = pollinator::bundled_model().unwrap();
    for (name, t) in [("5", 30), ("baseline", 10), ("3", 20)] {
        let mut r = RunRecord::from_evaluation(evaluate(&model, &scenario(name)).unwrap()).unwrap();
        r.created_unix = t;
        store.append(&r).unwrap();
    }
    std::fs::write(dir.path().join("notes.txt"), "x").unwrap();
    let names: Vec<String> = store.list().unwrap().into_iter().map(|r| r.scenario).collect();
    assert_eq!(names, ["baseline", "3", "5"]);
}

#[test]
fn replaying_a_stored_run_reproduces_it_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let store = RunStore::open(dir.path()).unwrap();
    let model = pollinator::bundled_model().unwrap();
    let r = RunRecord::from_evaluation(evaluate(&model, &scenario("1c")).unwrap()).unwrap();
    store.append(&r).unwrap();
    let back = store.get(&r.id).unwrap().unwrap();
    assert_eq!(back.model_hash, model.hash);
    let replay = evaluate(&model, &back.scenario).unwrap();
    assert_eq!(replay.timeline, back.timeline);
    assert_eq!(replay.marginals, back.marginals);
}
