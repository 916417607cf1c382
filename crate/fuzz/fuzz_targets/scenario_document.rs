#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use polinfer::document::{parse_json, LoadedModel, ScenarioDocument};
use polinfer::pollinator;
use polinfer::runs::evaluate;

fn model() -> &'static LoadedModel {
    static MODEL: OnceLock<LoadedModel> = OnceLock::new();
    MODEL.get_or_init(|| pollinator::bundled_model().expect("bundled model loads"))
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(doc) = parse_json::<ScenarioDocument>(text) else {
        return;
    };
    // Keep runs short; long horizons only cost time.
    if doc.horizon > 12 {
        return;
    }
    if let Ok(e) = evaluate(model(), &doc) {
        for r in &e.timeline.records {
            assert!(r.utility.is_finite());
        }
    }
});
