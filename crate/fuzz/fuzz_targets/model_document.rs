#![no_main]

use libfuzzer_sys::fuzz_target;
use polinfer::document::{canonical_json, LoadedModel};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(model) = LoadedModel::parse(text) else { return };
    // Anything accepted must survive its own canonical form unchanged.
    let canonical = canonical_json(&model.document).expect("accepted documents serialise");
    let again = LoadedModel::parse(&canonical).expect("canonical form reparses");
    assert_eq!(again.hash, model.hash);
    assert_eq!(again.dbn, model.dbn);
});
