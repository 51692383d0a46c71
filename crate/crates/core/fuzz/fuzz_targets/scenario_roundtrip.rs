#![no_main]

use libfuzzer_sys::fuzz_target;
use pollregen::scenario::{load_scenario, ScenarioFile};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = load_scenario(text) else { return };
    let again = load_scenario(&ScenarioFile::from_spec(&spec).to_json()).expect("written scenario loads");
    assert_eq!(again, spec);
});
