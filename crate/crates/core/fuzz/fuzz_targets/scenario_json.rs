#![no_main]

use libfuzzer_sys::fuzz_target;
use pollregen::scenario::parse_scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = parse_scenario(text) {
        let issues = file.issues();
        // A file with no issues must build.
        if issues.is_empty() {
            file.to_spec().expect("issue-free file builds a spec");
        }
    }
});
