#![no_main]

use libfuzzer_sys::fuzz_target;
use walrus_cli::format::{to_canonical_json, InstanceFile};
use walrus_cli::parse_instance;

fuzz_target!(|text: &str| {
    if let Ok(instance) = parse_instance(text) {
        // Canonical output must parse back to the same market and be a fixed point.
        let canonical = to_canonical_json(&InstanceFile::from_instance(&instance));
        let reparsed = parse_instance(&canonical).expect("canonical instance parses");
        assert_eq!(reparsed, instance);
        assert_eq!(to_canonical_json(&InstanceFile::from_instance(&reparsed)), canonical);
    }
});
