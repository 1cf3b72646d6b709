#![no_main]

use libfuzzer_sys::fuzz_target;
use walrus_cli::format::to_canonical_json;
use walrus_cli::parse_result;

fuzz_target!(|text: &str| {
    if let Ok(result) = parse_result(text) {
        let canonical = to_canonical_json(&result);
        assert_eq!(parse_result(&canonical).expect("canonical result parses"), result);
    }
});
