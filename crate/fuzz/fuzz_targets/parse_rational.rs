#![no_main]

use libfuzzer_sys::fuzz_target;
use walrus_cli::format::format_rational;
use walrus_cli::parse_rational;

fuzz_target!(|text: &str| {
    if let Ok(value) = parse_rational(text) {
        let reduced = format_rational(&value);
        assert_eq!(parse_rational(&reduced).expect("reduced form parses"), value);
        assert_eq!(format_rational(&parse_rational(&reduced).unwrap()), reduced);
    }
});
