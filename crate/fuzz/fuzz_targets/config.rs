#![no_main]

use cellgeom::cli::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(map) = parse_config(text) {
            // accepted keys are normalized and unique
            for key in map.keys() {
                assert!(!key.contains('-'));
                assert!(!key.trim().is_empty());
            }
        }
    }
});
