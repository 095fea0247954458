#![no_main]

use cellgeom::experiments::{Engine, Metric, Variable};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(ms) = Metric::parse_list(s) {
        for m in ms {
            // display output parses back to the same metric
            assert_eq!(m.to_string().parse::<Metric>().ok(), Some(m));
        }
    }
    let _ = s.parse::<Variable>();
    let _ = s.parse::<Engine>();
});
