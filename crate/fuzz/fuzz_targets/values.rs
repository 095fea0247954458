#![no_main]

use cellgeom::cli::{parse_scalar, parse_values, Unit};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&tag, rest)) = data.split_first() else { return };
    let Ok(s) = std::str::from_utf8(rest) else { return };
    let unit = match tag % 3 {
        0 => Unit::Length,
        1 => Unit::Decibel,
        _ => Unit::Plain,
    };
    if let Ok(v) = parse_scalar(s, unit) {
        assert!(v.is_finite());
    }
    if let Ok(vs) = parse_values(s, unit) {
        assert!(vs.iter().all(|v| v.is_finite()));
    }
});
