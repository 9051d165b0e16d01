#![no_main]

use libfuzzer_sys::fuzz_target;
use ocalign::alignment::{alignment_to_json, parse_alignment};

fuzz_target!(|data: &[u8]| {
    if let Ok(g) = parse_alignment(data) {
        assert!(g.topological_order().is_some());
        let again = parse_alignment(alignment_to_json(&g).as_bytes()).expect("own output parses");
        assert_eq!(again, g);
    }
});
