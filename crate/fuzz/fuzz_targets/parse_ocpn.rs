#![no_main]

use libfuzzer_sys::fuzz_target;
use ocalign::model::ParseMode;
use ocalign::petri::{net_to_json, parse_ocpn};

fuzz_target!(|data: &[u8]| {
    if let Ok(net) = parse_ocpn(data, ParseMode::Lenient) {
        let text = serde_json::to_vec(&net_to_json(&net)).expect("serializable");
        let again = parse_ocpn(&text, ParseMode::Strict).expect("own output parses");
        assert_eq!(again, net);
    }
});
