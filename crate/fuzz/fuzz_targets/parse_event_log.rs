#![no_main]

use libfuzzer_sys::fuzz_target;
use ocalign::model::{extract_process_executions, parse_event_log, validate_execution_dag, ParseMode};

fuzz_target!(|data: &[u8]| {
    for mode in [ParseMode::Strict, ParseMode::Lenient] {
        if let Ok(log) = parse_event_log(data, mode) {
            let again = parse_event_log(log.to_json().as_bytes(), ParseMode::Strict).expect("own output parses");
            assert_eq!(again, log);
            for px in extract_process_executions(&log) {
                assert!(validate_execution_dag(&px).is_ok());
            }
        }
    }
});
