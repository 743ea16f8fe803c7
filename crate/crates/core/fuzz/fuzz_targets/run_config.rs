#![no_main]

use esn_oa::harness::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = RunConfig::from_json(data) {
        // Anything accepted must serialize and parse back.
        let text = cfg.to_json().expect("serialize");
        RunConfig::from_json(text.as_bytes()).expect("reparse");
    }
});
