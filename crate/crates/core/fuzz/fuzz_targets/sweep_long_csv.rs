#![no_main]

use esn_oa::harness::{parse_sweep_long, summarize_long};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_sweep_long(data) {
        let _ = summarize_long(&rows);
    }
});
