#![no_main]

use esn_oa::harness::Checkpoint;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = Checkpoint::parse(data) {
        let _ = ck.restore(false);
        let _ = ck.restore(true);
    }
});
