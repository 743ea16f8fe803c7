#![no_main]

use esn_oa::reservoir::ReservoirArtifact;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(mut res) = ReservoirArtifact::parse(data) {
        let u = vec![0.5; res.config().n_u];
        let _ = res.update(&u);
    }
});
