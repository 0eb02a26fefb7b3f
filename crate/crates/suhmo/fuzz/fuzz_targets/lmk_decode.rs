#![no_main]

use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    // decoding must never panic; round-trip what it accepts
    if let Ok(seq) = suhmo::data::decode_lmk(data, Path::new("fuzz")) {
        let encoded = suhmo::data::encode_lmk(&seq);
        let again = suhmo::data::decode_lmk(&encoded, Path::new("fuzz")).unwrap();
        assert_eq!(seq.data(), again.data());
    }
});
