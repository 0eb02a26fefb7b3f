#![no_main]

use libfuzzer_sys::fuzz_target;
use std::path::Path;

fuzz_target!(|data: &[u8]| {
    if let Ok(ckpt) = suhmo::checkpoint::decode(data, Path::new("fuzz")) {
        let encoded = suhmo::checkpoint::encode(&ckpt.meta, &ckpt.params);
        suhmo::checkpoint::decode(&encoded, Path::new("fuzz")).unwrap();
    }
});
