#![no_main]

use libfuzzer_sys::fuzz_target;
use netcausal::io::{decode_dataset, encode_dataset};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ds) = decode_dataset(text) {
        let again = decode_dataset(&encode_dataset(&ds).unwrap()).unwrap();
        assert_eq!(again, ds);
    }
});
