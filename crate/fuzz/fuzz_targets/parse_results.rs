#![no_main]

use libfuzzer_sys::fuzz_target;
use netcausal::experiment::{decode_results, encode_results, PlotData};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = decode_results(text) {
        let _ = PlotData::from_rows(&rows);
        let again = decode_results(&encode_results(&rows).unwrap()).unwrap();
        assert_eq!(again.len(), rows.len());
    }
});
