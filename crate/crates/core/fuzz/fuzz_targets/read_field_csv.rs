#![no_main]

use jcq::quasiprob::{read_field_csv, write_field_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok((field, header)) = read_field_csv(s) {
            let again = write_field_csv(&field, header.params_hash.as_deref());
            let (back, _) = read_field_csv(&again).expect("re-read of written field");
            assert_eq!(back.grid, field.grid);
        }
    }
});
