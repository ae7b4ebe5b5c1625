#![no_main]

use jcq::cli::output::read_results_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = read_results_csv(s);
    }
});
