#![no_main]

use jcq::cli::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = parse_config(s) {
            // accepted configs must enumerate without panicking
            let _ = cfg.point_count();
        }
    }
});
