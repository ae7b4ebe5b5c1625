#![no_main]

use jcq::lindblad::{read_dump, write_dump};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(l) = read_dump(data) {
        let mut out = Vec::new();
        write_dump(&l, &mut out).expect("write to memory");
        let back = read_dump(&out).expect("re-read of written dump");
        assert_eq!(back.size(), l.size());
        assert_eq!(back.nnz(), l.nnz());
    }
});
