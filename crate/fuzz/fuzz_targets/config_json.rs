#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(cfg) = reshom::study::parse_config(s) {
            // Accepted configs must build their field and filter without panicking.
            let _ = cfg.field();
            let _ = cfg.filter();
            let _ = cfg.r_values();
        }
    }
});
