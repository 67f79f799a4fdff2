#![no_main]

use libfuzzer_sys::fuzz_target;
use reshom::study::{fit_rate, read_rate_csv, XColumn};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_rate_csv(data, "error_frob") {
        let _ = fit_rate(&rows, XColumn::LogR, 0.0);
        let _ = fit_rate(&rows, XColumn::R, 1e-12);
    }
});
