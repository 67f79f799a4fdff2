#![no_main]

use libfuzzer_sys::fuzz_target;
use reshom::coeff::parse_expression;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(e) = parse_expression(s) {
        let printed = e.to_string();
        let again = parse_expression(&printed).expect("printed expression reparses");
        let x = [0.25, -0.5, 0.75];
        match (e.eval(&x), again.eval(&x)) {
            (Ok(a), Ok(b)) => assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())),
            (a, b) => assert_eq!(a.is_ok(), b.is_ok()),
        }
    }
});
