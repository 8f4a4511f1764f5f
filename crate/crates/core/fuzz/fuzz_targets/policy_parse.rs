#![no_main]

use iotacap::abe::parse_policy;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = parse_policy(text) {
        let again = parse_policy(&p.render()).expect("rendered policy parses");
        assert_eq!(again, p);
    }
});
