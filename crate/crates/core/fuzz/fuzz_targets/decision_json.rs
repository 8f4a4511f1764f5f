#![no_main]

use iotacap::owner::Decision;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = Decision::from_json(data) {
        let wire = d.to_json().to_string();
        assert_eq!(
            Decision::from_json(wire.as_bytes()).expect("own output parses"),
            d
        );
    }
});
