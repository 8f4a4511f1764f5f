#![no_main]

use iotacap::owner::AccessRequest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(r) = AccessRequest::parse(data) {
        let bytes = r.to_canonical_bytes().expect("parsed request is valid");
        assert_eq!(
            AccessRequest::parse(&bytes).expect("canonical form parses"),
            r
        );
    }
});
