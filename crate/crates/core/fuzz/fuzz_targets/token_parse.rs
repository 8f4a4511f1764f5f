#![no_main]

use iotacap::token::{token_parse, token_serialize};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = token_parse(data) {
        let bytes = token_serialize(&t).expect("parsed token is valid");
        assert_eq!(token_parse(&bytes).expect("canonical form parses"), t);
    }
});
