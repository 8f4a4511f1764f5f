#![no_main]

use iotacap::mam::MamMessage;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = MamMessage::decode(data) {
        assert_eq!(m.encode(), data);
    }
});
