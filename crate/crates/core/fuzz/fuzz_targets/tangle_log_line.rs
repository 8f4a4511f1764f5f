#![no_main]

use iotacap::tangle::LogRecord;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(line) = std::str::from_utf8(data) {
        let _ = LogRecord::parse_line(line);
    }
});
