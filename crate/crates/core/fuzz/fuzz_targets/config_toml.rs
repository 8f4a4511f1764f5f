#![no_main]

use std::path::Path;

use iotacap::config::Config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = Config::parse(text, Path::new("/srv/iotacap")) {
            let _ = cfg.owner_seed();
        }
    }
});
