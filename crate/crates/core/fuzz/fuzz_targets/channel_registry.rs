#![no_main]

use iotacap::mam::ChannelRegistry;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(reg) = ChannelRegistry::parse(text) {
        let again = ChannelRegistry::parse(&reg.render()).expect("rendered registry parses");
        assert_eq!(again.len(), reg.len());
    }
});
