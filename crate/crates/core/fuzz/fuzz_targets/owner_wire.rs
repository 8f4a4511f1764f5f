#![no_main]

use std::sync::OnceLock;

use iotacap::abe::ToyGroup;
use iotacap::harness::fixtures::{student_rights, STUDENT_POLICY};
use iotacap::harness::Deployment;
use iotacap::owner::Decision;
use iotacap::tangle::PowConfig;
use libfuzzer_sys::fuzz_target;

fn deployment() -> &'static Deployment<ToyGroup> {
    static D: OnceLock<Deployment<ToyGroup>> = OnceLock::new();
    D.get_or_init(|| {
        let pow = PowConfig {
            difficulty: 0,
            ..PowConfig::default()
        };
        let d = Deployment::<ToyGroup>::lab(3, pow);
        d.owner
            .grant_access(STUDENT_POLICY, student_rights())
            .expect("fresh policy");
        d
    })
}

// First byte picks the endpoint, the rest is the request body.
fuzz_target!(|data: &[u8]| {
    let Some((&which, body)) = data.split_first() else {
        return;
    };
    let path = match which % 3 {
        0 => "/auth",
        1 => "/access",
        _ => "/other",
    };
    let (status, reply) = deployment().owner.handle_wire(path, body);
    if path == "/access" {
        assert_eq!(status, 200);
        let d = Decision::from_json(&reply).expect("owner replies with a decision");
        assert!(!d.is_grant());
    }
});
