#![no_main]

use iotacap::abe::{AbeCiphertext, Bls12, PairingGroup, ToyGroup};
use libfuzzer_sys::fuzz_target;

fn check<G: PairingGroup>(data: &[u8]) {
    if let Ok(ct) = AbeCiphertext::<G>::from_bytes(data) {
        let again = AbeCiphertext::<G>::from_bytes(&ct.to_bytes()).expect("re-encoding parses");
        assert_eq!(again.policy_text(), ct.policy_text());
        assert_eq!(again.leaf_component_count(), ct.policy().num_leaves());
    }
}

fuzz_target!(|data: &[u8]| {
    check::<ToyGroup>(data);
    check::<Bls12>(data);
});
