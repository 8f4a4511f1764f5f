#![no_main]

use iotacap::abe::{
    peek_key_file, Bls12, MasterKey, PairingGroup, PublicParams, SecretKey, ToyGroup,
};
use libfuzzer_sys::fuzz_target;

fn check<G: PairingGroup>(data: &[u8]) {
    if let Ok(pp) = PublicParams::<G>::from_bytes(data) {
        PublicParams::<G>::from_bytes(&pp.to_bytes()).expect("re-encoding parses");
    }
    if let Ok(mk) = MasterKey::<G>::from_bytes(data) {
        MasterKey::<G>::from_bytes(&mk.to_bytes()).expect("re-encoding parses");
    }
    if let Ok(sk) = SecretKey::<G>::from_bytes(data) {
        let again = SecretKey::<G>::from_bytes(&sk.to_bytes()).expect("re-encoding parses");
        assert_eq!(again.attributes(), sk.attributes());
    }
}

fuzz_target!(|data: &[u8]| {
    let _ = peek_key_file(data);
    check::<ToyGroup>(data);
    check::<Bls12>(data);
});
