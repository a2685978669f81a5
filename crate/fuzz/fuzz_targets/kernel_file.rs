#![no_main]

use libfuzzer_sys::fuzz_target;
use hwnas::tucker::ConvKernel;

fuzz_target!(|data: &[u8]| {
    if let Ok(k) = ConvKernel::parse(data) {
        let again = ConvKernel::parse(&k.to_bytes()).expect("binary form parses");
        assert_eq!(again.to_bytes(), k.to_bytes());
    }
});
