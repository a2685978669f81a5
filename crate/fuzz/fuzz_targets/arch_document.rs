#![no_main]

use libfuzzer_sys::fuzz_target;
use hwnas::arch;

fuzz_target!(|data: &str| {
    if let Ok(net) = arch::deserialize(data) {
        let again = arch::deserialize(&arch::serialize(&net)).expect("serialized form parses");
        assert_eq!(again, net);
    }
});
