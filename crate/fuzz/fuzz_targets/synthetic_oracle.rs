#![no_main]

use libfuzzer_sys::fuzz_target;
use hwnas::search::SyntheticOracle;

fuzz_target!(|data: &str| {
    let _ = SyntheticOracle::from_json(data);
});
