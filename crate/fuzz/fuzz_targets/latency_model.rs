#![no_main]

use libfuzzer_sys::fuzz_target;
use hwnas::cost::LatencyModel;

fuzz_target!(|data: &str| {
    let _ = LatencyModel::from_json(data);
});
