#![no_main]

use libfuzzer_sys::fuzz_target;
use hwnas::controller::PolicyCheckpoint;

fuzz_target!(|data: &str| {
    let _ = PolicyCheckpoint::from_json(data);
});
