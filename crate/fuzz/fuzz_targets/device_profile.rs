#![no_main]

use libfuzzer_sys::fuzz_target;
use hwnas::cost::DeviceSimulator;

fuzz_target!(|data: &str| {
    let _ = DeviceSimulator::from_json(data);
});
