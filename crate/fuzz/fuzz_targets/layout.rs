#![no_main]

use libfuzzer_sys::fuzz_target;
use hwnas::arch::Layout;
use hwnas::space::{build_space, HardwareAdaptation, SpaceVariant};

fuzz_target!(|data: &str| {
    if let Ok(layout) = Layout::from_json(data) {
        let _ = build_space(SpaceVariant::IbnOnly, HardwareAdaptation::Neutral, &layout);
    }
});
