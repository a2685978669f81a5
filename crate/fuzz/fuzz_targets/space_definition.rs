#![no_main]

use libfuzzer_sys::fuzz_target;
use hwnas::arch::Layout;
use hwnas::space::SpaceDefinition;

fuzz_target!(|data: &str| {
    if let Ok(def) = SpaceDefinition::from_json(data) {
        let _ = def.build(&Layout::toy2());
    }
});
