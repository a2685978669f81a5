#![no_main]

use libfuzzer_sys::fuzz_target;
use hwnas::search::SearchLog;

fuzz_target!(|data: &str| {
    if let Ok(log) = SearchLog::from_ndjson(data) {
        SearchLog::from_ndjson(&log.to_ndjson()).expect("written log parses");
    }
});
