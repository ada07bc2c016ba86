//! Fuzz target for run summary parsing.

#![no_main]
use libfuzzer_sys::fuzz_target;
use shortcut_forge_cli::artifacts::Summary;

const MAX_INPUT_SIZE: usize = 64 * 1024;

fuzz_target!(|data: &[u8]| {
    if data.len() > MAX_INPUT_SIZE {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(summary) = Summary::parse(text) {
        let json = summary.to_json();
        let reparsed = Summary::parse(&json).expect("written summary parses");
        assert_eq!(reparsed.to_json(), json);
        for c in &summary.columns {
            let _ = summary.tolerance(c);
        }
    }
});
