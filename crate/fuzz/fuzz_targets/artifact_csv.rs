//! Fuzz target for run table parsing.
//!
//! A parsed table re-serializes to text that parses to the same table.

#![no_main]
use libfuzzer_sys::fuzz_target;
use shortcut_forge_cli::artifacts::{is_snake_case, Table};

const MAX_INPUT_SIZE: usize = 256 * 1024;

fuzz_target!(|data: &[u8]| {
    if data.len() > MAX_INPUT_SIZE {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(table) = Table::parse_csv(text) {
        assert!(table.columns().iter().all(|c| is_snake_case(c)));
        assert!(table
            .rows()
            .iter()
            .all(|r| r.len() == table.columns().len()));
        // Compare as text so NaN cells round-trip too.
        let csv = table.to_csv();
        let reparsed = Table::parse_csv(&csv).expect("written table parses");
        assert_eq!(reparsed.to_csv(), csv);
    }
});
