//! Fuzz target for scenario configuration parsing.
//!
//! Any config accepted by `parse_config` must survive a serialization round
//! trip with the same hashes.

#![no_main]
use libfuzzer_sys::fuzz_target;
use shortcut_forge_cli::config::parse_config;

const MAX_INPUT_SIZE: usize = 64 * 1024;

fuzz_target!(|data: &[u8]| {
    if data.len() > MAX_INPUT_SIZE {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config(text) {
        let again = serde_json::to_string(&cfg).expect("accepted config serializes");
        let reparsed = parse_config(&again).expect("serialized config parses");
        assert_eq!(cfg.config_hash(), reparsed.config_hash());
        assert_eq!(cfg.scenario_hash(), reparsed.scenario_hash());
    }
});
