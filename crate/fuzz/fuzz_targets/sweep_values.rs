//! Fuzz target for sweep value lists and dotted parameter paths.
//!
//! Input is split at the first newline into a parameter path and a value
//! list.

#![no_main]
use libfuzzer_sys::fuzz_target;
use serde_json::json;
use shortcut_forge_cli::sweep::{parse_values, set_path};

const MAX_INPUT_SIZE: usize = 16 * 1024;

fuzz_target!(|data: &[u8]| {
    if data.len() > MAX_INPUT_SIZE {
        return;
    }
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let (path, values) = text.split_once('\n').unwrap_or(("system.delta", text));
    let Ok(values) = parse_values(values) else {
        return;
    };
    assert!(!values.is_empty());
    for v in values {
        let mut doc = json!({"system": {"delta": 1.0}, "method": {"type": "exact_cd"}});
        if set_path(&mut doc, path, v.clone()).is_ok() {
            let key = path.rsplit('.').next().expect("nonempty path");
            let parent = path.rsplit_once('.').map_or("", |(p, _)| p);
            let mut node = &doc;
            for k in parent.split('.').filter(|k| !k.is_empty()) {
                node = &node[k];
            }
            assert_eq!(node[key], v);
        }
    }
});
