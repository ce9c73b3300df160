#![no_main]
use gnlab_cli::config::{parse_config, render_config};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(m) = parse_config(s) {
            assert_eq!(parse_config(&render_config(&m)).unwrap(), m);
        }
    }
});
