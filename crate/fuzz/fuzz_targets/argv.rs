#![no_main]
use clap::Parser;
use gnlab_cli::{resolve_params, Cli};
use libfuzzer_sys::fuzz_target;

// one argument per NUL-separated chunk; nothing is executed
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let argv = std::iter::once("gnlab").chain(s.split('\0'));
    if let Ok(cli) = Cli::try_parse_from(argv) {
        if cli.config.is_none() {
            let _ = resolve_params(&cli);
        }
    }
});
