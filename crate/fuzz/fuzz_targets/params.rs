#![no_main]
use gnlab_cli::config::{parse_config, Params};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(m) = parse_config(s) else { return };
    let mut p = Params::new(m);
    let _ = p.f64("omega", Some(0.3));
    let _ = p.int("k", Some(2));
    let _ = p.count("n", None);
    let _ = p.choice("parity", Some("full"), &["X", "Xperp", "full"]);
    let _ = p.f64_list("ls", None);
    let _ = p.choice_list("parities", "X,Xperp", &["X", "Xperp", "full"]);
    let _ = p.finish();
    let _ = p.hash("fuzz");
});
