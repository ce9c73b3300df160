use std::collections::BTreeMap;

use gnlab_cli::config::*;
use proptest::prelude::*;

#[test]
fn parses_comments_and_whitespace() {
    let m = parse_config("# header\n\n k = 2 \nomega=0.3 # trailing\n").unwrap();
    assert_eq!(m.len(), 2);
    assert_eq!(m["k"], "2");
    assert_eq!(m["omega"], "0.3");
}

#[test]
fn rejects_malformed_lines() {
    assert_eq!(parse_config("k = 2\nomega\n"), Err(ConfigError::Syntax { line: 2, msg: "expected `key = value`".into() }));
    assert!(matches!(parse_config("k = \n"), Err(ConfigError::Syntax { line: 1, .. })));
    assert!(matches!(parse_config("a b = 1\n"), Err(ConfigError::Syntax { line: 1, .. })));
    assert_eq!(parse_config("k = 2\nk = 3\n"), Err(ConfigError::Duplicate { line: 2, key: "k".into() }));
}

#[test]
fn typed_lookups_record_normalized_values() {
    let raw: BTreeMap<String, String> = [("omega", "3e-1"), ("parity", "xperp"), ("ls", "100, 200"), ("extra", "1")].iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    let mut p = Params::new(raw);
    assert_eq!(p.f64("omega", None).unwrap(), 0.3);
    assert_eq!(p.choice("parity", None, &["X", "Xperp"]).unwrap(), "Xperp");
    assert_eq!(p.f64_list("ls", None).unwrap(), vec![100.0, 200.0]);
    assert_eq!(p.count("n", Some(7)).unwrap(), 7);
    assert_eq!(p.finish(), Err(ConfigError::Unknown(vec!["extra".into()])));
    assert_eq!(p.used()["omega"], "0.3");
    assert_eq!(p.used()["ls"], "100,200");
    assert_eq!(p.used()["n"], "7");
    assert!(p.f64("missing", None).is_err());
    assert_ne!(p.hash("wave"), p.hash("evans scan"));
}

#[test]
fn number_format() {
    assert_eq!(fmt_f64(0.3), "0.3");
    assert_eq!(fmt_f64(-0.0), "-0");
    assert_eq!(fmt_f64(1e-12), "1e-12");
    assert_eq!(fmt_f64(2.5e20), "2.5e20");
    assert_eq!(fmt_f64(f64::NAN), "nan");
    assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
}

fn key() -> impl Strategy<Value = String> {
    "[A-Za-z0-9_.-]{1,12}"
}

fn value() -> impl Strategy<Value = String> {
    "[A-Za-z0-9_.,+-][A-Za-z0-9_.,+ -]{0,10}[A-Za-z0-9_.,+-]|[A-Za-z0-9_.,+-]"
}

proptest! {
    #[test]
    fn render_parse_round_trip(m in proptest::collection::btree_map(key(), value(), 0..12)) {
        prop_assert_eq!(parse_config(&render_config(&m)).unwrap(), m);
    }

    #[test]
    fn parser_never_panics(s in "\\PC{0,200}") {
        let _ = parse_config(&s);
    }

    #[test]
    fn numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }
}
