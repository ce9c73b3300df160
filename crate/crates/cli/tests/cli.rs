use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gnlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gnlab")).arg("--out-dir").arg(dir.join("out")).args(args).current_dir(dir).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn sidecar(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

/// Data rows of a CSV artifact, split into fields.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(2).map(|l| l.split(',').map(String::from).collect()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn wave_happy_path() {
    let d = tempfile::tempdir().unwrap();
    let o = gnlab(d.path(), &["wave", "--k", "2", "--omega", "0.3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 1);
    let csv = read(d.path(), "wave.csv");
    let mut lines = csv.lines();
    let comment = lines.next().unwrap();
    assert_eq!(lines.next().unwrap(), "x,v,u,s");
    let js = sidecar(d.path(), "wave.json");
    let hash = js["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(comment.starts_with("# gnlab ") && comment.ends_with(&format!("config_hash={hash}")));
    assert_eq!(js["parameters"]["omega"], "0.3");
    assert_eq!(js["version"], env!("CARGO_PKG_VERSION"));
    let q = js["summary"]["charge"].as_f64().unwrap();
    assert!(q > 0.0 && js["summary"]["dq_domega"].as_f64().unwrap() < 0.0);
    // profile is even in v and odd in u
    let r = rows(&csv);
    let n = r.len();
    assert_eq!(n % 2, 1);
    for i in [0, n / 4, n / 2 - 1] {
        assert_eq!(r[i][1], r[n - 1 - i][1]);
        assert_eq!(num(&r[i][2]), -num(&r[n - 1 - i][2]));
    }
}

#[test]
fn invalid_input_exits_two() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    fs::write(p.join("bad.cfg"), "omega 0.3\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["wave", "--k", "2", "--omega", "1.2"],
        vec!["wave", "--omega", "abc"],
        vec!["wave", "--k", "0"],
        vec!["wave", "--set", "bogus=1"],
        vec!["wave", "--set", "novalue"],
        vec!["wave", "--config", "bad.cfg"],
        vec!["wave", "--config", "missing.cfg"],
        vec!["evans", "scan", "--axis", "diagonal"],
        vec!["evans", "frobnicate"],
        vec!["spectrum", "sweep", "--omegas", "0.2,1.5"],
        vec!["evolve", "run", "--dt", "-1"],
    ];
    for args in cases {
        let o = gnlab(p, &args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
    let o = Command::new(env!("CARGO_BIN_EXE_gnlab")).args(["wave"]).env("GNLAB_WORKERS", "zero").current_dir(p).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(!p.join("out").exists());
}

#[test]
fn scan_reports_two_omega_bracket() {
    let d = tempfile::tempdir().unwrap();
    let o = gnlab(d.path(), &["evans", "scan", "--k", "2", "--omega", "0.3", "--axis", "imag", "--from", "0.01", "--to", "1.4", "--n", "2000", "--parity", "Xperp"]);
    assert_eq!(code(&o), 0);
    let b = rows(&read(d.path(), "evans_brackets.csv"));
    assert!(b.iter().any(|r| (num(&r[1]) - 0.6).abs() < 1e-3), "{b:?}");
    assert_eq!(rows(&read(d.path(), "evans_scan.csv")).len(), 2000);

    let o = gnlab(d.path(), &["evans", "locate", "--k", "2", "--omega", "0.3", "--im", "0.6", "--parity", "Xperp"]);
    assert_eq!(code(&o), 0);
    let r = &rows(&read(d.path(), "evans_locate.csv"))[0];
    assert!((num(&r[1]) - 0.6).abs() < 1e-8);
    assert_eq!(r[2], "1");
    assert_eq!(r[6], "Xperp");
}

#[test]
fn track_follows_two_omega_line() {
    let d = tempfile::tempdir().unwrap();
    let o = gnlab(d.path(), &["evans", "track", "--from", "0.3", "--to", "0.2", "--step", "0.025", "--seed-im", "0.6", "--parity", "Xperp"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = rows(&read(d.path(), "evans_track.csv"));
    assert!(r.len() >= 5);
    for row in r {
        assert!((num(&row[2]) - 2.0 * num(&row[0])).abs() < 1e-6, "{row:?}");
    }
}

#[test]
fn reruns_are_byte_identical() {
    let d = tempfile::tempdir().unwrap();
    let args = ["spectrum", "sweep", "--k", "2", "--omegas", "0.15,0.3", "--n", "200"];
    let run = |sub: &str, workers: &str| {
        let o = Command::new(env!("CARGO_BIN_EXE_gnlab"))
            .arg("--out-dir")
            .arg(d.path().join(sub))
            .args(args)
            .env("GNLAB_WORKERS", workers)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        ["spectrum_X.csv", "spectrum_Xperp.csv", "spectrum.json"].map(|f| fs::read(d.path().join(sub).join(f)).unwrap())
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "3");
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn config_precedence() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    fs::write(p.join("run.cfg"), "# wave settings\nk = 3\nomega = 0.4\nn = 2048  # coarse\n").unwrap();
    let omega_used = |args: &[&str]| {
        let o = gnlab(p, args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let js = sidecar(p, "wave.json");
        (js["parameters"]["omega"].as_str().unwrap().to_string(), js["parameters"]["k"].as_str().unwrap().to_string(), js["config_hash"].as_str().unwrap().to_string())
    };
    let file = omega_used(&["--config", "run.cfg", "wave"]);
    assert_eq!((file.0.as_str(), file.1.as_str()), ("0.4", "3"));
    let set = omega_used(&["--config", "run.cfg", "--set", "omega=0.35", "wave"]);
    assert_eq!(set.0, "0.35");
    let flag = omega_used(&["--config", "run.cfg", "--set", "omega=0.35", "wave", "--omega", "0.3"]);
    assert_eq!((flag.0.as_str(), flag.1.as_str()), ("0.3", "3"));
    // same used values, same hash, whatever their source
    let direct = omega_used(&["wave", "--k", "3", "--omega", "0.3", "--n", "2048"]);
    assert_eq!(direct.2, flag.2);
    assert_ne!(file.2, flag.2);
}

#[test]
fn selftest_pass_fault_and_determinism() {
    let d = tempfile::tempdir().unwrap();
    let o1 = gnlab(d.path(), &["selftest"]);
    assert_eq!(code(&o1), 0, "{}", String::from_utf8_lossy(&o1.stderr));
    let csv1 = read(d.path(), "selftest.csv");
    assert!(rows(&csv1).iter().all(|r| r[3] == "yes"));
    let o2 = gnlab(d.path(), &["selftest"]);
    assert_eq!(o1.stdout, o2.stdout);
    assert_eq!(csv1, read(d.path(), "selftest.csv"));

    let o = gnlab(d.path(), &["selftest", "--fault", "1e-3"]);
    assert_eq!(code(&o), 3);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("W-decay"), "{err}");
    let js = sidecar(d.path(), "selftest.json");
    assert!(js["summary"]["failed"].as_array().unwrap().iter().any(|v| v == "W-decay"));
}

#[test]
fn sweep_reproduces_spectral_structure() {
    let d = tempfile::tempdir().unwrap();
    let o = gnlab(d.path(), &["spectrum", "sweep", "--k", "2", "--omega-from", "0.1", "--omega-to", "0.4", "--omega-step", "0.1", "--parities", "Xperp"]);
    assert_eq!(code(&o), 0);
    let r = rows(&read(d.path(), "spectrum_Xperp.csv"));
    for om in [0.1, 0.2, 0.3, 0.4] {
        let on_line = r.iter().any(|row| (num(&row[0]) - om).abs() < 1e-12 && row[2] != "" && (num(&row[2]) - 2.0 * om).abs() < 1e-6 && num(&row[1]) == 0.0);
        assert!(on_line, "omega {om}: {r:?}");
    }
    for row in &r {
        assert_eq!(num(&row[4]), 1.0 - num(&row[0]));
        assert_eq!(num(&row[5]), 1.0 + num(&row[0]));
        assert_eq!(row[6], "ok");
    }

    let o = gnlab(d.path(), &["spectrum", "sweep", "--k", "3", "--omegas", "0.2,0.3,0.9", "--parities", "X"]);
    assert_eq!(code(&o), 0);
    let r = rows(&read(d.path(), "spectrum_X.csv"));
    assert_eq!(r.len(), 3);
    assert_eq!(r[0][6], "no_zero");
    assert_eq!(r[1][6], "no_zero");
    assert!(num(&r[2][1]) > 0.0008 && num(&r[2][1]) < 0.59 && num(&r[2][2]) == 0.0, "{:?}", r[2]);
}

#[test]
fn green_check_passes() {
    let d = tempfile::tempdir().unwrap();
    for args in [vec!["green", "check"], vec!["green", "check", "--re", "0.2", "--im", "0.3"], vec!["green", "check", "--im", "1.1", "--side", "plus"]] {
        let o = gnlab(d.path(), &args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(rows(&read(d.path(), "green_check.csv")).iter().all(|r| r[3] == "yes"));
    }
}

#[test]
fn evolve_writes_track() {
    let d = tempfile::tempdir().unwrap();
    let o = gnlab(d.path(), &["evolve", "run", "--l", "60", "--n", "512", "--dt", "0.02", "--t-end", "5", "--extract-every", "1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(d.path(), "evolve.csv");
    assert_eq!(csv.lines().nth(1).unwrap(), "t,omega,gamma,Q,E,weighted_Z,H1_Z,parity_err");
    let r = rows(&csv);
    assert_eq!(r.len(), 6);
    let q0 = num(&r[0][3]);
    for row in &r {
        assert!((num(&row[3]) - q0).abs() <= 1e-10 * q0);
        assert!((num(&row[1]) - 0.3).abs() < 1e-3);
    }
    assert_eq!(sidecar(d.path(), "evolve.json")["summary"]["tube_exits"].as_array().unwrap().len(), 0);
}
