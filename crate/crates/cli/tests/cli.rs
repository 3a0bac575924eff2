use arboreal::freefield;
use arboreal::lattice::Torus;
use std::path::Path;
use std::process::{Command, Output};

fn arboreal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arboreal")).args(args).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn error_record(o: &Output) -> serde_json::Value {
    let text = String::from_utf8(o.stderr.clone()).unwrap();
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn ward_check_on_triangle() {
    let o = arboreal(&["ward-check", "--graph", "builtin:c3", "--beta", "2", "--h", "0.3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut rows = 0;
    for line in out.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert!(cells[1].parse::<f64>().unwrap() <= 1e-12, "{line}");
        rows += 1;
    }
    assert!(rows >= 5);
}

#[test]
fn ward_check_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.csv");
    let o = arboreal(&["ward-check", "--graph", "c3", "--beta", "2", "--h", "0.3", "--tol", "1e-30", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_record(&o)["error"]["kind"], "invariant");
    assert!(out.exists());
    assert_eq!(read_json(&dir.path().join("w.manifest.json"))["status"], "failed");
}

#[test]
fn flow_reproduces_squared_green_function() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("flow.csv");
    let o = arboreal(&[
        "flow", "--d", "3", "--L", "2", "--N", "4", "--m2", "0.25", "--case", "2", "--a", "0,0,0", "--b", "1,0,0", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    let qcol = header.iter().position(|&h| h == "q").unwrap();
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    assert_eq!(last[0], "5");
    let q: f64 = last[qcol].parse().unwrap();
    let t = Torus::new(3, 2, 4).unwrap();
    let g = freefield::green(&t, 0.25).unwrap().at(0, t.index(&[1, 0, 0]));
    assert!((q + g * g).abs() <= 1e-9, "{q} vs {}", -g * g);
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[sample]\ngraph = \"c3\"\nbeta = 1.0\ntemperature = 3\n").unwrap();
    let o = arboreal(&["sample", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let rec = error_record(&o);
    assert_eq!(rec["error"]["kind"], "config");
    assert!(rec["error"]["message"].as_str().unwrap().contains("temperature"));

    std::fs::write(&cfg, "[nonsense]\n").unwrap();
    assert_eq!(arboreal(&["sample", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(arboreal(&["sample", "--graph", "c3", "--beta", "1", "--bogus", "1"]).status.code(), Some(2));
    assert_eq!(arboreal(&["sample", "--graph", "c3"]).status.code(), Some(2));
    assert_eq!(arboreal(&["sample", "--graph", "c3", "--beta", "-1"]).status.code(), Some(2));
    assert_eq!(arboreal(&["flow", "--d", "3", "--L", "2", "--N", "2", "--m2", "1", "--b", "1,0"]).status.code(), Some(2));
}

#[test]
fn sampling_is_deterministic() {
    let args = ["sample", "--graph", "builtin:c4", "--beta", "0.7", "--h", "0.2", "--seed", "5", "--sweeps", "4000"];
    let a = arboreal(&args);
    let b = arboreal(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let mut other = args.to_vec();
    other[8] = "6";
    assert_ne!(arboreal(&other).stdout, a.stdout);
}

#[test]
fn numbers_have_seventeen_significant_digits() {
    let o = arboreal(&["sample", "--graph", "c3", "--beta", "1", "--h", "0.1", "--sweeps", "2000"]);
    let out = stdout(&o);
    for line in out.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        for cell in &cells[2..4] {
            let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{cell}");
            let v: f64 = cell.parse().unwrap();
            assert_eq!(format!("{v:.16e}"), *cell);
        }
    }
}

#[test]
fn flags_override_file_and_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[sample]\ngraph = \"builtin:p4\"\nbeta = 1.0\nh = 0.5\nsweeps = 3000\n").unwrap();
    let first = dir.path().join("a.csv");
    let o = arboreal(&["sample", "--config", cfg.to_str().unwrap(), "--beta", "2.5", "--out", first.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = read_json(&dir.path().join("a.manifest.json"));
    let config = manifest["config"].as_str().unwrap();
    assert!(config.contains("beta = 2.5"), "{config}");
    assert!(config.contains("h = 0.5"));
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["schema"], 1);

    // rerun from the recorded config, writing elsewhere
    let replay = dir.path().join("replay.toml");
    std::fs::write(&replay, config).unwrap();
    let second = dir.path().join("b.csv");
    let o = arboreal(&["sample", "--config", replay.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    let m2 = read_json(&dir.path().join("b.manifest.json"));
    let c2 = m2["config"].as_str().unwrap();
    assert_eq!(config.replace("a.csv", "b.csv"), c2);
}

#[test]
fn frd_report_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("frd.csv");
    let o = arboreal(&["frd", "--d", "2", "--L", "2", "--N", "3", "--m2", "0.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = read_json(&dir.path().join("frd.report.json"));
    for inv in report["invariants"].as_array().unwrap() {
        assert_eq!(inv["pass"], true, "{inv}");
    }
    let rows = std::fs::read_to_string(&out).unwrap().lines().count();
    assert_eq!(rows, 1 + 3 * 64);
}

#[test]
fn exact_check_triangle() {
    let o = arboreal(&["exact-check", "--graph", "c3", "--beta", "1"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let conn = out.lines().find(|l| l.starts_with("connection,0,1,")).unwrap();
    let v: f64 = conn.rsplit(',').next().unwrap().parse().unwrap();
    assert!((v - 4.0 / 7.0).abs() < 1e-15);
}

#[test]
fn green_sums_to_inverse_mass() {
    let o = arboreal(&["green", "--d", "2", "--side", "5", "--m2", "0.5"]);
    assert!(o.status.success());
    let sum: f64 = stdout(&o).lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((sum - 2.0).abs() < 1e-12);
}

#[test]
fn decay_fit_without_signal_fails() {
    let o = arboreal(&["decay-fit", "--d", "2", "--side", "16", "--beta", "0.01", "--h", "5", "--rmin", "4", "--rmax", "8", "--sweeps", "200"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_record(&o)["error"]["kind"], "invariant");
}
