use std::process::{Command, Output};

use cascade_core::experiments::ResultTable;

fn cascade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascade"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn constants_csv_has_one_row_per_threshold() {
    let o = cascade(&["constants", "--law", "uniform-stick", "--j", "2,3", "--alpha", "0.5", "--csv"]);
    assert!(o.status.success());
    let t = ResultTable::parse_csv(&stdout(&o)).unwrap();
    assert_eq!(&t.columns[..5], ["theta_lower", "theta_star_lower", "theta_star_upper", "c_lower", "c_upper"]);
    assert_eq!(t.rows.len(), 3);
    let h = t.columns.iter().position(|c| c == "height_constant").unwrap();
    let c2 = match &t.rows[0][h] {
        cascade_core::experiments::Value::Float(x) => *x,
        other => panic!("unexpected cell {other:?}"),
    };
    assert!((c2 - 2.0 / 1.5f64.ln()).abs() < 1e-9);
}

#[test]
fn constants_json_encodes_infinities() {
    let o = cascade(&["constants", "--law", "mix23:alpha=0.5", "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["theta_star_upper"], "inf");
    assert!((v["c_upper"].as_f64().unwrap() - 1.0 / 2f64.ln()).abs() < 1e-6);
}

#[test]
fn simulate_prints_one_row() {
    let o = cascade(&["simulate", "--law", "dirac-half", "--n", "2", "--j", "2", "--stats-upto", "2"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("n,j,mode,env_seed,ball_seed,realized_total,H,G,N_1,M_1"));
    // two balls share the root; with two children of mass 1/2 G is 1
    assert!(lines[1].starts_with("2,2,exact,0,0,2,"));
}

#[test]
fn simulate_is_reproducible() {
    let args = ["simulate", "--law", "uniform-stick", "--n", "5000", "--j", "3", "--env-seed", "9", "--ball-seed", "4"];
    assert_eq!(cascade(&args).stdout, cascade(&args).stdout);
}

#[test]
fn exit_codes() {
    let unsupported = cascade(&["simulate", "--law", "uniform-stick", "--n", "10", "--j", "1"]);
    assert_eq!(unsupported.status.code(), Some(2));
    let power = cascade(&["scan-alpha", "--law", "mix23:alpha=0.5", "--n-min", "16", "--n-max", "256", "--grid-points", "4", "--replicas", "2"]);
    assert_eq!(power.status.code(), Some(2));
    let budget = cascade(&["simulate", "--law", "uniform-stick", "--n", "100000", "--j", "2", "--budget", "10"]);
    assert_eq!(budget.status.code(), Some(3));
    let bad = cascade(&["constants", "--law", "nope"]);
    assert_eq!(bad.status.code(), Some(1));
    let lattice = cascade(&["constants", "--law", "dirac-half"]);
    assert_eq!(lattice.status.code(), Some(1));
}

#[test]
fn scan_j_writes_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let p = dir.path().join(name);
        let o = cascade(&[
            "scan-j", "--n-min", "64", "--n-max", "4096", "--grid-points", "4", "--replicas", "3",
            "--seed", "11", "--j", "2,3", "--out", p.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(p).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let t = ResultTable::parse_csv(std::str::from_utf8(&a).unwrap()).unwrap();
    assert_eq!(t.rows.len(), 8);
    assert!(t.meta.iter().any(|(k, v)| k == "seed" && v == "11"));
}

#[test]
fn unwritable_output_names_the_path() {
    let o = cascade(&[
        "spacings", "--n-min", "16", "--n-max", "128", "--grid-points", "4", "--replicas", "2",
        "--out", "/nonexistent-dir/s.csv",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent-dir/s.csv"));
}

#[test]
fn table_format_and_checks() {
    let o = cascade(&["spacings", "--n-min", "16", "--n-max", "128", "--grid-points", "4", "--replicas", "2", "--format", "table"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("mean_ln_min_cluster"));
    let m = cascade(&["martingale-check", "--law", "uniform-stick", "--theta", "0.5", "--k", "3", "--replicas", "200"]);
    assert!(m.status.success());
    let b = cascade(&["biggins-check", "--law", "uniform-stick", "--k", "8", "--replicas", "3"]);
    assert!(b.status.success());
    assert!(stdout(&b).contains("# mean_ratio: "));
}
