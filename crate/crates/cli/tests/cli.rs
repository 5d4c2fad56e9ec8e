use std::path::Path;
use std::process::{Command, Output};

const EXAMPLE: [&str; 12] =
    ["--theta1", "0.2", "--theta2", "0.5", "--a", "0.5", "--b", "0.3", "--c", "0.4", "--d", "0.2"];

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strip6v")).args(args).env_remove("S6V_PRECISION").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn with_example<'a>(cmd: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![cmd];
    v.extend(EXAMPLE);
    v.extend(extra);
    v
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<_> = ["one.csv", "two.csv"].iter().map(|f| dir.path().join(f)).collect();
    for f in &files {
        let args = with_example(
            "simulate",
            &["--path", "URRU", "--steps", "200", "--seed", "7", "--replicas", "3", "--out", f.to_str().unwrap()],
        );
        ok(&args);
    }
    let (x, y) = (std::fs::read(&files[0]).unwrap(), std::fs::read(&files[1]).unwrap());
    assert!(!x.is_empty());
    assert_eq!(x, y);
    let other = ok(&with_example("simulate", &["--path", "URRU", "--steps", "200", "--seed", "8", "--replicas", "3"]));
    assert_ne!(other.as_bytes(), &x[..]);
}

#[test]
fn verify_tilting_report() {
    let text = ok(&with_example("verify-tilting", &["--n", "4"]));
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["N"], 4);
    assert!(json["max_abs_error"].as_f64().unwrap() < 1e-10);
}

#[test]
fn bad_parameters_fail_with_diagnostic() {
    let out = run(&[
        "verify-tilting", "--theta1", "0.2", "--theta2", "0.5", "--a", "0.5", "--b", "0.6", "--c", "0.4", "--d", "0.5",
        "--n", "3",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("b + d"));

    let out = run(&["verify-tilting", "--theta1", "0.6", "--theta2", "0.5", "--a", "0.5", "--b", "0.3", "--c", "0.4", "--d", "0.2", "--n", "3"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("theta1"));

    let out = run(&["simulate", "--a", "0.5", "--n", "3"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing parameters"));

    let out = run(&["frobnicate"]);
    assert!(!out.status.success());
}

#[test]
fn phase_sweep_labels_follow_the_boundaries() {
    let r: f64 = 0.625;
    let text = ok(&["phase-sweep", "--r", "0.625", "--grid", "12x9", "--nmax", "30", "--ns", "10,30"]);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "A,C,r,region,phase,limit_density,density_at_10,density_at_30");
    let mut seen = std::collections::BTreeSet::new();
    let mut rows = 0;
    for line in lines {
        rows += 1;
        let f: Vec<&str> = line.split(',').collect();
        let (a, c): (f64, f64) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        let expect = if a * c >= 1.0 {
            ("shock", "")
        } else if a > 1.0 / r.sqrt() {
            ("fan", "high-density")
        } else if c > r.sqrt() {
            ("fan", "low-density")
        } else {
            ("fan", "maximal-current")
        };
        assert_eq!((f[3], f[4]), expect, "A={a} C={c}");
        seen.insert(f[4].to_string());
        if f[3] == "fan" {
            let rho: f64 = f[7].parse().unwrap();
            assert!(rho > 0.0 && rho < 1.0);
        } else {
            assert!(f[5].is_empty() && f[7].is_empty());
        }
    }
    assert_eq!(rows, 12 * 9);
    assert_eq!(seen.len(), 4);
}

#[test]
fn stationary_and_mpa_agree() {
    let exact = ok(&with_example("stationary", &["--path", "RUR", "--anchor", "1"]));
    let ansatz = ok(&with_example("mpa", &["--path", "RUR", "--anchor", "1"]));
    let parse = |t: &str| -> Vec<(String, f64)> {
        t.lines().skip(1).map(|l| {
            let (s, p) = l.split_once(',').unwrap();
            (s.to_string(), p.parse().unwrap())
        }).collect()
    };
    let (x, y) = (parse(&exact), parse(&ansatz));
    assert_eq!(x.len(), 8);
    for ((s1, p1), (s2, p2)) in x.iter().zip(&y) {
        assert_eq!(s1, s2);
        assert!((p1 - p2).abs() < 1e-12);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "a = 0.5\nb = 0.3\nc = 0.4\nd = 0.2\ntheta1 = 0.2\ntheta2 = 0.5\n\n[verify-tilting]\nn = 2\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file: serde_json::Value = serde_json::from_str(&ok(&["--config", cfg, "verify-tilting"])).unwrap();
    assert_eq!(from_file["N"], 2);
    let overridden: serde_json::Value =
        serde_json::from_str(&ok(&["--config", cfg, "verify-tilting", "--n", "3", "--a", "0.6"])).unwrap();
    assert_eq!(overridden["N"], 3);
    assert_eq!(overridden["params"]["a"], 0.6);
}

#[test]
fn precision_from_environment() {
    let args = ["aw-measure", "--A", "2.2", "--B", "-0.4", "--C", "0.3", "--D", "0", "--q", "0.5"];
    let out = Command::new(env!("CARGO_BIN_EXE_strip6v")).args(args).env("S6V_PRECISION", "2").output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("precision"));
    let json: serde_json::Value = serde_json::from_str(&ok(&args)).unwrap();
    assert!((json["total_mass"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert_eq!(json["measure"]["atoms"].as_array().unwrap().len(), 2);
}

#[test]
fn partition_and_density_outputs() {
    let boundary = ["--q", "0.4", "--r", "0.625", "--A", "0.5", "--B", "-0.2", "--C", "0.5", "--D", "-0.1"];
    let mut args = vec!["partition"];
    args.extend(boundary);
    args.extend(["--n", "1,5,12", "--t", "0.5,2", "--compare"]);
    let text = ok(&args);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "N,t,log_z,z,log_z_mpa,rel_diff");
    assert_eq!(rows.len(), 7);
    for row in &rows[1..] {
        let rel: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert!(rel < 1e-8);
    }

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("density.csv");
    let mut args = vec!["density"];
    args.extend(boundary);
    args.extend(["--n", "20,40", "--out", out.to_str().unwrap()]);
    assert!(ok(&args).is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(Path::new(&out).exists());
}

#[test]
fn couple_reports_no_violations() {
    let out = run(&[
        "couple", "--theta1", "0.3", "--theta2", "0.6", "--a", "0.2", "--b", "0.4", "--c", "0.5", "--d", "0.1", "--a2",
        "0.3", "--b2", "0.2", "--c2", "0.3", "--d2", "0.3", "--n", "3", "--steps", "500", "--init2", "111",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains(" 0 ordering violations"));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("step,site,occupation,color\n"));
    assert_eq!(text.lines().count(), 1 + 501 * 3);
}

#[test]
fn scaling_check_orders_near_one() {
    let text = ok(&[
        "scaling-check", "--alpha", "0.8", "--beta", "0.6", "--gamma", "0.4", "--delta", "0.64", "--L", "0.4", "--n", "2",
    ]);
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    for o in json["orders"].as_array().unwrap() {
        assert!((o.as_f64().unwrap() - 1.0).abs() < 0.1);
    }
}
