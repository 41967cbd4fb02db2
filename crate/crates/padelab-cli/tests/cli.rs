use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_pade-lab");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("PADE_LAB_OUT").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn theta_table_matches_table_one() {
    let o = run(&["theta-table", "--delta", "1e-8", "--kmin", "5", "--kmax", "18"]);
    assert_eq!(o.status.code(), Some(0));
    let table = [1.49, 2.36, 3.34, 4.40, 5.53, 6.69, 7.89, 9.11, 10.35, 11.61, 12.88, 14.16, 15.45, 16.74];
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,theta_k"));
    for (line, want) in lines.zip(table) {
        let theta: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((theta - want).abs() <= 0.01, "{line}");
    }
}

#[test]
fn coeffs_prints_fractions() {
    let o = run(&["coeffs", "--k", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("3,1/120,"));
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let bad = run(&["theta-table", "--nope"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("Usage"));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["solve", "--m", "1", "--k", "1"]).status.code(), Some(1));
}

#[test]
fn sweep_csv_is_byte_identical_across_runs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = run(&["sweep-m", "--tridiag", "3", "--horizon", "4", "--k", "3", "--m-max", "6", "--out", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("sweep_m.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let text = String::from_utf8(read(&a)).unwrap();
    assert!(text.starts_with("scheme,T,m,k,p,rel_error,kappa,p_succ\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 6);
}

#[test]
fn random_suite_is_deterministic_given_seed() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = run(&["random-suite", "--seeds", "3", "--seed", "11", "--horizons", "1,5", "--out", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(fs::read(a.path().join("m_star.csv")).unwrap(), fs::read(b.path().join("m_star.csv")).unwrap());
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.path().join("m_star.json")).unwrap()).unwrap();
    assert_eq!(json["metadata"]["seeds"], serde_json::json!([11, 12, 13]));
}

#[test]
fn analyze_recomputes_sweep_rows() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().to_str().unwrap();
    let o = run(&["sweep-m", "--tridiag", "5", "--horizon", "30", "--k", "9", "--m-max", "8", "--emit-systems", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for row in csv_rows(&d.path().join("sweep_m.csv")) {
        let sys = d.path().join("systems").join(format!("{}_m{}.txt", row[0], row[2]));
        let adir = d.path().join(format!("a_{}_{}", row[0], row[2]));
        let o = run(&["analyze", "--system", sys.to_str().unwrap(), "--out", adir.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(adir.join("analyze.json")).unwrap()).unwrap();
        for (col, key) in [(6, "kappa"), (7, "p_succ")] {
            let want: f64 = row[col].parse().unwrap();
            let got = v[key].as_f64().unwrap();
            assert!((got - want).abs() <= 1e-8 * want.abs(), "{key} {got} vs {want} in {row:?}");
        }
    }
}

#[test]
fn out_env_overrides_flag_and_config_presets_flags() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let cfg = flag_dir.path().join("run.cfg");
    fs::write(&cfg, "# preset\nkmin = 7\nkmax=9\n").unwrap();
    let o = Command::new(BIN)
        .args(["theta-table", "--config", cfg.to_str().unwrap(), "--kmax", "8", "--out", flag_dir.path().to_str().unwrap()])
        .env("PADE_LAB_OUT", env_dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!flag_dir.path().join("theta_table.csv").exists());
    let text = fs::read_to_string(env_dir.path().join("theta_table.csv")).unwrap();
    let ks: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ks, ["7", "8"]);
}

#[test]
fn solve_reports_terminal_and_distance() {
    let o = run(&["solve", "--tridiag", "3", "--horizon", "2", "--scheme", "pade", "--m", "4", "--k", "5", "--p", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["terminal"].as_array().unwrap().len(), 3);
    assert!(v["distance_to_reference"].as_f64().unwrap() < 1e-8);
    assert!(v["residual"].as_f64().unwrap() < 1e-12);
    let p = v["p_succ"].as_f64().unwrap();
    assert!(p > 0.0 && p <= 1.0);
}

#[test]
fn build_then_analyze_with_bounds() {
    let d = tempfile::tempdir().unwrap();
    let problem = d.path().join("p.json");
    let a = "[[{\"re\":-2,\"im\":0},{\"re\":1,\"im\":0}],[{\"re\":1,\"im\":0},{\"re\":-2,\"im\":0}]]";
    fs::write(&problem, format!("{{\"n\":2,\"a\":{a},\"b\":[1,1],\"x0\":[1,0],\"T\":2}}")).unwrap();
    let bdir = d.path().join("b");
    let o = run(&["build", "--problem", problem.to_str().unwrap(), "--m", "2", "--k", "4", "--p", "3", "--out", bdir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let sys = bdir.join("system.txt");
    assert!(fs::read_to_string(&sys).unwrap().starts_with("26 "));
    let o = run(&["analyze", "--system", sys.to_str().unwrap(), "--problem", problem.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["bounds"]["satisfied"].as_object().unwrap().values().all(|b| b == true));
    assert!(v["bounds"]["bound_kappa"].as_f64().unwrap() >= v["kappa"].as_f64().unwrap());
}

#[test]
fn verify_bounds_and_circuit_verify_pass() {
    let o = run(&["verify-bounds", "--suite", "thm36", "--seeds", "5", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("suite,sample,quantity,n,m,k,p,norm_ah,measured,bound,margin,satisfied"));
    assert_eq!(run(&["verify-bounds", "--suite", "nope", "--seeds", "1"]).status.code(), Some(1));

    let o = run(&["circuit-verify", "--n", "2", "--m", "2", "--k1", "4", "--h", "1.0", "--random-a", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("U_L,"));
    assert!(text.trim_end().ends_with("(alpha, ancillas) = (4, 5)"));
    let o = run(&["circuit-verify", "--n", "1", "--m", "1", "--k1", "2", "--h", "2.0"]);
    assert!(stdout(&o).trim_end().ends_with("(alpha, ancillas) = (8, 6)"));
}
