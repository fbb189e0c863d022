use std::fs;
use std::process::{Command, Output};

use gausscap::memoryless::solve_one_use;
use gausscap::ApproxOrder;
use gausscap_cli::config::{parse_config, Cli, Job, RunConfig};

fn gausscap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gausscap")).args(args).output().unwrap()
}

fn csv_rows(out: &Output) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    let mut rows = vec![r.headers().unwrap().iter().map(String::from).collect()];
    rows.extend(r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()));
    rows
}

fn config(args: &[&str]) -> Result<RunConfig, String> {
    let mut full = vec!["gausscap"];
    full.extend(args);
    let cli = <Cli as clap::Parser>::try_parse_from(full).map_err(|e| e.to_string())?;
    RunConfig::from_cli(cli).map_err(|e| e.to_string())
}

#[test]
fn memoryless_point_matches_library() {
    let out = gausscap(&["memoryless", "--eta", "0.5", "--N", "1", "--N-env", "1", "--s", "2"]);
    assert!(out.status.success());
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][..3], ["capacity", "stage", "r_opt"]);
    let sol = solve_one_use(0.5, 1.0, 1.0, 2.0, ApproxOrder::Exact).unwrap();
    let cap: f64 = rows[1][0].parse().unwrap();
    let r_opt: f64 = rows[1][2].parse().unwrap();
    assert!((cap - sol.capacity).abs() < 1e-11 * sol.capacity);
    assert!((r_opt - sol.r_opt).abs() < 1e-11);
    assert_eq!(rows[1][1], sol.stage.as_str());
}

#[test]
fn sweep_rises_toward_log2_3() {
    let out = gausscap(&[
        "sweep", "--command", "memoryless", "--axis", "s", "--start", "0", "--stop", "6", "--steps", "120", "--eta",
        "0.5", "--N", "1", "--N-env", "1",
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 121);
    assert_eq!(rows[0][0], "s");
    assert_eq!(rows[0].iter().filter(|c| *c == "s").count(), 1);
    let caps: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(caps.windows(2).all(|w| w[1] > w[0]));
    let last = caps[caps.len() - 1];
    assert!(last < 3f64.log2() && 3f64.log2() - last < 0.02);
}

#[test]
fn sweep_rows_keep_grid_order_across_threads() {
    let args = [
        "sweep", "--command", "finite", "--axis", "N", "--start", "0", "--stop", "2", "--steps", "9", "--eta", "0.5",
        "--N-env", "1", "--s", "1", "--n", "6",
    ];
    let one = Command::new(env!("CARGO_BIN_EXE_gausscap")).args(args).env("GAUSSCAP_THREADS", "1").output().unwrap();
    let four = Command::new(env!("CARGO_BIN_EXE_gausscap")).args(args).env("GAUSSCAP_THREADS", "4").output().unwrap();
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
    let axis: Vec<f64> = csv_rows(&one)[1..].iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(axis.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn bad_thread_count_is_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_gausscap"))
        .args(["sweep", "--command", "memoryless", "--axis", "s", "--start", "0", "--stop", "1", "--steps", "2"])
        .args(["--eta", "0.5", "--N", "1"])
        .env("GAUSSCAP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_output_has_named_columns() {
    let out = gausscap(&["memory", "--eta", "0.5", "--N", "1", "--N-env", "1", "--s", "1", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let row = &v.as_array().unwrap()[0];
    assert_eq!(row["distribution"], "2-3-2");
    let tau = row["tau"].as_f64().unwrap();
    assert!(tau > 0.0 && tau < std::f64::consts::FRAC_PI_2);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out_path = dir.path().join("out.json");
    fs::write(&cfg, "# sample\ncommand = memoryless\neta = 0.3\nN = 1\nN_env = 1  # thermal\ns = 0\n").unwrap();
    let out = gausscap(&[
        "memoryless",
        "--config",
        cfg.to_str().unwrap(),
        "--eta",
        "0.5",
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    let cap = v[0]["capacity"].as_f64().unwrap();
    assert!((cap - 0.622556248918).abs() < 1e-9);
}

#[test]
fn exit_codes() {
    // unknown flag, infeasible parameter, missing parameter
    assert_eq!(gausscap(&["memoryless", "--eta", "0.5", "--N", "1", "--bogus", "1"]).status.code(), Some(2));
    assert_eq!(gausscap(&["memoryless", "--eta", "1.5", "--N", "1"]).status.code(), Some(2));
    assert_eq!(gausscap(&["finite", "--eta", "0.5", "--N", "1"]).status.code(), Some(2));
    assert_eq!(gausscap(&["memoryless", "--eta", "0.5", "--N", "-1"]).status.code(), Some(2));
    assert_eq!(gausscap(&["memoryless", "--eta", "0.5", "--N", "1"]).status.code(), Some(0));
}

#[test]
fn sweep_validation() {
    let base = ["sweep", "--command", "memoryless", "--eta", "0.5", "--N", "1", "--start", "0", "--stop", "1"];
    let with = |extra: &[&str]| {
        let mut a: Vec<&str> = base.to_vec();
        a.extend(extra);
        config(&a)
    };
    assert!(with(&["--axis", "s", "--steps", "1"]).unwrap_err().contains("at least 2"));
    assert!(with(&["--axis", "color", "--steps", "3"]).unwrap_err().contains("unknown axis"));
    assert!(with(&["--axis", "s", "--steps", "3", "--M-env", "1"]).is_err());
    match with(&["--axis", "N-env", "--steps", "3"]).unwrap().job {
        Job::Sweep(_, _, axis) => {
            assert_eq!(axis.name, "N_env");
            assert_eq!(axis.values(), vec![0.0, 0.5, 1.0]);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn config_parser() {
    let map = parse_config("eta = 0.5\n\n# comment\nN-env=2 # trailing\n").unwrap();
    assert_eq!(map["eta"], "0.5");
    assert_eq!(map["N_env"], "2");
    assert!(parse_config("colour = red").is_err());
    assert!(parse_config("eta 0.5").is_err());
}

#[test]
fn verify_single_criterion() {
    let out = gausscap(&["verify", "--criterion", "1"]);
    assert!(out.status.success());
    let rows = csv_rows(&out);
    assert_eq!(rows[1][0], "1");
    assert_eq!(rows[1][2], "true");
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("[PASS] 1."));
    assert_eq!(gausscap(&["verify", "--criterion", "10"]).status.code(), Some(2));
}

#[test]
fn s_star_search_reports_infinite_as_empty() {
    let out = gausscap(&["memoryless", "--eta", "0.9", "--N", "1", "--N-env", "1", "--s-max", "30"]);
    assert!(out.status.success());
    let rows = csv_rows(&out);
    let s = &rows[1][4];
    let finite = gausscap(&["memoryless", "--eta", "0.1", "--N", "1", "--N-env", "1", "--s-max", "30"]);
    let fs = &csv_rows(&finite)[1][4];
    // exactly one of the two ends of the eta range has a finite optimum
    assert!(s.is_empty() != fs.is_empty(), "{s:?} {fs:?}");
}
