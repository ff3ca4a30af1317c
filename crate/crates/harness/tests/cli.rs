use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fj_core::abstraction::{cover_set, AbstractGrid};
use fj_core::observation::ObservationSpec;
use fj_core::rational::{self, Rational};
use fj_harness::config::load_run;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn fjv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fjv")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn verify(config: &Path, obs: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["verify", "--config", config.to_str().unwrap(), "--obs", obs.to_str().unwrap()];
    args.extend_from_slice(extra);
    fjv(&args)
}

#[test]
fn planted_fixture_is_consistent() {
    let o = verify(&fixture("planted.json"), &fixture("planted_obs.csv"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("verdict: CONSISTENT"));
    assert!(out.contains("witness: "));
    assert!(out.contains("sampled evidence"));
}

/// Independent reasoning about the impossible fixture: every initial value
/// the cover set admits sits on the wrong side of the threshold for all four
/// agents at `t = 0`, while the budget at `κ + δ` allows one mismatch.
#[test]
fn impossible_fixture_is_unsat_by_construction() {
    let cfg = load_run(&fixture("planted.json")).unwrap();
    let g = cfg.grid.unwrap();
    let grid = AbstractGrid::new(g.d_x, g.d_lambda, cfg.w().unwrap(), 0.0).unwrap();
    let pi_star = cfg.config_box.as_ref().unwrap().build(4).unwrap();
    let space = cover_set(&pi_star, &grid).unwrap();
    let obs = ObservationSpec::load_csv(&fixture("impossible_obs.csv"), rational::int(0)).unwrap();
    let half = rational::ratio(1, 2);
    for (i, opts) in space.init_options.iter().enumerate() {
        for &k in opts {
            let above = grid.init_value(k) >= half;
            assert_ne!(above, obs.at(0).get(i), "agent {i} option {k}");
        }
    }
    let tol: Rational = cfg.kappa.unwrap().0 + cfg.delta.unwrap().0;
    let budget = rational::floor_to_i64(&(tol * rational::int(4)));
    assert!(budget < 4);

    let o = verify(&fixture("planted.json"), &fixture("impossible_obs.csv"), &[]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("verdict: INCONSISTENT"));
}

#[test]
fn small_kappa_reports_skipped_check() {
    let dir = scratch("kappa");
    let text = fs::read_to_string(fixture("planted.json")).unwrap();
    let cfg = dir.join("small_kappa.json");
    fs::write(&cfg, text.replace("\"kappa\": \"1/4\"", "\"kappa\": \"1/100\"")).unwrap();
    let o = verify(&cfg, &fixture("planted_obs.csv"), &[]);
    assert_eq!(o.status.code(), Some(2), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("skipped"), "{}", stdout(&o));
}

#[test]
fn malformed_inputs_name_the_line() {
    let dir = scratch("malformed");
    let bad_obs = dir.join("obs.csv");
    fs::write(&bad_obs, "0,0,1,1\n0,0,2,1\n").unwrap();
    let o = verify(&fixture("planted.json"), &bad_obs, &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 2, column 3"), "{}", stderr(&o));

    let bad_cfg = dir.join("cfg.json");
    fs::write(&bad_cfg, "{\n  \"schema_version\": 1,\n  \"influence\": {\"kind\": \"uniform\", \"n\": 4},\n  \"colour\": 3\n}\n").unwrap();
    let o = verify(&bad_cfg, &fixture("planted_obs.csv"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("cfg.json:4:"), "{}", stderr(&o));

    let o = fjv(&["verify", "--config", bad_cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn simulate_prints_the_trajectory() {
    let dir = scratch("simulate");
    let o = fjv(&[
        "simulate",
        "--config",
        fixture("simulate.json").to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "t,x_0,x_1,x_2,x_3,y_0,y_1,y_2,y_3");
    assert_eq!(lines.len(), 5);
    // Agent 3 has stubbornness 1 and never moves.
    assert!(lines[1..].iter().all(|l| l.split(',').nth(4) == Some("0.9")));
    assert_eq!(fs::read_to_string(dir.join("trajectory.csv")).unwrap(), out);
}

#[test]
fn abstract_prints_snapped_config_and_certificate() {
    let o = fjv(&["abstract", "--config", fixture("simulate.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["abstraction"]["lambda_values"][3], "1");
    assert_eq!(v["certificate"]["d_x"], 10);
    assert!(v["certificate"]["valid"].is_boolean());
}

#[test]
fn count_engines_agree() {
    let solver = fj_core::verify::SolverConfig::default();
    let engine = if solver.available() { "both" } else { "enum" };
    let o = fjv(&[
        "count",
        "--config",
        fixture("count.json").to_str().unwrap(),
        "--obs",
        fixture("planted_obs.csv").to_str().unwrap(),
        "--engine",
        engine,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let counts: Vec<u64> = stdout(&o)
        .lines()
        .map(|l| l.rsplit(' ').next().unwrap().parse().unwrap())
        .collect();
    assert!(!counts.is_empty());
    assert!(counts.iter().all(|&c| c == counts[0] && c >= 1));
}

#[test]
fn experiments_are_byte_reproducible() {
    let dir = scratch("repro");
    let cfg = dir.join("exp.json");
    fs::write(
        &cfg,
        r#"{"schema_version": 1, "experiment": "approx-error", "seeds": [3, 1, 2], "d_x": [2, 6], "d_lambda": [3, 6]}"#,
    )
    .unwrap();
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.join(run);
        let o = fjv(&["experiment", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        outputs.push(fs::read(out.join("approx_error.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs[0].clone()).unwrap();
    let header = text.lines().next().unwrap();
    for col in ["seed", "d_x", "d_lambda", "engine"] {
        assert!(header.split(',').any(|c| c == col), "{header}");
    }
    assert_eq!(text.lines().count(), 1 + 3 * 2 * 2 * 2);
}

#[test]
fn interpolation_endpoints() {
    let dir = scratch("interp");
    let cfg = dir.join("exp.json");
    fs::write(
        &cfg,
        r#"{"schema_version": 1, "experiment": "interpolation", "seeds": [0, 1], "alpha": [0, 0.5, 1]}"#,
    )
    .unwrap();
    let o = fjv(&["experiment", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.join("interpolation.csv")).unwrap();
    let rows: Vec<fj_harness::experiments::interpolation::InterpolationRow> =
        rdr.deserialize().collect::<Result<_, _>>().unwrap();
    assert!(rows.iter().filter(|r| r.alpha == 1.0).all(|r| r.hamming == 0.0));
    assert!(rows.iter().any(|r| r.alpha == 0.0));
}
