use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use ibc_cli::{parse_config, CliError, Overrides};

fn repo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper_example.toml")
}

const SMALL: &str = r#"
seed = 7
[grid]
n_t = 60
n_x = 61
obstacles = [{ time = 1.0, x_lo = -2.0, x_hi = -1.0 }]
[optimizer]
k_backstep = 100
k_forward = 2000
k_cost = 2000
max_iters = 3
[density]
sample_paths = 10
[verify]
refinement_pairs = 2
fk_k_backstep = 200
fk_k_full_horizon = 2000
fk_probes = 3
identity_k_backstep = 200
identity_k_ensemble = 2000
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path
}

fn ibc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ibc"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn shipped_config_loads_example_constants() {
    let c = ibc_cli::load_config(&repo_config(), &Overrides::default()).unwrap();
    assert_eq!(
        (c.model.alpha, c.model.kappa, c.model.zeta),
        (0.5, 3.0, 0.1)
    );
    assert_eq!(c.grid.t_final, 3.0);
    assert_eq!(c.cost.r, 2e-4);
    assert!((c.cost.q_f - 4.0 / 9.0).abs() < 1e-15);
    assert_eq!(c.cost.xi, 7.0);
    assert_eq!(c.seed, 42);
    let grid = c.grid().unwrap();
    assert_eq!(grid.obstacles().len(), 2);
}

#[test]
fn missing_seed_names_the_key() {
    match parse_config("[grid]\nn_t = 300\n", &Overrides::default()) {
        Err(CliError::Validation { key, .. }) => assert_eq!(key, "seed"),
        other => panic!("{other:?}"),
    }
    // a seed given on the command line fills the gap
    let c = parse_config(
        "",
        &Overrides {
            seed: Some(3),
            ..Overrides::default()
        },
    )
    .unwrap();
    assert_eq!(c.seed, 3);
}

#[test]
fn coarse_time_grid_trips_the_rate_guard() {
    // lambda dt = 1 * 3 / 15 = 0.2
    match parse_config("seed = 1\n[grid]\nn_t = 15\n", &Overrides::default()) {
        Err(e @ CliError::Validation { .. }) => {
            let msg = e.to_string();
            assert!(msg.contains("grid.n_t"), "{msg}");
            assert!(msg.contains("zero-one law"), "{msg}");
            assert!(msg.contains("0.2"), "{msg}");
        }
        other => panic!("{other:?}"),
    }
    assert!(parse_config("seed = 1\n[grid]\nn_t = 30\n", &Overrides::default()).is_ok());
}

#[test]
fn malformed_and_unknown_keys_are_parse_errors() {
    assert!(matches!(
        parse_config("seed = ", &Overrides::default()),
        Err(CliError::Parse { .. })
    ));
    assert!(matches!(
        parse_config("seed = 1\ncolour = 3\n", &Overrides::default()),
        Err(CliError::Parse { .. })
    ));
    assert!(matches!(
        parse_config("seed = 1\n[grid]\nnx = 3\n", &Overrides::default()),
        Err(CliError::Parse { .. })
    ));
}

#[test]
fn out_of_range_values_name_their_key() {
    let cases = [
        ("seed = 1\n[init]\nvariance = -1.0\n", "init.variance"),
        ("seed = 1\n[grid]\nx_max = -4.0\n", "grid.x_max"),
        (
            "seed = 1\n[optimizer]\nschedule_kind = \"bang\"\n",
            "optimizer.schedule_kind",
        ),
        (
            "seed = 1\n[verify]\nrefinement_levels = [121, 61]\n",
            "verify.refinement_levels",
        ),
        (
            "seed = 1\n[grid]\nobstacles = [{ time = 9.0, x_lo = 0.0, x_hi = 1.0 }]\n",
            "grid.obstacles[0].time",
        ),
    ];
    for (text, want) in cases {
        match parse_config(text, &Overrides::default()) {
            Err(CliError::Validation { key, .. }) => assert_eq!(key, want),
            other => panic!("{want}: {other:?}"),
        }
    }
}

#[test]
fn resolved_config_round_trips_with_the_same_hash() {
    let c = parse_config(SMALL, &Overrides::default()).unwrap();
    let again = parse_config(&c.resolved_toml(), &Overrides::default()).unwrap();
    assert_eq!(c, again);
    assert_eq!(c.hash(), again.hash());
    let reseeded = parse_config(
        SMALL,
        &Overrides {
            seed: Some(8),
            ..Overrides::default()
        },
    )
    .unwrap();
    assert_ne!(c.hash(), reseeded.hash());
}

#[test]
fn identical_configs_give_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for (dir, threads) in dirs.iter().zip(["1", "0"]) {
        let out = ibc(&[
            "run",
            config.to_str().unwrap(),
            "--output-dir",
            dir.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for name in ibc_cli::runner::RUN_CSVS {
        let a = fs::read(dirs[0].join(name)).unwrap();
        let b = fs::read(dirs[1].join(name)).unwrap();
        assert!(a == b, "{name} differs");
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("# seed=7 config_sha256="), "{name}");
        assert!(!text.contains('\r'));
    }
    for plot in [
        "costate_surface",
        "trajectories",
        "cost_vs_iteration",
        "cost_comparison",
    ] {
        assert!(
            dirs[0].join(format!("plots/{plot}.svg")).is_file(),
            "{plot}"
        );
    }
    let paths = fs::read_to_string(dirs[0].join("trajectories_sample.csv")).unwrap();
    let last = paths.lines().last().unwrap();
    assert!(last.starts_with("9,"), "{last}");
}

#[test]
fn verify_only_writes_just_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("v");
    let out = ibc(&[
        "run",
        config.to_str().unwrap(),
        "--verify-only",
        "--output-dir",
        dir.to_str().unwrap(),
    ]);
    assert!(
        matches!(out.status.code(), Some(0) | Some(2)),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.join("verify_report.json").is_file());
    assert!(!dir.join("plots").exists());
    assert!(!dir.join("final_schedule.csv").exists());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("verify_report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 7);
    assert!(report["adjointness"]["min_order"].as_f64().unwrap() > 1.8);
    assert_eq!(
        report["value_identity"]["entries"]
            .as_array()
            .unwrap()
            .len(),
        2
    );
}

#[test]
fn exit_codes_follow_the_outcome() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = ibc(&["run", tmp.path().join("nope.toml").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));

    let bad = write_config(tmp.path(), "[grid]\nn_t = 300\n");
    let out = ibc(&["run", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`seed`"));

    // a loose tolerance is met at the first iterate
    let easy = write_config(
        tmp.path(),
        &format!("{SMALL}\n").replace("max_iters = 3", "max_iters = 3\ntolerance = 100.0"),
    );
    let text = fs::read_to_string(&easy)
        .unwrap()
        .replace("[verify]", "[verify]\nenabled = false");
    fs::write(&easy, text).unwrap();
    let dir = tmp.path().join("easy");
    let out = ibc(&[
        "run",
        easy.to_str().unwrap(),
        "--output-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(!dir.join("verify_report.json").exists());
}

#[test]
fn compare_reports_both_kinds_under_one_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("cmp");
    let out = ibc(&[
        "compare",
        config.to_str().unwrap(),
        "--kinds",
        "feedforward,state_linear",
        "--output-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.join("cost_comparison.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("feedforward,"));
    assert!(rows[1].starts_with("state_linear,"));
    assert!(dir.join("plots/cost_comparison.svg").is_file());
}

#[test]
fn output_location_does_not_enter_the_hash() {
    let a = parse_config(
        SMALL,
        &Overrides {
            output_dir: Some("x".into()),
            ..Overrides::default()
        },
    )
    .unwrap();
    let b = parse_config(
        SMALL,
        &Overrides {
            output_dir: Some("y".into()),
            ..Overrides::default()
        },
    )
    .unwrap();
    assert_eq!(a.hash(), b.hash());
}
