use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pdmp(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pdmp"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("PDMP_THREADS", t),
        None => cmd.env_remove("PDMP_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn decay_writes_csv_and_fit() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d");
    let o = pdmp(
        &[
            "decay",
            "--replicas",
            "3000",
            "--seed",
            "5",
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("decay.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,tv,se"));
    assert_eq!(lines.count(), 15);
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fit.json")).unwrap()).unwrap();
    for key in ["lambda_hat", "K_hat", "r2"] {
        assert!(fit[key].is_f64(), "missing {key}");
    }
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    let summary: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(summary["experiment"], "decay");
}

#[test]
fn same_seed_gives_identical_files_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for (name, threads) in [("a", Some("1")), ("b", Some("4")), ("c", None)] {
        let out = dir.path().join(name);
        let o = pdmp(
            &[
                "couple",
                "--replicas",
                "500",
                "--seed",
                "9",
                "--out",
                out.to_str().unwrap(),
            ],
            threads,
        );
        assert!(o.status.success());
        let stdout = String::from_utf8(o.stdout)
            .unwrap()
            .replace(out.to_str().unwrap(), "OUT");
        runs.push((read_dir_sorted(&out), stdout));
    }
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn toml_and_json_configs_agree() {
    let dir = tempfile::tempdir().unwrap();
    let toml_path = dir.path().join("c.toml");
    let json_path = dir.path().join("c.json");
    fs::write(
        &toml_path,
        r#"
seed = 3
[rates]
a = { family = "constant", level = 1.0 }
b = { family = "constant", level = 3.0 }
[simulate]
start = { position = 0.5, velocity = "-1" }
horizon = 4.0
replicas = 200
"#,
    )
    .unwrap();
    fs::write(
        &json_path,
        r#"{"seed": 3, "rates": {"a": {"family": "constant", "level": 1.0}, "b": {"family": "constant", "level": 3.0}},
            "simulate": {"start": {"position": 0.5, "velocity": "-1"}, "horizon": 4.0, "replicas": 200}}"#,
    )
    .unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(pdmp(
        &[
            "simulate",
            "--config",
            toml_path.to_str().unwrap(),
            "--out",
            a.to_str().unwrap()
        ],
        None
    )
    .status
    .success());
    assert!(pdmp(
        &[
            "simulate",
            "--config",
            json_path.to_str().unwrap(),
            "--out",
            b.to_str().unwrap()
        ],
        None
    )
    .status
    .success());
    assert_eq!(read_dir_sorted(&a), read_dir_sorted(&b));
    let finals = fs::read_to_string(a.join("final_states.csv")).unwrap();
    assert_eq!(finals.lines().count(), 201);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "seed = 1\nunknown_key = 2\n").unwrap();
    let o = pdmp(
        &[
            "simulate",
            "--config",
            bad.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(2));

    // b below a away from the origin
    let inadmissible = dir.path().join("inadmissible.toml");
    fs::write(&inadmissible, "[rates]\na = { family = \"constant\", level = 2.0 }\nb = { family = \"constant\", level = 1.0 }\n").unwrap();
    let o = pdmp(
        &[
            "simulate",
            "--config",
            inadmissible.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&o.stderr).is_empty());

    let o = pdmp(
        &[
            "simulate",
            "--config",
            dir.path().join("missing.toml").to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(2));

    let o = pdmp(
        &[
            "simulate",
            "--replicas",
            "10",
            "--out",
            out.to_str().unwrap(),
        ],
        Some("zero"),
    );
    assert_eq!(o.status.code(), Some(2));

    let o = pdmp(&["nonsense"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn guard_trip_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("guard.toml");
    fs::write(
        &cfg,
        "[simulate]\nhorizon = 100.0\nevent_guard = 5\nreplicas = 4\n",
    )
    .unwrap();
    let o = pdmp(
        &[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(o.status.code(), Some(3));
}
