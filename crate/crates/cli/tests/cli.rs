use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dagsched(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dagsched"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn version_lists_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let o = dagsched(&["--version"], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("dag schema 1"));
}

#[test]
fn build_two_chain_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    assert!(
        dagsched(&["gen", "two-chain", "--out", "fig.json"], dir.path())
            .status
            .success()
    );
    let o = dagsched(
        &["build", "fig.json", "--machines", "1", "--dump-division"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let ratio: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("ratio\t"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(ratio <= 1.05, "{ratio}");
    assert!(text.contains("\"troublesome\""));
    let placements: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fig.placements.json")).unwrap())
            .unwrap();
    assert_eq!(placements["placements"].as_array().unwrap().len(), 5);
}

#[test]
fn invalid_dag_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.json"),
        "{\"schema_version\": 1, \"id\": 3}",
    )
    .unwrap();
    let o = dagsched(&["build", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}

#[test]
fn bounds_on_empty_and_example_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let o = dagsched(&["bounds", "."], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 1);

    assert!(
        dagsched(&["gen", "bound-example", "--out", "lb.json"], dir.path())
            .status
            .success()
    );
    let o = dagsched(&["bounds", "."], dir.path());
    let mut rows = csv::Reader::from_reader(o.stdout.as_slice());
    let headers = rows.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "new_lb").unwrap();
    let row = rows.records().next().unwrap().unwrap();
    let lb: f64 = row[col].parse().unwrap();
    assert!((lb - 6.8).abs() < 1e-9);
}

#[test]
fn bounds_skips_unreadable_files() {
    let dir = tempfile::tempdir().unwrap();
    assert!(dagsched(
        &["gen", "random", "--count", "20", "--out", "corpus"],
        dir.path()
    )
    .status
    .success());
    fs::write(dir.path().join("corpus/broken.json"), "not json").unwrap();
    let o = dagsched(&["bounds", "corpus"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let mut rows = csv::Reader::from_reader(o.stdout.as_slice());
    let mut n = 0;
    for r in rows.deserialize::<std::collections::HashMap<String, String>>() {
        let r = r.unwrap();
        let get = |k: &str| r[k].parse::<f64>().unwrap();
        assert!(get("new_lb") + 1e-9 >= get("cp_len").max(get("t_work")));
        n += 1;
    }
    assert_eq!(n, 20);
}

#[test]
fn sim_compares_schedulers_on_one_workload() {
    let dir = tempfile::tempdir().unwrap();
    let o = dagsched(
        &[
            "sim",
            "--jobs",
            "8",
            "--machines",
            "3",
            "--scheduler",
            "graphene,tetris",
            "--seed",
            "7",
            "--out",
            "m.csv",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("p50"));
    let mut rows = csv::Reader::from_path(dir.path().join("m.csv")).unwrap();
    let mut jobs: std::collections::BTreeMap<String, Vec<String>> = Default::default();
    for r in rows.records() {
        let r = r.unwrap();
        if &r[0] == "job" {
            jobs.entry(r[1].to_string())
                .or_default()
                .push(r[3].to_string());
        }
    }
    assert_eq!(jobs.len(), 2);
    assert_eq!(jobs["graphene"], jobs["tetris"]);
}

#[test]
fn unknown_scheduler_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = dagsched(&["sim", "--scheduler", "fifo"], dir.path());
    assert!(!o.status.success());
}
