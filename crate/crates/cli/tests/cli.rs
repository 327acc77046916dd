use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trace-engine"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: [&str; 4] = ["--pmax", "60", "--p2max", "60"];

fn with(cmd: &str, extra: &[&str]) -> Vec<String> {
    let mut v = vec![cmd.to_string()];
    v.extend(SMALL.iter().map(|s| s.to_string()));
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

fn run_s(args: &[String], out: &Path) -> Output {
    let a: Vec<&str> = args.iter().map(String::as_str).collect();
    run(&a, out)
}

#[test]
fn count_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_s(&with("count", &[]), dir.path());
    assert_eq!(code(&first), 0, "{}", stderr(&first));
    let table = fs::read(dir.path().join("trace_table.csv")).unwrap();
    let second = run_s(&with("count", &[]), dir.path());
    assert_eq!(code(&second), 0);
    assert!(String::from_utf8_lossy(&second.stdout).contains("nothing to do"));
    assert_eq!(fs::read(dir.path().join("trace_table.csv")).unwrap(), table);
    let text = String::from_utf8(table).unwrap();
    assert!(text.starts_with("schema_version,z,p,split,S1,Sphi,S2,has_S2,verified,cands\n"));
    assert!(text.contains("\n1,2,37,s,"));
}

#[test]
fn stage_order_is_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_s(&with("extract", &[]), dir.path());
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("`count`"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["count", "--bogus", "1"], dir.path())), 2);
    assert_eq!(code(&run(&["count", "--z", "0"], dir.path())), 2);
    assert_eq!(code(&run(&["count", "--pmax", "ten"], dir.path())), 2);
    assert_eq!(
        code(&run(
            &["count", "--pmax", "50", "--p2max", "60"],
            dir.path()
        )),
        2
    );
    assert_eq!(code(&run(&["frobnicate"], dir.path())), 2);
}

#[test]
fn damaged_tables_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_s(&with("count", &[]), dir.path())), 0);
    let path = dir.path().join("trace_table.csv");
    let good = fs::read_to_string(&path).unwrap();

    fs::write(&path, good.replacen("\n1,2,5,", "\n1,2,5x,", 1)).unwrap();
    let o = run_s(&with("extract", &[]), dir.path());
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("line 3, column 3"), "{}", stderr(&o));

    fs::write(&path, good.replacen("\n1,2,5,", "\n9,2,5,", 1)).unwrap();
    assert_eq!(code(&run_s(&with("extract", &[]), dir.path())), 4);

    fs::write(&path, &good).unwrap();
    assert_eq!(code(&run_s(&with("extract", &[]), dir.path())), 0);
}

#[test]
fn impossible_bounds_are_a_computation_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        code(&run_s(
            &with("count", &["--rmax", "0", "--cmax", "0"]),
            dir.path()
        )),
        0
    );
    let o = run_s(
        &with("extract", &["--rmax", "0", "--cmax", "0"]),
        dir.path(),
    );
    assert_eq!(code(&o), 5, "{}", stderr(&o));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# small run\nz = 2\npmax = 30\np2max = 30\n").unwrap();
    let out = dir.path().join("out");
    let o = run(
        &["count", "--config", conf.to_str().unwrap(), "--pmax", "40"],
        &out,
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = fs::read_to_string(out.join("trace_table.csv")).unwrap();
    assert!(table.contains("\n1,2,37,"));

    // a different configuration cannot reuse the directory
    let o = run(&["count", "--config", conf.to_str().unwrap()], &out);
    assert_eq!(code(&o), 3);
}

#[test]
fn interrupted_count_resumes_to_the_same_table() {
    let full = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_s(&with("count", &[]), full.path())), 0);
    let want = fs::read_to_string(full.path().join("trace_table.csv")).unwrap();

    // state left behind by a run stopped after its first rows
    let cut = tempfile::tempdir().unwrap();
    let stages = cut.path().join(".stages");
    fs::create_dir_all(&stages).unwrap();
    let fingerprint = fs::read_to_string(full.path().join(".stages/count.done")).unwrap();
    fs::write(stages.join("count.partial"), fingerprint).unwrap();
    let partial: String = want.lines().take(4).map(|l| format!("{l}\n")).collect();
    fs::write(cut.path().join("trace_table.csv"), partial).unwrap();

    assert_eq!(code(&run_s(&with("count", &[]), cut.path())), 0);
    assert_eq!(
        fs::read_to_string(cut.path().join("trace_table.csv")).unwrap(),
        want
    );
    assert!(!stages.join("count.partial").exists());
}

#[test]
fn report_runs_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_s(&with("report", &["--workers", "2"]), dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for name in [
        "summary.txt",
        "census.csv",
        "law.txt",
        "lfunction.csv",
        "hist_angle.svg",
        "moments.csv",
    ] {
        assert!(dir.path().join("report").join(name).exists(), "{name}");
    }
    let summary = fs::read_to_string(dir.path().join("report/summary.txt")).unwrap();
    assert!(!summary.contains("workers"));
    for stage in ["verify", "census", "probe", "lfunction"] {
        let o = run_s(&with(stage, &[]), dir.path());
        assert!(
            String::from_utf8_lossy(&o.stdout).contains("nothing to do"),
            "{stage}"
        );
    }
}
