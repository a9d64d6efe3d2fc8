use std::path::Path;
use std::process::{Command, Output};

use rtrakf_core::sim::CSV_COLUMNS;

fn rtrakf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtrakf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn run_writes_the_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rtr.csv");
    let res = rtrakf(&["run", "--method", "rtr", "--steps", "40", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", stderr(&res));
    let text = read(&out);
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    let rows: Vec<_> = lines.collect();
    // One row per step from k = m + P + 1 = 7.
    assert_eq!(rows.len(), 40 - 7);
    let first: Vec<_> = rows[0].split(',').collect();
    assert_eq!(first.len(), 12);
    assert_eq!(first[0], "7");
    // 12 significant digits in scientific notation.
    let mantissa = first[1].split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.replace('.', "").len(), 12);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let res = rtrakf(&["run", "--steps", "30", "--seed", "5", "--out", path.to_str().unwrap()]);
        assert!(res.status.success(), "{}", stderr(&res));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn several_seeds_give_one_file_each() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run_{seed}.csv");
    let res = rtrakf(&["run", "--method", "rls", "--steps", "30", "--seeds", "1,2", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", stderr(&res));
    let one = read(&dir.path().join("run_1.csv"));
    let two = read(&dir.path().join("run_2.csv"));
    assert_ne!(one, two);
}

#[test]
fn command_line_overrides_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    let from_file = dir.path().join("file.csv");
    let from_flag = dir.path().join("flag.csv");
    std::fs::write(
        &cfg,
        format!("# test config\nmethod = rls\nsteps = 25\nseed = 4\nout = {}\n", from_file.display()),
    )
    .unwrap();
    let res = rtrakf(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert_eq!(read(&from_file).lines().count(), 1 + 25 - 7);

    let res = rtrakf(&["run", "--config", cfg.to_str().unwrap(), "--steps", "30", "--out", from_flag.to_str().unwrap()]);
    assert!(res.status.success(), "{}", stderr(&res));
    assert_eq!(read(&from_flag).lines().count(), 1 + 30 - 7);
}

#[test]
fn bad_input_gives_a_machine_readable_error() {
    let res = rtrakf(&["run", "--method", "newton", "--steps", "20"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).lines().any(|l| l.starts_with("error kind=config ")), "{}", stderr(&res));

    let res = rtrakf(&["run", "--steps", "20", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).lines().any(|l| l.starts_with("error kind=io ")), "{}", stderr(&res));

    let res = rtrakf(&["run", "--steps", "7"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("error kind=config"));
}

#[test]
fn check_passes_on_the_benchmark_system() {
    let res = rtrakf(&["check", "--steps", "200"]);
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(res.status.success(), "{stdout}\n{}", stderr(&res));
    assert!(stdout.lines().all(|l| l.starts_with("check ") && l.contains(" ok ")), "{stdout}");
    assert!(stdout.contains("check spd_run ok"));
}
