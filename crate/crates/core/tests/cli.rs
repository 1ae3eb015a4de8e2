use std::process::Command;

use mla_core::trace::{check_well_formed, read_jsonl};

fn bench() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mla-bench"));
    c.env_remove("MLA_THREADS");
    c
}

fn stdout_lines(args: &[&str]) -> Vec<String> {
    let out = bench().args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn single_run_with_check() {
    let lines = stdout_lines(&["--algo", "lu_mb", "--n", "300", "--b-outer", "64", "--b-inner", "16", "--threads", "3", "--check"]);
    assert_eq!(lines[0], mla_core::bench::CSV_HEADER);
    assert_eq!(lines.len(), 2);
    let f: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(f.len(), 11);
    assert_eq!(&f[..7], &["lu_mb", "300", "64", "16", "3", "1", "1"]);
    let res: f64 = f[9].parse().unwrap();
    assert!(res <= 300.0 * 100.0 * f64::EPSILON);
}

#[test]
fn sweep_b_emits_one_row_per_block_size() {
    let lines = stdout_lines(&["--sweep-b", "32:512:32", "--n", "400", "--algo", "lu_mb", "--threads", "2"]);
    assert_eq!(lines.len(), 17);
    let bs: Vec<usize> = lines[1..].iter().map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(bs, (1..=16).map(|i| 32 * i).collect::<Vec<_>>());
}

#[test]
fn sweep_n_and_trace_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    let lines = stdout_lines(&[
        "--sweep-n", "100:300:100", "--algo", "lu_et", "--b-outer", "64", "--b-inner", "16", "--threads", "3",
        "--trace", path.to_str().unwrap(),
    ]);
    assert_eq!(lines.len(), 4);
    let ev = read_jsonl(std::io::BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert!(!ev.is_empty());
    check_well_formed(&ev).unwrap();
}

#[test]
fn gepp_mode() {
    let lines = stdout_lines(&["--gepp", "--n", "200", "--threads", "1"]);
    assert_eq!(lines[0], mla_core::bench::GEPP_HEADER);
    assert!(lines.len() > 2);
}

#[test]
fn bad_arguments_fail() {
    let out = bench().args(["--algo", "lu_qr"]).output().unwrap();
    assert!(!out.status.success());
    let out = bench().args(["--algo", "lu_la", "--n", "100", "--threads", "2", "--t-pf", "2"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bench().args(["--b-outer", "0", "--n", "64"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn inner_block_is_capped_by_outer_block() {
    let lines = stdout_lines(&["--b-outer", "16", "--b-inner", "32", "--n", "64", "--threads", "1"]);
    assert_eq!(lines[1].split(',').nth(3), Some("16"));
}
