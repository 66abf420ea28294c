use std::path::Path;
use std::process::{Command, Output};

fn ergokit(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ergokit"));
    cmd.args(args).env_remove("ERGOKIT_THREADS");
    if let Some(t) = threads {
        cmd.env("ERGOKIT_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_unknown(out: &Path) -> Vec<String> {
    ["unknown", "--kappa", "0:7:3", "--ensemble", "6", "--seed", "11", "--out", out.to_str().unwrap()]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn run_owned(args: &[String], threads: Option<&str>) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    ergokit(&refs, threads)
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

#[test]
fn happy_path_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("known.csv");
    let o = ergokit(&["known", "--kappa", "0:7:3", "--ensemble", "5", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["param", "S_lin_mean", "S_lin_se", "W_mean", "W_se", "dW_mean", "dW_se"]);
    assert_eq!(rows.len(), 3);
    assert!(text.lines().any(|l| l.starts_with("# dims:")));
    for row in &rows {
        for cell in row {
            cell.parse::<f64>().unwrap();
        }
    }
}

#[test]
fn indivisible_coarse_n_is_rejected() {
    let o = ergokit(&["unknown", "--kappa", "1", "--ensemble", "2", "--coarse-n", "3"], None);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("coarse_n"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_gives_one_line() {
    let o = ergokit(&["known", "--bogus", "1"], None);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("--bogus"));
}

#[test]
fn bad_grid_and_threads_are_rejected() {
    let o = ergokit(&["known", "--kappa", "0:7"], None);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("kappa"), "{}", stderr(&o));
    let o = ergokit(&["known", "--kappa", "1", "--ensemble", "1"], Some("zero"));
    assert!(!o.status.success());
    assert!(stderr(&o).contains("ERGOKIT_THREADS"));
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(run_owned(&small_unknown(&a), None).status.success());
    assert!(run_owned(&small_unknown(&b), None).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("one.csv");
    let b = dir.path().join("four.csv");
    let oa = run_owned(&small_unknown(&a), Some("1"));
    let ob = run_owned(&small_unknown(&b), Some("4"));
    assert!(oa.status.success() && ob.status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn json_and_csv_agree() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    let json = dir.path().join("r.json");
    let base = ["tripartite", "--kappa", "0:7:4", "--ensemble", "4", "--c1", "0.5", "--c2", "1", "--seed", "3"];
    for p in [&csv, &json] {
        let mut args = base.to_vec();
        args.extend(["--out", p.to_str().unwrap()]);
        let o = ergokit(&args, None);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let (header, rows) = csv_rows(&std::fs::read_to_string(&csv).unwrap());
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let records = doc["records"].as_array().unwrap();
    assert_eq!(records.len(), rows.len());
    assert_eq!(doc["metadata"]["experiment"], "tripartite");
    for (rec, row) in records.iter().zip(&rows) {
        for (col, cell) in header.iter().zip(row) {
            let from_csv: f64 = cell.parse().unwrap();
            let from_json = rec[col].as_f64().unwrap();
            assert_eq!(from_csv.to_bits(), from_json.to_bits(), "{col}");
        }
    }
}

#[test]
fn protocol_selection_blanks_other_columns() {
    let o = ergokit(&["unknown", "--kappa", "2", "--ensemble", "3", "--protocol", "1"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&String::from_utf8(o.stdout).unwrap());
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    assert!(!rows[0][col("Wrc_mean")].is_empty());
    assert!(rows[0][col("Wbar_mean")].is_empty());
}

#[test]
fn unwritable_output_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("x.csv");
    let o = ergokit(&["known", "--kappa", "1", "--ensemble", "1", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cannot write"));
}

#[test]
fn ising_spectral_runs() {
    let o = ergokit(&["spectral", "--m", "0.5:1.5:2"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&String::from_utf8(o.stdout).unwrap());
    assert_eq!(header, ["param", "r_full", "r_sector", "levels"]);
    assert_eq!(rows.len(), 2);
}
