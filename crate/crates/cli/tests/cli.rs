// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const ABC_CSV: &str =
    "w,h,cx,cy,score\n100,100,54.1,50,0.9\n100,100,79.1,50,0.8\n100,100,96.1,50,0.7\n";

fn boxhash(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boxhash"))
        .args(args)
        .env_remove("BOXHASH_THREADS")
        .output()
        .expect("running boxhash")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, content: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, content).unwrap();
    p
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn kept(o: &Output) -> Vec<u64> {
    assert!(
        o.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: Value = serde_json::from_str(&stdout(o)).unwrap();
    v["kept"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .collect()
}

#[test]
fn bound_command() {
    let o = boxhash(&["bound", "--alpha", "0.73"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0.501542");
    assert!(stdout(&o).starts_with("0.5015"));

    let o = boxhash(&["bound", "--alpha", "0.25"]);
    assert_eq!(stdout(&o).trim(), "0");

    let o = boxhash(&["bound", "--alpha", "1.5"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
}

#[test]
fn suppress_shifted_squares() {
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "abc.csv", ABC_CSV);
    let nms = boxhash(&[
        "suppress",
        "--input",
        path(&file),
        "--algo",
        "nms",
        "--threshold",
        "0.5015",
    ]);
    assert_eq!(kept(&nms), vec![0, 2]);
    let hnms = boxhash(&[
        "suppress",
        "--input",
        path(&file),
        "--algo",
        "hnms",
        "--alpha",
        "0.73",
    ]);
    assert_eq!(kept(&hnms), vec![0, 1]);

    let json = write(
        &dir,
        "abc.json",
        r#"[{"w":100,"h":100,"cx":54.1,"cy":50,"score":0.9},
            {"w":100,"h":100,"cx":79.1,"cy":50,"score":0.8},
            {"w":100,"h":100,"cx":96.1,"cy":50,"score":0.7}]"#,
    );
    let hnms = boxhash(&[
        "suppress",
        "--input",
        path(&json),
        "--algo",
        "hnms",
        "--alpha",
        "0.73",
    ]);
    assert_eq!(kept(&hnms), vec![0, 1]);
}

#[test]
fn suppress_writes_output_file_with_timings() {
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "abc.csv", ABC_CSV);
    let out = dir.path().join("out.json");
    let o = boxhash(&[
        "suppress",
        "--input",
        path(&file),
        "--algo",
        "pipeline",
        "--alpha",
        "0.73",
        "--stage2",
        "soft",
        "--decay",
        "linear",
        "--output",
        path(&out),
    ]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["kept"], serde_json::json!([0, 1]));
    let rescored = v["rescored"].as_array().unwrap();
    assert_eq!(rescored.len(), 3);
    assert!((rescored[1].as_f64().unwrap() - 0.32).abs() < 1e-12);
    for key in ["prefilter", "stage2", "total"] {
        assert!(v["timings_ms"][key].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn suppress_empty_and_malformed() {
    let dir = TempDir::new().unwrap();
    let empty = write(&dir, "empty.csv", "");
    assert!(kept(&boxhash(&[
        "suppress",
        "--input",
        path(&empty),
        "--algo",
        "nms"
    ]))
    .is_empty());

    let bad = write(
        &dir,
        "bad.csv",
        "w,h,cx,cy,score\n1,1,0,0,0.5\n1,1,zero,0,0.5\n",
    );
    let o = boxhash(&["suppress", "--input", path(&bad), "--algo", "nms"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn hash_command() {
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "b.csv", "w,h,cx,cy\n100,100,79.1,50\n1,1,0,0\n");
    let o = boxhash(&["hash", "--input", path(&file), "--alpha", "0.73"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "15 15 5 3\n0 0 0 0\n");

    let bad = write(&dir, "bad.csv", "w,h,cx,cy\n1,1,0,0\n0,1,0,0\n");
    let o = boxhash(&["hash", "--input", path(&bad), "--alpha", "0.73"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 1"));
}

#[test]
fn version_reports_schema() {
    let o = boxhash(&["--version"]);
    assert!(stdout(&o).contains("schema 1"));
}

fn bench_rows(out: &Output) -> Vec<Vec<String>> {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        [
            "algorithm",
            "n_boxes",
            "mean_ms",
            "std_ms",
            "kept_count",
            "jaccard_vs_nms_oracle"
        ]
    );
    reader
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

#[test]
fn bench_command() {
    let args = [
        "bench",
        "--truths",
        "100",
        "--per-truth",
        "90",
        "--algo",
        "nms,hnms",
        "--alpha",
        "0.7",
        "--repeat",
        "5",
        "--seed",
        "4",
    ];
    let first = bench_rows(&boxhash(&args));
    let second = bench_rows(&boxhash(&args));
    assert_eq!(first.len(), 2);
    assert_eq!(first[0][0], "nms");
    assert_eq!(first[0][1], "9000");
    assert_eq!(first[0][5].parse::<f64>().unwrap(), 1.0);
    assert_eq!(first[0][4], second[0][4]);
    assert_eq!(first[1][4], second[1][4]);
    let mean = |row: &Vec<String>| row[2].parse::<f64>().unwrap();
    assert!(
        mean(&first[1]) < mean(&first[0]),
        "hnms {} vs nms {}",
        mean(&first[1]),
        mean(&first[0])
    );
}

#[test]
fn bench_spec_file_and_outputs() {
    let dir = TempDir::new().unwrap();
    let spec = write(
        &dir,
        "scene.json",
        r#"{"ground_truth_count": 10, "proposals_per_truth": 5, "image_w": 300, "image_h": 300, "seed": 9}"#,
    );
    let csv = dir.path().join("r.csv");
    let json = dir.path().join("r.json");
    let o = boxhash(&[
        "bench",
        "--spec",
        path(&spec),
        "--algo",
        "nms,soft,multi,pipeline",
        "--k",
        "2",
        "--repeat",
        "3",
        "--csv",
        path(&csv),
        "--json",
        path(&json),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 5);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["reports"].as_array().unwrap().len(), 4);
    assert_eq!(v["reports"][0]["n_boxes"], 50);

    let o = boxhash(&[
        "bench",
        "--algo",
        "maxpool",
        "--truths",
        "2",
        "--per-truth",
        "2",
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("maxpool"));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("w,h,cx,cy,score\n");
    for k in 0..3000u32 {
        let f = k as f64;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            10.0 + (f * 0.37) % 30.0,
            12.0 + (f * 0.53) % 25.0,
            (f * 7.3) % 900.0,
            (f * 3.1) % 700.0,
            ((k * 7919) % 1000) as f64 / 1000.0
        ));
    }
    let file = write(&dir, "many.csv", &csv);
    let single = boxhash(&["suppress", "--input", path(&file), "--algo", "hnms"]);
    let multi = Command::new(env!("CARGO_BIN_EXE_boxhash"))
        .args(["suppress", "--input", path(&file), "--algo", "hnms"])
        .env("BOXHASH_THREADS", "4")
        .output()
        .unwrap();
    assert_eq!(kept(&single), kept(&multi));
}
