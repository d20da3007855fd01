#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

pub fn rmtkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmtkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Small planted task that trains in well under a second.
pub fn small_config() -> Value {
    json!({
        "seed": 7,
        "task": {"synthetic": {
            "input_dim": 16, "intrinsic_dim": 4, "num_classes": 4,
            "samples": 1000, "noise_sigma": 1.0, "margin": 0.1
        }},
        "network": {"hidden": [32, 32]},
        "distill": {"max_epochs": 8}
    })
}

/// The planted task used for the end-to-end claims.
pub fn planted_config() -> Value {
    let text = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/planted.json"))
        .expect("shipped config");
    let mut v: Value = serde_json::from_str(&text).unwrap();
    v.as_object_mut().unwrap().remove("output_dir");
    v
}

pub fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

/// Runs a command and panics with stderr unless it exits 0.
pub fn ok(args: &[&str]) {
    let out = rmtkd(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", stderr(&out));
}

pub fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
