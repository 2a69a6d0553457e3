//! Helpers for driving the `reltrack` binary from tests.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn reltrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reltrack"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("failed to launch reltrack")
}

/// Runs the binary and panics with its stderr unless it exits 0.
pub fn reltrack_ok(args: &[&str]) -> Output {
    let out = reltrack(args);
    assert!(
        out.status.success(),
        "reltrack {args:?} failed ({}):\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// Small, fast scenario used by the CLI tests.
pub const SMALL_SPEC: &str = "\
name = tiny
n_targets = 3
length = 12
fps = 30
width = 128
height = 128
motion = linear
speed_range = 1,2
size_range = 20,28
n_classes = 2
seed = 4
";

pub fn write_spec(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.txt");
    std::fs::write(&p, text).unwrap();
    p
}

/// Every file under `root`, keyed by relative path.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
