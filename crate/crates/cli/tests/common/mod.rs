#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Run {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.stdout).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", self.stdout))
    }
}

pub fn run<I, S>(args: I) -> Run
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = Command::new(env!("CARGO_BIN_EXE_childadapt"))
        .args(args)
        .env_remove("ANNOTATE_URL")
        .env_remove("REDCN_CONFIG")
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Bundled data shipped with the library crate.
pub fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/data")
        .join(name)
        .display()
        .to_string()
}

pub fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

pub fn sources() -> Vec<String> {
    vec![
        "--profiles".into(),
        data("fixture_profiles.json"),
        "--triplets".into(),
        data("fixture_triplets.json"),
    ]
}

pub fn read(p: impl Into<PathBuf>) -> Vec<u8> {
    let p = p.into();
    std::fs::read(&p).unwrap_or_else(|e| panic!("reading {}: {e}", p.display()))
}
