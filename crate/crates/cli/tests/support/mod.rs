#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

pub fn bridge_endpoint() -> String {
    shlex::try_join([
        env!("CARGO_BIN_EXE_defaug-mock-bridge"),
        "--script",
        fixture("oracle_script.json").to_str().unwrap(),
    ])
    .unwrap()
}

/// Scratch directory holding copies of the fixture dumps, so index
/// sidecars never land in the source tree.
pub struct Workspace {
    pub dir: TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        for name in ["simple_wiktionary.xml", "english_wiktionary.xml"] {
            fs::copy(fixture(name), dir.path().join(name)).unwrap();
        }
        Self { dir }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn simple(&self) -> PathBuf {
        self.path("simple_wiktionary.xml")
    }

    pub fn english(&self) -> PathBuf {
        self.path("english_wiktionary.xml")
    }

    pub fn build(&self, out: &str, seed: u64, extra: &[&str]) -> Output {
        let mut args = vec![
            "build".to_string(),
            "--train".into(),
            fixture("nli_train.jsonl").display().to_string(),
            "--test".into(),
            fixture("nli_test.jsonl").display().to_string(),
            "--simple-english".into(),
            self.simple().display().to_string(),
            "--english".into(),
            self.english().display().to_string(),
            "--seed".into(),
            seed.to_string(),
            "--output-dir".into(),
            self.path(out).display().to_string(),
        ];
        args.extend(extra.iter().map(|s| s.to_string()));
        defaug(&args)
    }
}

pub fn defaug<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    defaug_with_oracle(args, &bridge_endpoint())
}

pub fn defaug_with_oracle<S: AsRef<std::ffi::OsStr>>(args: &[S], endpoint: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_defaug"))
        .args(args)
        .env("DEFAUG_ORACLE_ENDPOINT", endpoint)
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

pub fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

/// File name → contents for every file in `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

pub fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}
