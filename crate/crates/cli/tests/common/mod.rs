#![allow(dead_code)]

pub mod crash;

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

pub const TIMESTAMP: &str = "2025-01-01T00:00:00Z";

pub fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

pub fn fixture(name: &str) -> PathBuf {
    workspace().join("fixtures").join(name)
}

/// The binary with a clean environment: no config file, no API override.
pub fn kitgi(dir: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_kitgi"));
    cmd.current_dir(dir)
        .env_remove("KITGI_CONFIG")
        .env_remove("KITGI_CONCEPTNET_URL")
        .env_remove("RUST_LOG");
    cmd
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    kitgi(dir).args(args).output().unwrap()
}

/// Runs and requires exit 0, returning stdout.
pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "kitgi {args:?} exited {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn code(dir: &Path, args: &[&str]) -> i32 {
    run(dir, args).status.code().unwrap()
}

/// import → fetch-knowledge (offline graph) → generate full (stub) → report.
/// Returns the stdout of every step.
pub fn stub_pipeline(dir: &Path) -> Vec<String> {
    let commongen = fixture("commongen_10.txt");
    let kg = fixture("kg");
    vec![
        ok(
            dir,
            &["-d", "ds.jsonl", "import", commongen.to_str().unwrap()],
        ),
        ok(
            dir,
            &[
                "-d",
                "ds.jsonl",
                "fetch-knowledge",
                "--fixture-dir",
                kg.to_str().unwrap(),
            ],
        ),
        ok(
            dir,
            &[
                "-d",
                "ds.jsonl",
                "generate",
                "--condition",
                "full",
                "--backend",
                "stub",
                "--timestamp",
                TIMESTAMP,
            ],
        ),
        ok(dir, &["-d", "ds.jsonl", "report", "--out-dir", "report"]),
    ]
}

/// Every file under `dir`, relative path → bytes, sorted.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .to_string_lossy()
                    .into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}

/// A `kitgi serve` child process on a free port.
pub struct ServeProcess {
    pub child: Child,
    pub base: String,
}

impl ServeProcess {
    pub fn start(dir: &Path, dataset: &Path, data_dir: &Path) -> ServeProcess {
        let mut child = kitgi(dir)
            .args([
                "-d",
                dataset.to_str().unwrap(),
                "serve",
                "--addr",
                "127.0.0.1:0",
            ])
            .args(["--data-dir", data_dir.to_str().unwrap()])
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let base = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected banner {line:?}"));
        ServeProcess {
            base: base.to_string(),
            child,
        }
    }

    /// SIGKILL: no graceful shutdown, no chance to flush anything.
    pub fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }

    pub fn terminate(mut self) -> std::process::ExitStatus {
        Command::new("kill")
            .args(["-TERM", &self.child.id().to_string()])
            .status()
            .unwrap();
        for _ in 0..100 {
            if let Some(status) = self.child.try_wait().unwrap() {
                return status;
            }
            std::thread::sleep(Duration::from_millis(50));
        }
        self.child.kill().unwrap();
        panic!("serve did not stop on SIGTERM");
    }
}

impl Drop for ServeProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
