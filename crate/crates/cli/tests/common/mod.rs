#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};
use std::time::Duration;

pub const BIN: &str = env!("CARGO_BIN_EXE_cireg");

pub fn cireg(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("CIREG_ENDPOINT")
        .env_remove("CIREG_TOKEN")
        .env_remove("CIREG_CONFIG")
        .env_remove("CIREG_DATA_DIR")
        .output()
        .expect("cireg runs")
}

pub fn local(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["--data-dir", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    cireg(&all)
}

pub fn remote(endpoint: &str, args: &[&str]) -> Output {
    let mut all = vec!["--endpoint", endpoint, "--token", "test-token"];
    all.extend_from_slice(args);
    cireg(&all)
}

pub fn fixture(rel: &str) -> String {
    cireg_testkit::fixture_path(rel).to_str().unwrap().to_string()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// A `cireg serve` child process on an ephemeral port.
pub struct Served {
    pub child: Child,
    pub endpoint: String,
    pub config: PathBuf,
}

pub fn write_config(at: &Path, data_dir: &Path, token: Option<&str>) -> PathBuf {
    let mut text = format!("bind = \"127.0.0.1:0\"\ndata_dir = {:?}\n", data_dir.to_str().unwrap());
    if let Some(t) = token {
        text.push_str(&format!("write_token = {t:?}\n"));
    }
    let path = at.join("cireg.toml");
    std::fs::write(&path, text).unwrap();
    path
}

impl Served {
    pub fn start(scratch: &Path, data_dir: &Path) -> Served {
        let config = write_config(scratch, data_dir, Some("test-token"));
        Served::with_config(config)
    }

    pub fn with_config(config: PathBuf) -> Served {
        let mut child = Command::new(BIN)
            .args(["serve", "--config", config.to_str().unwrap()])
            .env_remove("CIREG_BIND")
            .env_remove("CIREG_DATA_DIR")
            .env_remove("CIREG_WRITE_TOKEN")
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .spawn()
            .expect("serve starts");
        let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
        let endpoint = loop {
            let line = lines
                .next()
                .expect("serve exited before listening")
                .expect("stderr is UTF-8");
            if let Some(rest) = line.split("listening on ").nth(1) {
                break rest.trim().to_string();
            }
        };
        // Keep draining so request logging never blocks the server.
        std::thread::spawn(move || for _ in lines.by_ref() {});
        Served { child, endpoint, config }
    }

    pub fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    /// Sends SIGTERM and waits for a clean exit.
    pub fn terminate(mut self) -> std::process::ExitStatus {
        let pid = self.child.id().to_string();
        let sent = Command::new("kill").args(["-TERM", &pid]).status().unwrap();
        assert!(sent.success());
        for _ in 0..200 {
            if let Some(status) = self.child.try_wait().unwrap() {
                return status;
            }
            std::thread::sleep(Duration::from_millis(25));
        }
        panic!("serve did not stop after SIGTERM");
    }
}

impl Drop for Served {
    fn drop(&mut self) {
        self.kill();
    }
}

pub fn agent() -> ureq::Agent {
    ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(Duration::from_secs(60)))
        .build()
        .into()
}

/// Copies a registry directory so a second process can serve it.
pub fn copy_dir(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &target);
        } else {
            std::fs::copy(entry.path(), target).unwrap();
        }
    }
}
