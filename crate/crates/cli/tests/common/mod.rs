#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use delf::{App, Config};
use serde_json::Value;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// Copies a fixture so that tests never contend for its transcript lock.
pub fn private_copy(name: &str, into: &Path) -> PathBuf {
    let dst = into.join(name);
    copy_dir(&fixture(name), &dst);
    dst
}

fn copy_dir(src: &Path, dst: &Path) {
    fs::create_dir_all(dst).unwrap();
    for entry in fs::read_dir(src).unwrap() {
        let entry = entry.unwrap();
        let target = dst.join(entry.file_name());
        if entry.path().is_dir() {
            copy_dir(&entry.path(), &target);
        } else if entry.file_name().to_string_lossy().ends_with(".lock") {
            continue;
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// Configuration that answers queries from a fixture's recordings.
pub fn replay_toml(fixture_dir: &Path, store: &Path) -> String {
    format!(
        "store = {store:?}\n\n[backend]\nkind = \"replay\"\nmodel = \"chat-model\"\ntranscript = {t:?}\n\n\
         [executor]\nkind = \"recorded\"\nreports = {r:?}\n",
        store = store.to_str().unwrap(),
        t = fixture_dir.join("transcript.jsonl").to_str().unwrap(),
        r = fixture_dir.join("reports.jsonl").to_str().unwrap(),
    )
}

pub fn replay_app(fixture_dir: &Path, store: &Path) -> Arc<App> {
    let config = Config::from_toml(&replay_toml(fixture_dir, store)).unwrap();
    Arc::new(App::new(config, None).unwrap())
}

/// Serves the API on an ephemeral port for the rest of the test process.
pub fn spawn_server(app: Arc<App>) -> String {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, delf::http::router(app)).await.unwrap();
        });
    });
    format!("http://{}/api/v1", rx.recv().unwrap())
}

pub struct Client {
    agent: ureq::Agent,
    pub base: String,
}

impl Client {
    pub fn new(base: String) -> Self {
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Self { agent, base }
    }

    fn finish(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> (u16, Value) {
        let mut resp = resp.unwrap();
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        Self::finish(self.agent.get(format!("{}{path}", self.base)).call())
    }

    pub fn post(&self, path: &str, body: Option<Value>) -> (u16, Value) {
        let req = self.agent.post(format!("{}{path}", self.base));
        Self::finish(match body {
            Some(b) => req.send_json(b),
            None => req.send_empty(),
        })
    }

    pub fn post_raw(&self, path: &str, body: &str) -> (u16, Value) {
        Self::finish(
            self.agent.post(format!("{}{path}", self.base)).header("content-type", "application/json").send(body),
        )
    }
}

/// Drops fields that legitimately differ between two runs of the same steps.
pub fn normalize(mut v: Value) -> Value {
    let obj = v.as_object_mut().unwrap();
    for key in ["session_id", "created_at", "updated_at"] {
        obj.remove(key);
    }
    if let Some(events) = obj.get_mut("events").and_then(Value::as_array_mut) {
        for e in events {
            e.as_object_mut().unwrap().remove("at");
        }
    }
    v
}
