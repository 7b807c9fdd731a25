#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::Duration;
use tutorloop_cli::packs::PackRegistry;
use tutorloop_cli::server::{router, AppState};
use tutorloop_core::{Engine, EngineConfig, EventStore, Generator, ScriptedGenerator};

pub const E1: &str = "The belt spreads the impact over a wider body area";
pub const E2: &str = "Stopping takes longer so the peak force drops";
pub const E3: &str = "Newton's second law links mass with acceleration";
pub const E1_WITH_M1: &str = "The belt spreads the impact over a wider body area, but restraints cause more injuries than they prevent";

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn crate_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(rel)
}

pub fn tutorloop<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_tutorloop"))
        .args(args)
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// The repository packs plus the invalid fixture packs.
pub fn registry() -> PackRegistry {
    let mut packs = PackRegistry::load_dir(&repo_path("packs")).unwrap();
    packs.add_file(&crate_path("tests/fixtures/bad-weights.json")).unwrap();
    packs.add_file(&crate_path("tests/fixtures/broken.json")).unwrap();
    packs
}

pub struct TestServer {
    pub base: String,
    pub client: reqwest::Client,
}

impl TestServer {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    pub async fn create(&self, pack_id: &str) -> String {
        let res = self.client.post(self.url("/sessions")).json(&serde_json::json!({"pack_id": pack_id})).send().await.unwrap();
        assert_eq!(res.status(), 201);
        let body: serde_json::Value = res.json().await.unwrap();
        body["session_id"].as_str().unwrap().to_owned()
    }

    pub async fn turn(&self, id: &str, utterance: &str) -> reqwest::Response {
        self.client
            .post(self.url(&format!("/sessions/{id}/turns")))
            .json(&serde_json::json!({"utterance": utterance}))
            .send()
            .await
            .unwrap()
    }

    pub async fn view(&self, id: &str) -> serde_json::Value {
        let res = self.client.get(self.url(&format!("/sessions/{id}"))).send().await.unwrap();
        assert_eq!(res.status(), 200);
        res.json().await.unwrap()
    }
}

pub async fn serve(generator: Arc<dyn Generator>, store: Arc<dyn EventStore>, turn_wait: Duration) -> TestServer {
    let engine = Engine::new(generator, EngineConfig::default());
    let state = Arc::new(AppState::new(engine, registry(), store).with_turn_wait(turn_wait));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(state)).await.unwrap() });
    TestServer { base: format!("http://{addr}"), client: reqwest::Client::new() }
}

pub async fn template_server(store: Arc<dyn EventStore>) -> TestServer {
    serve(Arc::new(ScriptedGenerator::templates()), store, Duration::from_secs(5)).await
}

pub fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}
