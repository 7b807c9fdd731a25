#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;
use tutorloop_core::{ContentPack, Engine, EngineConfig, ScriptedGenerator, SteppingClock, Strictness};

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn load_pack(name: &str) -> ContentPack {
    let text = std::fs::read_to_string(repo_path(&format!("packs/{name}.json"))).unwrap();
    let loaded = ContentPack::from_json_str(&text, Strictness::Strict).unwrap();
    assert!(loaded.report.ok, "{}", loaded.report);
    loaded.pack
}

pub fn template_engine() -> Engine {
    Engine::new(Arc::new(ScriptedGenerator::templates()), EngineConfig::default()).with_clock(Arc::new(SteppingClock::default()))
}

pub const E1: &str = "The belt spreads the impact over a wider body area";
pub const E2: &str = "Stopping takes longer so the peak force drops";
pub const E3: &str = "Newton's second law links mass with acceleration";
pub const E1_WITH_M1: &str = "The belt spreads the impact over a wider body area, but restraints cause more injuries than they prevent";
