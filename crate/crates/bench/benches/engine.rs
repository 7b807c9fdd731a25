use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;
use std::sync::Arc;
use tutorloop_core::protocol::{assemble_system_prompt, parse_tutor_json, PromptTemplate, RawBackendOutput};
use tutorloop_core::scoring::{score_turn, update_state};
use tutorloop_core::session::NullSink;
use tutorloop_core::{
    match_utterance, split_novelty, ContentPack, Engine, EngineConfig, Mode, ScoreState, ScriptedGenerator, SteppingClock,
    Strictness, TurnInput,
};

const UTTERANCE: &str = "The belt spreads the impact over a wider body area, but restraints cause more injuries than they prevent";

fn pack() -> ContentPack {
    let text = include_str!("../../../packs/seatbelts.json");
    ContentPack::from_json_str(text, Strictness::Strict).unwrap().pack
}

fn matching(c: &mut Criterion) {
    let pack = pack();
    c.bench_function("match_utterance", |b| b.iter(|| match_utterance(black_box(UTTERANCE), black_box(&pack.expectations))));
}

fn scoring(c: &mut Criterion) {
    let pack = pack();
    let state = ScoreState::new(&pack);
    c.bench_function("score_turn", |b| {
        b.iter(|| {
            let e = split_novelty(&match_utterance(UTTERANCE, &pack.expectations), &state.best_correct).unwrap();
            let m = split_novelty(&match_utterance(UTTERANCE, &pack.misconceptions), &state.best_wrong).unwrap();
            update_state(&state, &score_turn(&e, &m, &pack).unwrap())
        })
    });
}

fn protocol(c: &mut Criterion) {
    let clean = RawBackendOutput::new(
        r#"{"feedback_brief":"Good start!","feedback_detailed":"You named the belt.","follow_up":"What about time?","justification":"e1 matched."}"#,
    );
    let messy = RawBackendOutput::new(
        "Sure, here you go:\n```json\n{\"feedback_brief\":\"Good start!\",\"feedback_detailed\":\"You named the belt.\",\"follow_up\":\"What about time?\",\"justification\":\"e1 matched.\",}\n```",
    );
    c.bench_function("parse_tutor_json/clean", |b| b.iter(|| parse_tutor_json(black_box(&clean)).unwrap()));
    c.bench_function("parse_tutor_json/repaired", |b| b.iter(|| parse_tutor_json(black_box(&messy)).unwrap()));
}

fn prompts(c: &mut Criterion) {
    let pack = pack();
    let template = PromptTemplate::bundled();
    c.bench_function("prompt/instantiate", |b| b.iter(|| template.instantiate(black_box(&pack)).unwrap()));
    c.bench_function("prompt/system", |b| b.iter(|| assemble_system_prompt(black_box(&pack)).unwrap()));
}

fn turns(c: &mut Criterion) {
    let engine = Engine::new(Arc::new(ScriptedGenerator::templates()), EngineConfig::default())
        .with_clock(Arc::new(SteppingClock::default()));
    let session = engine.create_session("bench", pack(), Mode::Tutoring, &NullSink).unwrap();
    c.bench_function("run_turn/templates", |b| {
        b.iter_batched(
            || session.clone(),
            |mut s| engine.run_turn(&mut s, TurnInput::new(UTTERANCE), &NullSink).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, matching, scoring, protocol, prompts, turns);
criterion_main!(benches);
