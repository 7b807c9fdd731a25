//! Re-running a logged session and checking that it comes out the same.

use crate::backend::{BackendError, Generator, GenerationRequest, ScriptedGenerator};
use crate::config::EngineConfig;
use crate::events::{Clock, EventBody, EventKind, SessionEvent, TransitionSource};
use crate::modes::ModeRecommendation;
use crate::protocol::{OutputMetadata, RawBackendOutput};
use crate::session::{Engine, EngineError, FoldError, Session, TurnInput};
use crate::store::{EventStore, MemoryEventStore};
use chrono::{DateTime, Utc};
use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use thiserror::Error;

pub const TEMPLATE_BACKEND_ID: &str = "scripted:templates";

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Fold(#[from] FoldError),
    #[error("replay engine failed: {0}")]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub events: usize,
    pub turns: usize,
    pub rerendered: bool,
    pub divergences: Vec<String>,
}

impl ReplayReport {
    pub fn ok(&self) -> bool {
        self.divergences.is_empty()
    }
}

/// Hands back the raw text logged for each turn.
struct RecordedGenerator {
    id: String,
    texts: BTreeMap<usize, (String, OutputMetadata)>,
}

impl Generator for RecordedGenerator {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate(&self, request: &GenerationRequest) -> Result<RawBackendOutput, BackendError> {
        let (text, metadata) = self.texts.get(&request.turn_index).ok_or(BackendError::FixtureExhausted {
            turn_index: request.turn_index,
            available: self.texts.len(),
        })?;
        Ok(RawBackendOutput { text: text.clone(), metadata: metadata.clone() })
    }
}

/// Replays the logged timestamps in order.
struct LoggedClock {
    stamps: Mutex<std::vec::IntoIter<DateTime<Utc>>>,
    last: Mutex<DateTime<Utc>>,
}

impl Clock for LoggedClock {
    fn now(&self) -> DateTime<Utc> {
        let mut last = self.last.lock().expect("clock lock");
        if let Some(t) = self.stamps.lock().expect("clock lock").next() {
            *last = t;
        }
        *last
    }
}

fn comparable(events: &[SessionEvent]) -> Vec<&SessionEvent> {
    events.iter().filter(|e| e.kind != EventKind::BackendWarning).collect()
}

/// Rebuilds the session from `events`, then runs the same inputs through a
/// fresh engine and compares every resulting event. Sessions produced by the
/// template backend get their text re-rendered; others reuse the logged raw
/// backend text, so parsing, scoring and planning are still recomputed.
pub fn replay_events(events: &[SessionEvent]) -> Result<(Session, ReplayReport), ReplayError> {
    let original = Session::replay(events)?;
    let settings = &original.settings;
    let rerendered = settings.backend_id == TEMPLATE_BACKEND_ID;
    let generator: Arc<dyn Generator> = if rerendered {
        Arc::new(ScriptedGenerator::templates())
    } else {
        let mut texts = BTreeMap::new();
        for t in &original.turn_history {
            texts.insert(t.index, (t.raw_text.clone(), t.metadata.clone()));
        }
        Arc::new(RecordedGenerator { id: settings.backend_id.clone(), texts })
    };
    let config = EngineConfig {
        classifier: settings.classifier.clone(),
        mode_bands: settings.mode_bands.clone(),
        match_source: settings.match_source,
        ..EngineConfig::default()
    };
    let wanted = comparable(events);
    let clock = LoggedClock {
        stamps: Mutex::new(wanted.iter().map(|e| e.timestamp).collect::<Vec<_>>().into_iter()),
        last: Mutex::new(original.created_at),
    };
    let engine = Engine::new(generator, config).with_clock(Arc::new(clock));
    let store = MemoryEventStore::new();
    let mut session = engine.create_session(&original.session_id, original.pack.clone(), mode_at_start(&original, events), &store)?;
    let mut divergences = Vec::new();
    for e in &wanted[1..] {
        let body = e.body().map_err(FoldError::from)?;
        let result = match body {
            EventBody::LearnerTurn(l) => {
                let input = TurnInput { utterance: l.utterance, assessment: l.assessment };
                engine.run_turn(&mut session, input, &store).map(|_| ())
            }
            EventBody::ModeChanged(m) if m.source == TransitionSource::Request => {
                let rec = ModeRecommendation { next: m.to, rationale: m.rationale, reassess_after: m.reassess_after };
                engine.transition(&mut session, rec, m.summary, &store).map(|_| ())
            }
            _ => Ok(()),
        };
        if let Err(err) = result {
            divergences.push(format!("seq {}: replay failed: {err}", e.seq));
            break;
        }
    }
    let produced = store.load_events(&original.session_id).map_err(EngineError::from)?.events;
    let produced = comparable(&produced);
    if produced.len() != wanted.len() {
        divergences.push(format!("event count: logged {}, replayed {}", wanted.len(), produced.len()));
    }
    for (a, b) in wanted.iter().zip(&produced) {
        if a.kind != b.kind {
            divergences.push(format!("seq {}: logged {}, replayed {}", a.seq, a.kind, b.kind));
            break;
        }
        if a.payload != b.payload {
            divergences.push(format!("seq {}: {} payload differs", a.seq, a.kind));
        }
    }
    let turns_json = |s: &Session| serde_json::to_string(&s.turn_history).expect("turns serialize");
    if divergences.is_empty() && turns_json(&original) != turns_json(&session) {
        divergences.push("turn history differs".into());
    }
    let report = ReplayReport {
        events: events.len(),
        turns: original.turn_history.len(),
        rerendered,
        divergences,
    };
    Ok((original, report))
}

fn mode_at_start(original: &Session, events: &[SessionEvent]) -> crate::modes::Mode {
    match events.first().map(SessionEvent::body) {
        Some(Ok(EventBody::SessionCreated(c))) => c.mode,
        _ => original.mode,
    }
}
