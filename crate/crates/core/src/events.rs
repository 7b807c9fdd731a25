//! Session event log records with a SHA-256 hash chain.

use crate::content::ContentPack;
use crate::feedback::{BoardTurn, ClassifierConfig, FeedbackPlan, UtteranceClass};
use crate::matcher::MatchReport;
use crate::modes::{AssessmentItemResult, AssessmentSummary, Mode, ModeBands};
use crate::protocol::{OutputMetadata, TutorResponse};
use crate::scoring::{ScoreState, TurnScore};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fmt;
use std::sync::atomic::{AtomicI64, Ordering};
use thiserror::Error;

pub const EVENT_SCHEMA_VERSION: u32 = 1;
pub const GENESIS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Starts at a fixed instant and advances one second per reading.
#[derive(Debug)]
pub struct SteppingClock {
    next: AtomicI64,
}

impl SteppingClock {
    pub fn starting_at(start: DateTime<Utc>) -> Self {
        Self { next: AtomicI64::new(start.timestamp()) }
    }
}

impl Default for SteppingClock {
    fn default() -> Self {
        Self::starting_at(DateTime::from_timestamp(1_700_000_000, 0).expect("valid epoch"))
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> DateTime<Utc> {
        let secs = self.next.fetch_add(1, Ordering::SeqCst);
        DateTime::from_timestamp(secs, 0).expect("timestamp in range")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    SessionCreated,
    LearnerTurn,
    TutorTurn,
    ScoreUpdated,
    ModeChanged,
    SessionDone,
    BackendWarning,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// What asked for a mode change: assessment results carried by a turn, or a
/// direct request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionSource {
    Turn,
    Request,
}

/// Where match degrees come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchSource {
    #[default]
    Lexical,
    Backend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub pack: ContentPack,
    pub mode: Mode,
    #[serde(flatten)]
    pub settings: SessionSettings,
}

/// Versions and knobs fixed at creation so a log can be replayed later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSettings {
    pub stopwords_version: String,
    pub prompt_template_version: String,
    pub response_schema_version: String,
    pub backend_id: String,
    pub match_source: MatchSource,
    pub classifier: ClassifierConfig,
    pub mode_bands: ModeBands,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerTurn {
    pub turn: usize,
    pub mode: Mode,
    pub utterance: String,
    pub class: UtteranceClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assessment: Option<Vec<AssessmentItemResult>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreUpdated {
    pub turn: usize,
    pub expectation_report: MatchReport,
    pub misconception_report: MatchReport,
    pub score: TurnScore,
    pub state: ScoreState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TutorTurn {
    pub turn: usize,
    pub plan: FeedbackPlan,
    pub response: TutorResponse,
    pub raw_text: String,
    pub metadata: OutputMetadata,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub board: Option<BoardTurn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeChanged {
    pub at_turn: usize,
    pub source: TransitionSource,
    pub from: Mode,
    pub to: Mode,
    pub rationale: String,
    pub reassess_after: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<AssessmentSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDone {
    pub turn: usize,
    pub overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendWarning {
    pub turn: usize,
    pub message: String,
    pub retries: u32,
}

/// Typed view of an event's kind and payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventBody {
    SessionCreated(Box<SessionCreated>),
    LearnerTurn(LearnerTurn),
    TutorTurn(Box<TutorTurn>),
    ScoreUpdated(Box<ScoreUpdated>),
    ModeChanged(ModeChanged),
    SessionDone(SessionDone),
    BackendWarning(BackendWarning),
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            Self::SessionCreated(_) => EventKind::SessionCreated,
            Self::LearnerTurn(_) => EventKind::LearnerTurn,
            Self::TutorTurn(_) => EventKind::TutorTurn,
            Self::ScoreUpdated(_) => EventKind::ScoreUpdated,
            Self::ModeChanged(_) => EventKind::ModeChanged,
            Self::SessionDone(_) => EventKind::SessionDone,
            Self::BackendWarning(_) => EventKind::BackendWarning,
        }
    }

    fn payload(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("event body serializes");
        v.get_mut("payload").map(Value::take).unwrap_or(Value::Null)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EventError {
    #[error("event {seq}: payload does not match kind {kind}: {reason}")]
    BadPayload { seq: u64, kind: EventKind, reason: String },
    #[error("event {seq}: hash mismatch")]
    HashMismatch { seq: u64 },
    #[error("event {seq}: prev_hash does not chain to the previous event")]
    BrokenChain { seq: u64 },
    #[error("event {seq}: unsupported schema_version {version}")]
    UnsupportedSchema { seq: u64, version: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub seq: u64,
    pub session_id: String,
    pub timestamp: DateTime<Utc>,
    pub kind: EventKind,
    pub payload: Value,
    pub schema_version: u32,
    pub prev_hash: String,
    pub hash: String,
}

#[derive(Serialize)]
struct Hashed<'a> {
    seq: u64,
    session_id: &'a str,
    timestamp: &'a DateTime<Utc>,
    kind: EventKind,
    payload: &'a Value,
    schema_version: u32,
    prev_hash: &'a str,
}

impl SessionEvent {
    pub fn new(seq: u64, session_id: &str, timestamp: DateTime<Utc>, body: &EventBody, prev_hash: &str) -> Self {
        let mut event = Self {
            seq,
            session_id: session_id.to_owned(),
            timestamp,
            kind: body.kind(),
            payload: body.payload(),
            schema_version: EVENT_SCHEMA_VERSION,
            prev_hash: prev_hash.to_owned(),
            hash: String::new(),
        };
        event.hash = event.compute_hash();
        event
    }

    pub fn compute_hash(&self) -> String {
        let hashed = Hashed {
            seq: self.seq,
            session_id: &self.session_id,
            timestamp: &self.timestamp,
            kind: self.kind,
            payload: &self.payload,
            schema_version: self.schema_version,
            prev_hash: &self.prev_hash,
        };
        let bytes = serde_json::to_vec(&hashed).expect("event serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Checks the stored hash and the link to `prev_hash`.
    pub fn verify(&self, prev_hash: &str) -> Result<(), EventError> {
        if self.schema_version != EVENT_SCHEMA_VERSION {
            return Err(EventError::UnsupportedSchema { seq: self.seq, version: self.schema_version });
        }
        if self.prev_hash != prev_hash {
            return Err(EventError::BrokenChain { seq: self.seq });
        }
        if self.hash != self.compute_hash() {
            return Err(EventError::HashMismatch { seq: self.seq });
        }
        Ok(())
    }

    pub fn body(&self) -> Result<EventBody, EventError> {
        let tagged = serde_json::json!({ "kind": self.kind, "payload": self.payload });
        serde_json::from_value(tagged).map_err(|e| EventError::BadPayload {
            seq: self.seq,
            kind: self.kind,
            reason: e.to_string(),
        })
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("event serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SessionEvent {
        let body = EventBody::SessionDone(SessionDone { turn: 2, overall: 0.9 });
        SessionEvent::new(3, "s1", SteppingClock::default().now(), &body, GENESIS_HASH)
    }

    #[test]
    fn line_round_trip_is_exact() {
        let e = sample();
        let line = e.to_line();
        let back: SessionEvent = serde_json::from_str(&line).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.to_line(), line);
        assert_eq!(back.body().unwrap(), EventBody::SessionDone(SessionDone { turn: 2, overall: 0.9 }));
    }

    #[test]
    fn tamper_detected() {
        let e = sample();
        assert!(e.verify(GENESIS_HASH).is_ok());
        let mut t = e.clone();
        t.payload["overall"] = 0.95.into();
        assert_eq!(t.verify(GENESIS_HASH), Err(EventError::HashMismatch { seq: 3 }));
        assert_eq!(e.verify("ab"), Err(EventError::BrokenChain { seq: 3 }));
    }

    #[test]
    fn wrong_payload_shape() {
        let mut e = sample();
        e.kind = EventKind::LearnerTurn;
        assert!(matches!(e.body(), Err(EventError::BadPayload { .. })));
    }

    #[test]
    fn stepping_clock_advances() {
        let c = SteppingClock::default();
        let a = c.now();
        assert_eq!((c.now() - a).num_seconds(), 1);
    }
}
