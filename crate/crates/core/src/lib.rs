//! Expectation/misconception tutoring engine: content packs, lexical matching,
//! LCC turn scoring, the tutor JSON protocol, pluggable generators, mode
//! routing and an event-sourced session log.

pub mod backend;
pub mod config;
pub mod content;
pub mod events;
pub mod feedback;
pub mod matcher;
pub mod modes;
pub mod protocol;
pub mod replay;
pub mod report;
pub mod scoring;
pub mod session;
pub mod store;
pub mod text;

pub use backend::{
    BackendError, ChatMessage, EchoGenerator, Fixtures, GenerationRequest, Generator, GeneratorConfig, HttpGenerator,
    ScriptedGenerator,
};
pub use config::EngineConfig;
pub use content::{ContentPack, KeyPoint, LoadedPack, Pairing, Strictness};
pub use events::{Clock, EventKind, SessionEvent, SteppingClock, SystemClock};
pub use feedback::{FeedbackPlan, TutorMove, UtteranceClass};
pub use matcher::{match_utterance, split_novelty, MatchReport, NoveltySplit};
pub use modes::{AssessmentItemResult, AssessmentSummary, Confidence, Mode, ModeRecommendation};
pub use protocol::{parse_tutor_json, ProtocolError, RawBackendOutput, TutorResponse};
pub use report::{Issue, IssueCode, Severity, ValidationReport};
pub use scoring::{lcc_csv, lcc_table, LccRow, ScoreState, Status, TurnScore};
pub use session::{Engine, EngineError, Session, TurnInput, TurnOutcome};
pub use store::{EventStore, FileEventStore, MemoryEventStore, StoreError};
