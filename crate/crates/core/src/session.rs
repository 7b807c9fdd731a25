//! Sessions, the turn loop and mode transitions. All session state changes go
//! through events, so folding a log rebuilds the same session.

use crate::backend::{BackendError, ChatMessage, GenerationRequest, Generator};
use crate::config::EngineConfig;
use crate::content::{ContentPack, KeyPoint};
use crate::events::{
    BackendWarning, Clock, EventBody, EventError, LearnerTurn, MatchSource, ModeChanged, ScoreUpdated, SessionCreated,
    SessionDone, SessionEvent, SessionSettings, SystemClock, TransitionSource, TutorTurn, GENESIS_HASH,
};
use crate::feedback::{
    classify_utterance, plan_move, BoardTurn, Directive, FeedbackPlan, UtteranceClass,
};
use crate::matcher::{llm_match_adapter, match_utterance, split_novelty, MatchError, MatchReport};
use crate::modes::{
    board_cells, mode_content, recommend_next_mode, summarize_assessment, AssessmentItemResult, AssessmentSummary,
    Mode, ModeContent, ModeError, ModeRecommendation,
};
use crate::protocol::{
    parse_tutor_json, OutputMetadata, PromptTemplate, ProtocolError, ScoreSnapshot, TutorResponse,
    PROMPT_TEMPLATE_VERSION, RESPONSE_SCHEMA_VERSION,
};
use crate::scoring::{lcc_csv, score_turn, update_state, LccRow, ScoreState, Status, TurnScore};
use crate::text::STOPWORDS_VERSION;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FoldError {
    #[error("expected seq {expected}, found {found}")]
    SequenceGap { expected: u64, found: u64 },
    #[error("log must start with SessionCreated")]
    MissingCreated,
    #[error("event {seq} belongs to session {found}, not {expected}")]
    SessionMismatch { seq: u64, expected: String, found: String },
    #[error("event {seq}: {reason}")]
    OutOfOrder { seq: u64, reason: String },
    #[error(transparent)]
    Event(#[from] EventError),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("session {0} not found")]
    SessionNotFound(String),
    #[error("session pack does not match its score state: {0}")]
    PackMismatch(String),
    #[error("a turn is already in progress")]
    MidTurn,
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Mode(#[from] ModeError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Fold(#[from] FoldError),
    #[error(transparent)]
    Store(#[from] crate::store::StoreError),
}

/// Anything that accepts a batch of new events for a session. The batch must
/// be persisted in order and all-or-nothing as far as the sink can promise.
pub trait EventSink {
    fn append(&self, events: &[SessionEvent]) -> Result<(), EngineError>;
}

/// Discards events; for callers that only want the in-memory session.
pub struct NullSink;

impl EventSink for NullSink {
    fn append(&self, _events: &[SessionEvent]) -> Result<(), EngineError> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub index: usize,
    pub mode: Mode,
    pub utterance: String,
    pub class: UtteranceClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assessment: Option<Vec<AssessmentItemResult>>,
    pub expectation_report: MatchReport,
    pub misconception_report: MatchReport,
    pub score: TurnScore,
    pub state_after: ScoreState,
    pub plan: FeedbackPlan,
    pub response: TutorResponse,
    pub raw_text: String,
    pub metadata: OutputMetadata,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub board: Option<BoardTurn>,
}

impl TurnRecord {
    pub fn lcc_row(&self) -> LccRow {
        LccRow {
            turn: self.index,
            rn: self.score.rn,
            ro: self.score.ro,
            in_: self.score.in_,
            io: self.score.io,
            acc_correct: self.state_after.accumulated_correct,
            acc_wrong: self.state_after.accumulated_wrong,
            overall: self.state_after.overall,
            status: self.state_after.status,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct PartialTurn {
    learner: Option<LearnerTurn>,
    score: Option<ScoreUpdated>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GamingTally {
    pub played: usize,
    pub total: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub pack: ContentPack,
    pub settings: SessionSettings,
    pub mode: Mode,
    pub mode_history: Vec<ModeChanged>,
    pub assessment_round: u32,
    pub score_state: ScoreState,
    pub turn_history: Vec<TurnRecord>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub completed_at_turn: Option<usize>,
    pub gaming: GamingTally,
    pub backend_warnings: Vec<BackendWarning>,
    pub last_seq: u64,
    pub last_hash: String,
    #[serde(skip)]
    partial: PartialTurn,
    #[serde(skip)]
    in_flight: bool,
}

impl Session {
    /// Starts a session from its SessionCreated event.
    pub fn from_created(event: &SessionEvent) -> Result<Self, FoldError> {
        event.verify(GENESIS_HASH)?;
        if event.seq != 0 {
            return Err(FoldError::SequenceGap { expected: 0, found: event.seq });
        }
        let EventBody::SessionCreated(created) = event.body()? else {
            return Err(FoldError::MissingCreated);
        };
        let SessionCreated { pack, mode, settings } = *created;
        Ok(Self {
            session_id: event.session_id.clone(),
            score_state: ScoreState::new(&pack),
            pack,
            settings,
            mode,
            mode_history: Vec::new(),
            assessment_round: u32::from(mode == Mode::Assessment),
            turn_history: Vec::new(),
            created_at: event.timestamp,
            updated_at: event.timestamp,
            completed_at_turn: None,
            gaming: GamingTally::default(),
            backend_warnings: Vec::new(),
            last_seq: 0,
            last_hash: event.hash.clone(),
            partial: PartialTurn::default(),
            in_flight: false,
        })
    }

    /// Folds a complete log.
    pub fn replay(events: &[SessionEvent]) -> Result<Self, FoldError> {
        let (first, rest) = events.split_first().ok_or(FoldError::MissingCreated)?;
        let mut session = Self::from_created(first)?;
        for e in rest {
            session.apply(e)?;
        }
        Ok(session)
    }

    pub fn status(&self) -> Status {
        self.score_state.status
    }

    pub fn is_done(&self) -> bool {
        self.score_state.is_done()
    }

    /// True while a turn has started but its tutor reply is not recorded.
    pub fn mid_turn(&self) -> bool {
        self.in_flight || self.partial.learner.is_some()
    }

    /// Marks a turn as started; transitions are refused until it finishes.
    pub fn begin_turn(&mut self) -> Result<(), EngineError> {
        if self.mid_turn() {
            return Err(EngineError::MidTurn);
        }
        self.in_flight = true;
        Ok(())
    }

    pub fn end_turn(&mut self) {
        self.in_flight = false;
    }

    pub fn lcc_rows(&self) -> Vec<LccRow> {
        self.turn_history.iter().map(TurnRecord::lcc_row).collect()
    }

    pub fn lcc_csv(&self) -> String {
        lcc_csv(&self.lcc_rows())
    }

    fn out_of_order(seq: u64, reason: impl Into<String>) -> FoldError {
        FoldError::OutOfOrder { seq, reason: reason.into() }
    }

    /// Applies the next event of this session's log.
    pub fn apply(&mut self, event: &SessionEvent) -> Result<(), FoldError> {
        let expected = self.last_seq + 1;
        if event.seq != expected {
            return Err(FoldError::SequenceGap { expected, found: event.seq });
        }
        if event.session_id != self.session_id {
            return Err(FoldError::SessionMismatch {
                seq: event.seq,
                expected: self.session_id.clone(),
                found: event.session_id.clone(),
            });
        }
        event.verify(&self.last_hash)?;
        let seq = event.seq;
        let next_turn = self.turn_history.len();
        match event.body()? {
            EventBody::SessionCreated(_) => return Err(Self::out_of_order(seq, "second SessionCreated")),
            EventBody::LearnerTurn(l) => {
                if l.turn != next_turn || self.partial.learner.is_some() {
                    return Err(Self::out_of_order(seq, format!("learner turn {} while expecting {next_turn}", l.turn)));
                }
                self.partial.learner = Some(l);
            }
            EventBody::ScoreUpdated(s) => {
                if self.partial.learner.is_none() || self.partial.score.is_some() || s.turn != next_turn {
                    return Err(Self::out_of_order(seq, "score update outside a turn"));
                }
                self.score_state = s.state.clone();
                self.partial.score = Some(*s);
            }
            EventBody::TutorTurn(t) => {
                let (Some(l), Some(s)) = (self.partial.learner.take(), self.partial.score.take()) else {
                    return Err(Self::out_of_order(seq, "tutor turn before learner turn and score"));
                };
                if t.turn != next_turn {
                    return Err(Self::out_of_order(seq, "tutor turn index"));
                }
                let TutorTurn { plan, response, raw_text, metadata, warnings, board, .. } = *t;
                if let Some(b) = &board {
                    self.gaming = GamingTally { played: self.gaming.played + 1, total: b.total };
                }
                self.turn_history.push(TurnRecord {
                    index: next_turn,
                    mode: l.mode,
                    utterance: l.utterance,
                    class: l.class,
                    assessment: l.assessment,
                    expectation_report: s.expectation_report,
                    misconception_report: s.misconception_report,
                    score: s.score,
                    state_after: s.state,
                    plan,
                    response,
                    raw_text,
                    metadata,
                    warnings,
                    board,
                });
            }
            EventBody::ModeChanged(m) => {
                if self.partial.learner.is_some() {
                    return Err(Self::out_of_order(seq, "mode change mid-turn"));
                }
                if m.from != self.mode {
                    return Err(Self::out_of_order(seq, format!("mode change from {} while in {}", m.from, self.mode)));
                }
                self.mode = m.to;
                if m.to == Mode::Assessment {
                    self.assessment_round += 1;
                }
                self.mode_history.push(m);
            }
            EventBody::SessionDone(d) => {
                if self.completed_at_turn.is_some() {
                    return Err(Self::out_of_order(seq, "second SessionDone"));
                }
                self.completed_at_turn = Some(d.turn);
            }
            EventBody::BackendWarning(w) => self.backend_warnings.push(w),
        }
        self.last_seq = seq;
        self.last_hash = event.hash.clone();
        self.updated_at = event.timestamp;
        Ok(())
    }

    /// Wraps `body` as the next event and applies it.
    fn record(&mut self, body: EventBody, clock: &dyn Clock) -> Result<SessionEvent, FoldError> {
        let event = SessionEvent::new(self.last_seq + 1, &self.session_id, clock.now(), &body, &self.last_hash);
        self.apply(&event)?;
        Ok(event)
    }

    fn check_pack(&self) -> Result<(), EngineError> {
        let fresh = ScoreState::new(&self.pack);
        let same = |a: &std::collections::BTreeMap<String, f64>, b: &std::collections::BTreeMap<String, f64>| {
            a.keys().eq(b.keys())
        };
        if same(&fresh.best_correct, &self.score_state.best_correct) && same(&fresh.best_wrong, &self.score_state.best_wrong) {
            Ok(())
        } else {
            Err(EngineError::PackMismatch(self.pack.pack_id.clone()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TurnInput {
    pub utterance: String,
    pub assessment: Option<Vec<AssessmentItemResult>>,
}

impl TurnInput {
    pub fn new(utterance: impl Into<String>) -> Self {
        Self { utterance: utterance.into(), assessment: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionOutcome {
    pub recommendation: ModeRecommendation,
    pub applied: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<ModeContent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refused: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnOutcome {
    pub response: TutorResponse,
    pub turn_index: usize,
    pub events: Vec<SessionEvent>,
    pub transition: Option<TransitionOutcome>,
}

struct Scored {
    class: UtteranceClass,
    exp: MatchReport,
    mis: MatchReport,
    score: TurnScore,
    state: ScoreState,
}

pub struct Engine {
    generator: Arc<dyn Generator>,
    config: EngineConfig,
    template: PromptTemplate,
    clock: Arc<dyn Clock>,
}

impl Engine {
    pub fn new(generator: Arc<dyn Generator>, config: EngineConfig) -> Self {
        Self {
            generator,
            config,
            template: PromptTemplate::bundled(),
            clock: Arc::new(SystemClock),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_template(mut self, template: PromptTemplate) -> Self {
        self.template = template;
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn generator_id(&self) -> &str {
        self.generator.id()
    }

    pub fn create_session(
        &self,
        session_id: &str,
        pack: ContentPack,
        mode: Mode,
        sink: &dyn EventSink,
    ) -> Result<Session, EngineError> {
        let body = EventBody::SessionCreated(Box::new(SessionCreated {
            pack,
            mode,
            settings: SessionSettings {
                stopwords_version: STOPWORDS_VERSION.to_owned(),
                prompt_template_version: PROMPT_TEMPLATE_VERSION.to_owned(),
                response_schema_version: RESPONSE_SCHEMA_VERSION.to_owned(),
                backend_id: self.generator.id().to_owned(),
                match_source: self.config.match_source,
                classifier: self.config.classifier.clone(),
                mode_bands: self.config.mode_bands.clone(),
            },
        }));
        let event = SessionEvent::new(0, session_id, self.clock.now(), &body, GENESIS_HASH);
        let session = Session::from_created(&event)?;
        sink.append(std::slice::from_ref(&event))?;
        Ok(session)
    }

    fn score(&self, session: &Session, utterance: &str, backend_matches: Option<&TutorResponse>) -> Result<Scored, EngineError> {
        let pack = &session.pack;
        let (exp, mis) = match backend_matches {
            Some(r) => (
                llm_match_adapter(&r.expectation_matches, &pack.expectations, utterance)?,
                llm_match_adapter(&r.misconception_matches, &pack.misconceptions, utterance)?,
            ),
            None => (match_utterance(utterance, &pack.expectations), match_utterance(utterance, &pack.misconceptions)),
        };
        let class = classify_utterance(utterance, &exp, &mis, pack, &session.settings.classifier);
        let prior = &session.score_state;
        if prior.is_done() || class.is_unscored() {
            return Ok(Scored { class, exp, mis, score: TurnScore::empty(pack), state: prior.clone() });
        }
        let e = split_novelty(&exp, &prior.best_correct)?;
        let m = split_novelty(&mis, &prior.best_wrong)?;
        let score = score_turn(&e, &m, pack)?;
        let state = update_state(prior, &score);
        Ok(Scored { class, exp, mis, score, state })
    }

    fn board_turn(&self, session: &Session, score: &TurnScore) -> Option<BoardTurn> {
        if session.mode != Mode::Gaming {
            return None;
        }
        let cells = board_cells(&session.pack);
        let (category, cell) = cells.get(session.gaming.played % cells.len().max(1))?.clone();
        let awarded = if score.rn > 0.0 { cell.value } else { 0 };
        Some(BoardTurn { category, value: cell.value, awarded, total: session.gaming.total + awarded })
    }

    fn directive(&self, session: &Session, plan: &FeedbackPlan, status: Status, board: Option<BoardTurn>) -> Directive {
        let pack = &session.pack;
        let lookup = |id: &String| pack.misconception(id).cloned();
        let persona_belief = match mode_content(Mode::TeachableAgent, pack, 0) {
            ModeContent::TeachableAgent { misconception_id, .. } => misconception_id.as_ref().and_then(lookup),
            _ => None,
        };
        let cast = match mode_content(Mode::Vicarious, pack, 0) {
            ModeContent::Vicarious { cast } => cast,
            _ => Vec::new(),
        };
        Directive {
            plan: plan.clone(),
            mode: session.mode,
            seed_question: pack.seed_question.clone(),
            target: plan.target_point.as_ref().and_then(|id| pack.expectation(id).cloned()),
            flagged: plan.misconception_flags.iter().filter_map(lookup).collect::<Vec<KeyPoint>>(),
            persona: pack.persona().to_owned(),
            persona_belief,
            cast,
            board,
            status,
        }
    }

    fn messages(&self, session: &Session, utterance: &str, plan: Option<&Directive>) -> Result<Vec<ChatMessage>, EngineError> {
        let mut messages = vec![ChatMessage::system(self.template.instantiate(&session.pack)?)];
        for t in &session.turn_history {
            messages.push(ChatMessage::user(t.utterance.clone()));
            messages.push(ChatMessage::assistant(t.raw_text.clone()));
        }
        let mut user = utterance.to_owned();
        if let Some(d) = plan {
            user.push_str(&format!("\n\n[tutor plan] mode: {}; move: {:?}", d.mode, d.plan.tutor_move));
            if let Some(t) = &d.target {
                user.push_str(&format!("; target {}: {}", t.id, t.statement));
            }
            if !d.flagged.is_empty() {
                let ids: Vec<&str> = d.flagged.iter().map(|k| k.id.as_str()).collect();
                user.push_str(&format!("; address misconceptions: {}", ids.join(", ")));
            }
            user.push_str(&format!("; status: {}", d.status));
        }
        messages.push(ChatMessage::user(user));
        Ok(messages)
    }

    fn call(&self, request: &GenerationRequest) -> Result<(String, OutputMetadata, TutorResponse, Vec<String>), EngineError> {
        let raw = self.generator.generate(request)?;
        let parsed = parse_tutor_json(&raw)?;
        Ok((raw.text, raw.metadata, parsed.response, parsed.warnings))
    }

    fn warn(&self, session: &mut Session, sink: &dyn EventSink, turn: usize, err: &EngineError) {
        let retries = match err {
            EngineError::Backend(b) => b.retries(),
            _ => 0,
        };
        tracing::warn!(session = %session.session_id, turn, error = %err, "turn failed");
        let body = EventBody::BackendWarning(BackendWarning { turn, message: err.to_string(), retries });
        let mut next = session.clone();
        if let Ok(event) = next.record(body, self.clock.as_ref()) {
            if sink.append(std::slice::from_ref(&event)).is_ok() {
                *session = next;
            }
        }
    }

    /// Runs one learner turn and persists its events through `sink`. On error
    /// the session is left as it was apart from a BackendWarning event.
    pub fn run_turn(&self, session: &mut Session, input: TurnInput, sink: &dyn EventSink) -> Result<TurnOutcome, EngineError> {
        session.begin_turn()?;
        let result = self.turn_inner(session, input, sink);
        session.end_turn();
        if let Err(e) = &result {
            if matches!(e, EngineError::Backend(_) | EngineError::Protocol(_) | EngineError::Match(_)) {
                let turn = session.turn_history.len();
                self.warn(session, sink, turn, e);
            }
        }
        result
    }

    fn turn_inner(&self, session: &mut Session, input: TurnInput, sink: &dyn EventSink) -> Result<TurnOutcome, EngineError> {
        session.check_pack()?;
        let turn_index = session.turn_history.len();
        let summary = match &input.assessment {
            Some(items) => Some(summarize_assessment(items, &session.settings.mode_bands)?),
            None => None,
        };
        let utterance = input.utterance.as_str();
        let live_match = session.settings.match_source == MatchSource::Backend;

        let (scored, plan, board, raw_text, metadata, text, warnings) = if live_match {
            let request = GenerationRequest {
                session_id: session.session_id.clone(),
                turn_index,
                messages: self.messages(session, utterance, None)?,
                directive: None,
            };
            let (raw_text, metadata, text, warnings) = self.call(&request)?;
            let scored = self.score(session, utterance, Some(&text))?;
            let plan = plan_move(scored.class, &scored.score, &scored.state, &session.pack);
            let board = self.board_turn(session, &scored.score);
            (scored, plan, board, raw_text, metadata, text, warnings)
        } else {
            let scored = self.score(session, utterance, None)?;
            let plan = plan_move(scored.class, &scored.score, &scored.state, &session.pack);
            let board = self.board_turn(session, &scored.score);
            let directive = self.directive(session, &plan, scored.state.status, board.clone());
            let request = GenerationRequest {
                session_id: session.session_id.clone(),
                turn_index,
                messages: self.messages(session, utterance, Some(&directive))?,
                directive: Some(directive),
            };
            let (raw_text, metadata, text, warnings) = self.call(&request)?;
            (scored, plan, board, raw_text, metadata, text, warnings)
        };

        // text from the backend, numbers from the engine
        let response = TutorResponse {
            scores: Some(ScoreSnapshot {
                turn: scored.score.clone(),
                accumulated_correct: scored.state.accumulated_correct,
                accumulated_wrong: scored.state.accumulated_wrong,
                overall: scored.state.overall,
            }),
            status: scored.state.status,
            expectation_matches: scored.exp.degrees.clone(),
            misconception_matches: scored.mis.degrees.clone(),
            ..text
        };
        let newly_done = scored.state.is_done() && !session.is_done();

        let mut next = session.clone();
        let clock = self.clock.as_ref();
        let mut events = Vec::new();
        events.push(next.record(
            EventBody::LearnerTurn(LearnerTurn {
                turn: turn_index,
                mode: session.mode,
                utterance: input.utterance.clone(),
                class: scored.class,
                assessment: input.assessment.clone(),
            }),
            clock,
        )?);
        events.push(next.record(
            EventBody::ScoreUpdated(Box::new(ScoreUpdated {
                turn: turn_index,
                expectation_report: scored.exp,
                misconception_report: scored.mis,
                score: scored.score,
                state: scored.state.clone(),
            })),
            clock,
        )?);
        events.push(next.record(
            EventBody::TutorTurn(Box::new(TutorTurn {
                turn: turn_index,
                plan,
                response: response.clone(),
                raw_text,
                metadata,
                warnings,
                board,
            })),
            clock,
        )?);
        if newly_done {
            events.push(next.record(
                EventBody::SessionDone(SessionDone { turn: turn_index, overall: scored.state.overall }),
                clock,
            )?);
        }
        let transition = match summary {
            Some(summary) => {
                let recommendation = recommend_next_mode(&summary, &next.settings.mode_bands);
                Some(self.transition_events(&mut next, recommendation, Some(summary), TransitionSource::Turn, &mut events)?)
            }
            None => None,
        };
        sink.append(&events)?;
        *session = next;
        Ok(TurnOutcome { response, turn_index, events, transition })
    }

    fn transition_events(
        &self,
        session: &mut Session,
        recommendation: ModeRecommendation,
        summary: Option<AssessmentSummary>,
        source: TransitionSource,
        events: &mut Vec<SessionEvent>,
    ) -> Result<TransitionOutcome, EngineError> {
        if session.is_done() && recommendation.next != Mode::Assessment {
            let refused = ModeError::InvalidTransition { to: recommendation.next }.to_string();
            return Ok(TransitionOutcome { recommendation, applied: false, content: None, refused: Some(refused) });
        }
        let body = EventBody::ModeChanged(ModeChanged {
            at_turn: session.turn_history.len(),
            source,
            from: session.mode,
            to: recommendation.next,
            rationale: recommendation.rationale.clone(),
            reassess_after: recommendation.reassess_after,
            summary,
        });
        events.push(session.record(body, self.clock.as_ref())?);
        let content = mode_content(session.mode, &session.pack, session.assessment_round);
        Ok(TransitionOutcome { recommendation, applied: true, content: Some(content), refused: None })
    }

    /// Moves the session to the recommended mode.
    pub fn transition(
        &self,
        session: &mut Session,
        recommendation: ModeRecommendation,
        summary: Option<AssessmentSummary>,
        sink: &dyn EventSink,
    ) -> Result<ModeContent, EngineError> {
        if session.mid_turn() {
            return Err(ModeError::MidTurn.into());
        }
        if session.is_done() && recommendation.next != Mode::Assessment {
            return Err(ModeError::InvalidTransition { to: recommendation.next }.into());
        }
        let mut next = session.clone();
        let mut events = Vec::new();
        let outcome = self.transition_events(&mut next, recommendation, summary, TransitionSource::Request, &mut events)?;
        sink.append(&events)?;
        *session = next;
        Ok(outcome.content.expect("applied transition carries content"))
    }
}
