//! Utterance files and the plain-text transcript printed by `simulate`.
//!
//! An utterance file holds one learner turn per line. Lines starting with `#`
//! and blank lines are skipped. A line of the form
//! `@assess q1:correct:6 q2:wrong:3` attaches assessment results to the next
//! utterance.

use std::fmt::Write as _;
use tutorloop_core::session::TurnRecord;
use tutorloop_core::{AssessmentItemResult, Session, TurnInput};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum DialogueError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: @assess must be followed by an utterance")]
    DanglingAssessment { line: usize },
}

pub fn parse_utterances(text: &str) -> Result<Vec<TurnInput>, DialogueError> {
    let mut out = Vec::new();
    let mut pending: Option<(usize, Vec<AssessmentItemResult>)> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("@assess") {
            let items = rest
                .split_whitespace()
                .map(|spec| parse_item(spec).map_err(|message| DialogueError::Syntax { line: i + 1, message }))
                .collect::<Result<Vec<_>, _>>()?;
            pending = Some((i + 1, items));
            continue;
        }
        let mut input = TurnInput::new(line);
        input.assessment = pending.take().map(|(_, items)| items);
        out.push(input);
    }
    match pending {
        Some((line, _)) => Err(DialogueError::DanglingAssessment { line }),
        None => Ok(out),
    }
}

fn parse_item(spec: &str) -> Result<AssessmentItemResult, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [id, verdict, conf] = parts[..] else {
        return Err(format!("expected id:correct|wrong:confidence, got {spec:?}"));
    };
    let correct = match verdict {
        "correct" => true,
        "wrong" => false,
        other => return Err(format!("verdict must be correct or wrong, got {other:?}")),
    };
    let conf: u8 = conf.parse().map_err(|_| format!("confidence must be an integer, got {conf:?}"))?;
    AssessmentItemResult::new(id, correct, conf).map_err(|e| e.to_string())
}

/// Renders a finished session as text. Every float is printed with six
/// decimals so the output is stable across platforms.
pub fn render_transcript(session: &Session) -> String {
    let mut out = String::new();
    let initial = session.mode_history.first().map(|m| m.from).unwrap_or(session.mode);
    let _ = writeln!(out, "session: {}", session.session_id);
    let _ = writeln!(out, "pack: {}", session.pack.pack_id);
    let _ = writeln!(out, "backend: {}", session.settings.backend_id);
    let _ = writeln!(out, "initial mode: {initial}");
    let _ = writeln!(out, "scenario: {}", session.pack.scenario);
    let _ = writeln!(out, "seed question: {}", session.pack.seed_question);
    for t in &session.turn_history {
        render_turn(&mut out, session, t);
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "final: status={} overall={:.6} completed_at_turn={}",
        session.status(),
        session.score_state.overall,
        session.completed_at_turn.map_or("-".to_owned(), |t| t.to_string())
    );
    let _ = writeln!(out);
    out.push_str(&session.lcc_csv());
    out
}

fn render_turn(out: &mut String, session: &Session, t: &TurnRecord) {
    let _ = writeln!(out);
    let _ = writeln!(out, "[turn {}] mode={}", t.index, t.mode);
    if let Some(items) = &t.assessment {
        let parts: Vec<String> = items
            .iter()
            .map(|a| format!("{}:{}:{}", a.item_id, if a.correct { "correct" } else { "wrong" }, a.confidence.get()))
            .collect();
        let _ = writeln!(out, "assessment: {}", parts.join(" "));
    }
    let _ = writeln!(out, "learner: {}", t.utterance);
    let flags = if t.plan.misconception_flags.is_empty() { "-".to_owned() } else { t.plan.misconception_flags.join(",") };
    let _ = writeln!(
        out,
        "plan: class={:?} move={:?} target={} flags={}",
        t.plan.class,
        t.plan.tutor_move,
        t.plan.target_point.as_deref().unwrap_or("-"),
        flags
    );
    let s = &t.score;
    let _ = writeln!(
        out,
        "score: rn={:.6} ro={:.6} in={:.6} io={:.6} overall={:.6} status={}",
        s.rn, s.ro, s.in_, s.io, t.state_after.overall, t.state_after.status
    );
    if let Some(b) = &t.board {
        let _ = writeln!(out, "board: {} {} awarded={} total={}", b.category, b.value, b.awarded, b.total);
    }
    let _ = writeln!(out, "tutor: {}", t.response.to_json());
    for w in &t.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    for m in session.mode_history.iter().filter(|m| m.at_turn == t.index) {
        let _ = writeln!(out, "mode change: {} -> {} ({})", m.from, m.to, m.rationale);
    }
}
