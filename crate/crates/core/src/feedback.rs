//! Utterance classification, move planning and the canned tutor templates.

use crate::content::{ContentPack, Discussant, DiscussantRole, KeyPoint};
use crate::matcher::MatchReport;
use crate::modes::Mode;
use crate::protocol::TutorResponse;
use crate::scoring::{ScoreState, Status, TurnScore};
use crate::text;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UtteranceClass {
    OnTopic,
    Clarification,
    OffTopic,
    Unrelated,
    TooBrief,
    Rude,
}

impl UtteranceClass {
    /// Classes whose turns are recorded but never scored.
    pub fn is_unscored(self) -> bool {
        matches!(self, Self::TooBrief | Self::Rude)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Utterances with fewer word tokens than this are too brief. Counted over
    /// all words, stop words included.
    pub min_words: usize,
    /// A degree above this on any key point makes the utterance on topic.
    pub on_topic_degree: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            min_words: 3,
            on_topic_degree: 0.15,
        }
    }
}

pub fn classify_utterance(
    utterance: &str,
    expectations: &MatchReport,
    misconceptions: &MatchReport,
    pack: &ContentPack,
    cfg: &ClassifierConfig,
) -> UtteranceClass {
    let words = text::tokens(utterance);
    if words.len() < cfg.min_words {
        return UtteranceClass::TooBrief;
    }
    if words.iter().any(|w| text::is_profane(w)) {
        return UtteranceClass::Rude;
    }
    let content = text::content_tokens(utterance);
    let scenario: BTreeSet<String> = text::content_tokens(&pack.scenario);
    let seed = text::content_tokens(&pack.seed_question);
    let touches_scenario = !content.is_disjoint(&scenario);
    if utterance.trim_end().ends_with('?') && (touches_scenario || !content.is_disjoint(&seed)) {
        return UtteranceClass::Clarification;
    }
    let best = expectations.max_degree().max(misconceptions.max_degree());
    if best > cfg.on_topic_degree {
        UtteranceClass::OnTopic
    } else if touches_scenario {
        UtteranceClass::OffTopic
    } else {
        UtteranceClass::Unrelated
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TutorMove {
    PositiveElaborate,
    Hint,
    Prompt,
    Redirect,
    HumorousRefusal,
    Clarify,
    Celebrate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackPlan {
    pub class: UtteranceClass,
    #[serde(rename = "move")]
    pub tutor_move: TutorMove,
    pub target_point: Option<String>,
    pub misconception_flags: Vec<String>,
}

fn unmet(state: &ScoreState, id: &str) -> bool {
    state.best_correct.get(id).copied().unwrap_or(0.0) < 1.0
}

/// Highest-weight expectation still short of a full match; list order breaks
/// ties. Falls back to the highest-weight expectation when all are met.
pub fn top_unmet_expectation<'a>(pack: &'a ContentPack, state: &ScoreState) -> Option<&'a KeyPoint> {
    let pick = |only_unmet: bool| {
        pack.expectations
            .iter()
            .filter(|k| !only_unmet || unmet(state, &k.id))
            .fold(None, |best: Option<&KeyPoint>, k| match best {
                Some(b) if b.weight >= k.weight => Some(b),
                _ => Some(k),
            })
    };
    pick(true).or_else(|| pick(false))
}

fn prompt_target(turn: &TurnScore, state: &ScoreState, pack: &ContentPack) -> Option<String> {
    let mut triggered: Vec<&KeyPoint> = pack
        .misconceptions
        .iter()
        .filter(|m| turn.per_point.misconceptions.get(&m.id).is_some_and(|c| c.new > 0.0))
        .collect();
    // stable sort keeps list order among equal weights
    triggered.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    for m in &triggered {
        let paired: Vec<&str> = pack.paired_expectations(&m.id).collect();
        if let Some(e) = paired.iter().find(|e| unmet(state, e)).or(paired.first()) {
            return Some((*e).to_owned());
        }
    }
    top_unmet_expectation(pack, state).map(|k| k.id.clone())
}

/// Picks the tutor move for a classified turn. `state` is the score state
/// after the turn was applied.
pub fn plan_move(class: UtteranceClass, turn: &TurnScore, state: &ScoreState, pack: &ContentPack) -> FeedbackPlan {
    let misconception_flags: Vec<String> = pack
        .misconceptions
        .iter()
        .filter(|m| {
            turn.per_point
                .misconceptions
                .get(&m.id)
                .is_some_and(|c| c.new > 0.0 || c.old > 0.0)
        })
        .map(|m| m.id.clone())
        .collect();
    let (tutor_move, target_point) = if state.is_done() {
        (TutorMove::Celebrate, None)
    } else {
        match class {
            UtteranceClass::TooBrief | UtteranceClass::Rude => (TutorMove::HumorousRefusal, None),
            UtteranceClass::OffTopic | UtteranceClass::Unrelated => (TutorMove::Redirect, None),
            UtteranceClass::Clarification => (TutorMove::Clarify, None),
            UtteranceClass::OnTopic if turn.in_ > 0.0 => (TutorMove::Prompt, prompt_target(turn, state, pack)),
            UtteranceClass::OnTopic if turn.rn > 0.0 => {
                (TutorMove::PositiveElaborate, top_unmet_expectation(pack, state).map(|k| k.id.clone()))
            }
            UtteranceClass::OnTopic => (TutorMove::Hint, top_unmet_expectation(pack, state).map(|k| k.id.clone())),
        }
    };
    FeedbackPlan {
        class,
        tutor_move,
        target_point,
        misconception_flags,
    }
}

/// Gaming board position for the current turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardTurn {
    pub category: String,
    pub value: u32,
    pub awarded: u32,
    pub total: u32,
}

/// Everything needed to render the tutor reply for one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Directive {
    pub plan: FeedbackPlan,
    pub mode: Mode,
    pub seed_question: String,
    pub target: Option<KeyPoint>,
    pub flagged: Vec<KeyPoint>,
    pub persona: String,
    pub persona_belief: Option<KeyPoint>,
    pub cast: Vec<Discussant>,
    pub board: Option<BoardTurn>,
    pub status: Status,
}

/// First half of a statement's words, rounded up.
pub fn fragment(statement: &str) -> String {
    let words: Vec<&str> = statement.split_whitespace().collect();
    words[..words.len().div_ceil(2)].join(" ")
}

fn lower_first(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn trim_period(s: &str) -> &str {
    s.trim_end_matches(['.', '!', '?'])
}

struct Parts {
    brief: String,
    detailed: String,
    follow_up: String,
    justification: String,
}

fn justification(d: &Directive) -> String {
    let target = d.target.as_ref().map(|k| k.id.as_str()).unwrap_or("the next idea");
    match d.plan.tutor_move {
        TutorMove::Celebrate => "Your overall score passed the completion mark, so this session is done.".into(),
        TutorMove::HumorousRefusal => "Your answer was too short or not respectful, so it was not scored.".into(),
        TutorMove::Redirect => "Your answer did not connect to the scenario, so I steered back to the question.".into(),
        TutorMove::Clarify => "You asked about the scenario, so I clarified before moving on.".into(),
        TutorMove::PositiveElaborate => {
            format!("Your answer added new ideas that match the expected explanation; next up is {target}.")
        }
        TutorMove::Hint => format!("The most important idea you have not covered yet is {target}, so I hinted at it."),
        TutorMove::Prompt => format!(
            "Your answer included a misconception ({}), so I prompted you toward {target}.",
            d.plan.misconception_flags.join(", ")
        ),
    }
}

fn tutoring_parts(d: &Directive) -> Parts {
    let frag = d.target.as_ref().map(|k| fragment(&k.statement));
    let flagged = d.flagged.first().map(|k| trim_period(&k.statement).to_owned());
    let (brief, detailed, follow_up) = match d.plan.tutor_move {
        TutorMove::Celebrate => (
            "Excellent work, you covered the key ideas!".to_owned(),
            "Your answers now line up with the main points of this scenario.".to_owned(),
            "That wraps up this session. Well done!".to_owned(),
        ),
        TutorMove::HumorousRefusal => (
            "Nice try, but I'm going to need more than that!".to_owned(),
            "Talk to me like you would to a friend: give me a full sentence or two about what you think is going on."
                .to_owned(),
            format!("So, back to the question: {}", d.seed_question),
        ),
        TutorMove::Redirect => (
            "Ha, interesting detour!".to_owned(),
            "That's a fun thought, but let's bring the focus back to our scenario.".to_owned(),
            d.seed_question.clone(),
        ),
        TutorMove::Clarify => (
            "Good question.".to_owned(),
            "Stay with the scenario we started from and think about what it asks you to explain.".to_owned(),
            format!("With that in mind: {}", d.seed_question),
        ),
        TutorMove::PositiveElaborate => (
            "Great job!".to_owned(),
            "You brought in an idea that fits what we are looking for. I bet you can take it further.".to_owned(),
            match &frag {
                Some(f) => format!("Can you tell me more? Think about this: {f}..."),
                None => "Can you explain your reasoning in a bit more detail?".to_owned(),
            },
        ),
        TutorMove::Hint => (
            "You're on the right path.".to_owned(),
            "Let's look at another part of the picture.".to_owned(),
            match &frag {
                Some(f) => format!("Here's a hint: {f}... What comes next?"),
                None => format!("Here's a hint: reread the question. {}", d.seed_question),
            },
        ),
        TutorMove::Prompt => (
            "Let's pause on that for a moment.".to_owned(),
            match &flagged {
                Some(m) => format!(
                    "Part of what you said sounds like a common mix-up: \"{m}\". Let's check that idea against the scenario."
                ),
                None => "Part of what you said sounds like a common mix-up. Let's check it against the scenario.".to_owned(),
            },
            match &frag {
                Some(f) => format!("Fill in the blank: {f} _____."),
                None => format!("Fill in the blank: the answer to \"{}\" is _____.", d.seed_question),
            },
        ),
    };
    Parts {
        brief,
        detailed,
        follow_up,
        justification: justification(d),
    }
}

fn teachable_parts(d: &Directive) -> Parts {
    let p = d.persona.as_str();
    let frag = d.target.as_ref().map(|k| fragment(&k.statement));
    let belief = d
        .flagged
        .first()
        .or(d.persona_belief.as_ref())
        .map(|k| lower_first(trim_period(&k.statement)));
    let believes = |lead: &str| match &belief {
        Some(b) => format!("{lead} {b}."),
        None => format!("{lead} something is off, but can't say what."),
    };
    let ask = |lead: &str| match &frag {
        Some(f) => format!("{p} asks: {lead} {f}...?"),
        None => format!("{p} asks again: {}", d.seed_question),
    };
    let (brief, detailed, follow_up) = match d.plan.tutor_move {
        TutorMove::Celebrate => (
            format!("{p}: Oh, now I really get it. Thank you!"),
            format!("You explained it clearly enough that {p} changed their mind."),
            format!("{p} has no more questions. Thanks for teaching today!"),
        ),
        TutorMove::HumorousRefusal => (
            format!("{p}: Huh? That didn't help me at all!"),
            format!("{p} needs a sentence or two of real explanation before they can follow you."),
            format!("{p} asks again: {}", d.seed_question),
        ),
        TutorMove::Redirect => (
            format!("{p}: Wait, what does that have to do with anything?"),
            format!("{p} is lost. Bring your explanation back to our scenario."),
            format!("{p} asks again: {}", d.seed_question),
        ),
        TutorMove::Clarify => (
            format!("{p}: Good question, I was wondering that too."),
            believes(&format!("All {p} can tell you is that they believe")),
            "Can you explain why that belief falls short?".to_owned(),
        ),
        TutorMove::PositiveElaborate => (
            format!("{p}: Oh, that part makes sense!"),
            format!("{p} follows your explanation so far but still has doubts."),
            ask("could you say more about"),
        ),
        TutorMove::Hint => (
            format!("{p}: Hmm, I'm still confused."),
            believes(&format!("{p} still believes")),
            ask("what about"),
        ),
        TutorMove::Prompt => (
            format!("{p}: So I was right all along?"),
            believes(&format!("You just said something close to what {p} believes:")),
            match &frag {
                Some(f) => format!("Help {p} finish this: {f} _____."),
                None => format!("Help {p} answer: {}", d.seed_question),
            },
        ),
    };
    Parts {
        brief,
        detailed,
        follow_up,
        justification: justification(d),
    }
}

fn cast_member(cast: &[Discussant], role: DiscussantRole, fallback: &str) -> String {
    cast.iter()
        .find(|c| c.role == role)
        .map_or_else(|| fallback.to_owned(), |c| c.name.clone())
}

/// Renders the canned reply for a directive. Scores are left for the caller.
pub fn render_template(d: &Directive) -> TutorResponse {
    let mut parts = match d.mode {
        Mode::TeachableAgent => teachable_parts(d),
        _ => tutoring_parts(d),
    };
    match d.mode {
        Mode::Vicarious if d.plan.tutor_move != TutorMove::Celebrate => {
            let expert = cast_member(&d.cast, DiscussantRole::Expert, "Alice");
            let confused = cast_member(&d.cast, DiscussantRole::Confused, "Bob");
            let teacher = cast_member(&d.cast, DiscussantRole::Teacher, "Mr. Johnson");
            let claim = d
                .target
                .as_ref()
                .map_or_else(|| "Let's look at the scenario again.".to_owned(), |k| format!("{}.", trim_period(&k.statement)));
            let doubt = d
                .flagged
                .first()
                .or(d.persona_belief.as_ref())
                .map_or_else(|| "I'm not sure about that.".to_owned(), |k| format!("But I thought {}.", lower_first(trim_period(&k.statement))));
            parts.detailed = format!(
                "{} {expert}: \"{claim}\" {confused}: \"{doubt}\" {teacher}: \"Let's test both ideas against the scenario.\"",
                parts.detailed
            );
            parts.follow_up = format!("{teacher} turns to you: {}", parts.follow_up);
        }
        Mode::Gaming => {
            if let Some(b) = &d.board {
                parts.brief = format!("[{} for {}] {}", b.category, b.value, parts.brief);
                parts.detailed = format!(
                    "{} You earned {} points this round, for a total of {}.",
                    parts.detailed, b.awarded, b.total
                );
            }
        }
        _ => {}
    }
    TutorResponse {
        feedback_brief: parts.brief,
        feedback_detailed: parts.detailed,
        follow_up: parts.follow_up,
        justification: parts.justification,
        scores: None,
        status: d.status,
        expectation_matches: Default::default(),
        misconception_matches: Default::default(),
    }
}
