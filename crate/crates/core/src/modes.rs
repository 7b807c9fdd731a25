//! Five-mode progression: assessment results route the learner to Tutoring,
//! Vicarious, Gaming or Teachable Agent, with reassessment in between.

use crate::content::{BoardCell, ContentPack, Discussant, DiscussantRole, QuizItem};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Mode {
    #[default]
    Assessment,
    Tutoring,
    Vicarious,
    Gaming,
    TeachableAgent,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Assessment, Mode::Tutoring, Mode::Vicarious, Mode::Gaming, Mode::TeachableAgent];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModeError {
    #[error("assessment has no items")]
    EmptyAssessment,
    #[error("confidence must be between 1 and 7, got {0}")]
    ConfidenceOutOfRange(u8),
    #[error("session is DONE; only a move to Assessment is allowed, not {to}")]
    InvalidTransition { to: Mode },
    #[error("a turn is in progress")]
    MidTurn,
}

/// Self-reported confidence on a 1..=7 scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Confidence(u8);

impl Confidence {
    pub const MIN: u8 = 1;
    pub const MAX: u8 = 7;

    pub fn new(value: u8) -> Result<Self, ModeError> {
        if (Self::MIN..=Self::MAX).contains(&value) {
            Ok(Self(value))
        } else {
            Err(ModeError::ConfidenceOutOfRange(value))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for Confidence {
    type Error = ModeError;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<Confidence> for u8 {
    fn from(c: Confidence) -> u8 {
        c.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentItemResult {
    pub item_id: String,
    pub correct: bool,
    pub confidence: Confidence,
    #[serde(default)]
    pub changed_answer: bool,
}

impl AssessmentItemResult {
    pub fn new(item_id: impl Into<String>, correct: bool, confidence: u8) -> Result<Self, ModeError> {
        Ok(Self {
            item_id: item_id.into(),
            correct,
            confidence: Confidence::new(confidence)?,
            changed_answer: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentSummary {
    pub items: Vec<AssessmentItemResult>,
    pub mastery: f64,
    pub overconfident_errors: usize,
    pub mean_confidence: f64,
}

/// Routing thresholds. Loaded from the engine config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModeBands {
    /// Below this mastery the learner goes to Tutoring.
    pub tutoring_below: f64,
    /// At or above this mastery the learner goes to Teachable Agent.
    pub teachable_at: f64,
    /// In the middle band, mean confidence below this picks Vicarious.
    pub vicarious_confidence_below: f64,
    /// A wrong answer at or above this confidence counts as overconfident.
    pub overconfidence_at: u8,
}

impl Default for ModeBands {
    fn default() -> Self {
        Self {
            tutoring_below: 0.5,
            teachable_at: 0.8,
            vicarious_confidence_below: 4.0,
            overconfidence_at: 6,
        }
    }
}

pub fn summarize_assessment(items: &[AssessmentItemResult], bands: &ModeBands) -> Result<AssessmentSummary, ModeError> {
    if items.is_empty() {
        return Err(ModeError::EmptyAssessment);
    }
    let n = items.len() as f64;
    let correct = items.iter().filter(|i| i.correct).count();
    let confidence_total: u32 = items.iter().map(|i| u32::from(i.confidence.get())).sum();
    Ok(AssessmentSummary {
        items: items.to_vec(),
        mastery: correct as f64 / n,
        overconfident_errors: items
            .iter()
            .filter(|i| !i.correct && i.confidence.get() >= bands.overconfidence_at)
            .count(),
        mean_confidence: f64::from(confidence_total) / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeRecommendation {
    pub next: Mode,
    pub rationale: String,
    pub reassess_after: bool,
}

/// One row of the routing decision table.
pub struct RoutingRule {
    pub name: &'static str,
    pub next: Mode,
    pub applies: fn(&AssessmentSummary, &ModeBands) -> bool,
    pub rationale: &'static str,
}

fn needs_tutoring(s: &AssessmentSummary, b: &ModeBands) -> bool {
    s.mastery < b.tutoring_below || s.overconfident_errors > 0
}

fn middle_band(s: &AssessmentSummary, b: &ModeBands) -> bool {
    !needs_tutoring(s, b) && s.mastery >= b.tutoring_below && s.mastery < b.teachable_at
}

pub const ROUTING_TABLE: [RoutingRule; 4] = [
    RoutingRule {
        name: "foundational-gap",
        next: Mode::Tutoring,
        applies: needs_tutoring,
        rationale: "Low mastery or confidently held errors: one-on-one tutoring targets the gaps first.",
    },
    RoutingRule {
        name: "apply-low-confidence",
        next: Mode::Vicarious,
        applies: |s, b| middle_band(s, b) && s.mean_confidence < b.vicarious_confidence_below,
        rationale: "Partial mastery with low confidence: watching a guided discussion lowers the pressure.",
    },
    RoutingRule {
        name: "apply",
        next: Mode::Gaming,
        applies: |s, b| middle_band(s, b) && s.mean_confidence >= b.vicarious_confidence_below,
        rationale: "Partial mastery with reasonable confidence: game challenges reinforce application.",
    },
    RoutingRule {
        name: "mastery",
        next: Mode::TeachableAgent,
        applies: |s, b| !needs_tutoring(s, b) && s.mastery >= b.teachable_at,
        rationale: "High mastery: teaching a confused peer deepens understanding.",
    },
];

/// Rules of the table that fire for `summary`. Exactly one for any summary.
pub fn matching_rules<'a>(summary: &'a AssessmentSummary, bands: &'a ModeBands) -> impl Iterator<Item = &'static RoutingRule> + 'a {
    ROUTING_TABLE.iter().filter(move |r| (r.applies)(summary, bands))
}

pub fn recommend_next_mode(summary: &AssessmentSummary, bands: &ModeBands) -> ModeRecommendation {
    let rule = matching_rules(summary, bands)
        .next()
        .expect("routing table covers every summary");
    ModeRecommendation {
        next: rule.next,
        rationale: rule.rationale.to_owned(),
        reassess_after: rule.next != Mode::TeachableAgent,
    }
}

/// Per-mode presentation material drawn from the pack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModeContent {
    Assessment { round: u32, items: Vec<QuizItem> },
    Tutoring,
    Vicarious { cast: Vec<Discussant> },
    Gaming { cells: Vec<(String, BoardCell)> },
    TeachableAgent { persona: String, misconception_id: Option<String> },
}

fn default_cast() -> Vec<Discussant> {
    [
        ("Alice", DiscussantRole::Expert),
        ("Bob", DiscussantRole::Confused),
        ("Mr. Johnson", DiscussantRole::Teacher),
    ]
    .into_iter()
    .map(|(name, role)| Discussant { name: name.into(), role })
    .collect()
}

/// Board cells in play order: category order, then ascending value. Packs
/// without a board get one category with a cell per expectation.
pub fn board_cells(pack: &ContentPack) -> Vec<(String, BoardCell)> {
    match &pack.gaming_board {
        Some(board) => board
            .categories
            .iter()
            .flat_map(|cat| {
                let mut cells = cat.cells.clone();
                cells.sort_by_key(|c| c.value);
                cells.into_iter().map(move |c| (cat.name.clone(), c))
            })
            .collect(),
        None => pack
            .expectations
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let cell = BoardCell {
                    value: 100 * (i as u32 + 1),
                    question_id: k.id.clone(),
                };
                ("Key Ideas".to_owned(), cell)
            })
            .collect(),
    }
}

pub fn mode_content(mode: Mode, pack: &ContentPack, round: u32) -> ModeContent {
    match mode {
        Mode::Assessment => ModeContent::Assessment {
            round,
            items: pack.quiz.clone(),
        },
        Mode::Tutoring => ModeContent::Tutoring,
        Mode::Vicarious => ModeContent::Vicarious {
            cast: if pack.discussants.is_empty() {
                default_cast()
            } else {
                pack.discussants.clone()
            },
        },
        Mode::Gaming => ModeContent::Gaming { cells: board_cells(pack) },
        Mode::TeachableAgent => ModeContent::TeachableAgent {
            persona: pack.persona().to_owned(),
            misconception_id: pack
                .misconceptions
                .iter()
                .fold(None, |best: Option<&crate::content::KeyPoint>, k| match best {
                    Some(b) if b.weight >= k.weight => Some(b),
                    _ => Some(k),
                })
                .map(|k| k.id.clone()),
        },
    }
}
