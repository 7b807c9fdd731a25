//! Per-key-point match degrees and their new/old split against history.
//!
//! The lexical degree of a phrasing is the fraction of its content tokens that
//! also occur in the utterance. A key point's degree is the best degree over
//! its statement and aliases.

use crate::content::KeyPoint;
use crate::text;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MatchError {
    #[error("key point id sets differ (missing: {missing:?}, unexpected: {unexpected:?})")]
    IdMismatch { missing: Vec<String>, unexpected: Vec<String> },
    #[error("unknown key point {0:?}")]
    UnknownKeyPoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub degrees: BTreeMap<String, f64>,
    pub utterance_echo: String,
    /// Notes produced while building the report (clamped values and the like).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl MatchReport {
    pub fn zeros(points: &[KeyPoint], utterance: &str) -> Self {
        Self {
            degrees: points.iter().map(|k| (k.id.clone(), 0.0)).collect(),
            utterance_echo: utterance.to_owned(),
            warnings: Vec::new(),
        }
    }

    pub fn degree(&self, id: &str) -> f64 {
        self.degrees.get(id).copied().unwrap_or(0.0)
    }

    pub fn max_degree(&self) -> f64 {
        self.degrees.values().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPart {
    pub degree: f64,
    pub new_part: f64,
    pub old_part: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltySplit {
    pub parts: BTreeMap<String, SplitPart>,
}

impl NoveltySplit {
    pub fn new_part(&self, id: &str) -> f64 {
        self.parts.get(id).map_or(0.0, |p| p.new_part)
    }

    pub fn old_part(&self, id: &str) -> f64 {
        self.parts.get(id).map_or(0.0, |p| p.old_part)
    }
}

fn phrase_degree(utterance_tokens: &BTreeSet<String>, phrase: &str) -> f64 {
    let target = text::content_tokens(phrase);
    if target.is_empty() {
        return 0.0;
    }
    let hit = target.iter().filter(|t| utterance_tokens.contains(*t)).count();
    hit as f64 / target.len() as f64
}

/// Deterministic lexical matcher. An empty utterance scores zero everywhere.
pub fn match_utterance(utterance: &str, points: &[KeyPoint]) -> MatchReport {
    let tokens = text::content_tokens(utterance);
    let degrees = points
        .iter()
        .map(|kp| {
            let best = kp.phrasings().map(|p| phrase_degree(&tokens, p)).fold(0.0, f64::max);
            (kp.id.clone(), best)
        })
        .collect();
    MatchReport {
        degrees,
        utterance_echo: utterance.to_owned(),
        warnings: Vec::new(),
    }
}

fn check_same_ids<'a, A, B>(a: A, b: B) -> Result<(), MatchError>
where
    A: Iterator<Item = &'a String>,
    B: Iterator<Item = &'a String>,
{
    let a: BTreeSet<&String> = a.collect();
    let b: BTreeSet<&String> = b.collect();
    if a == b {
        return Ok(());
    }
    Err(MatchError::IdMismatch {
        missing: a.difference(&b).map(|s| s.to_string()).collect(),
        unexpected: b.difference(&a).map(|s| s.to_string()).collect(),
    })
}

/// `new = max(0, degree - best)` and `old = min(degree, best)` per id.
pub fn split_novelty(report: &MatchReport, best_so_far: &BTreeMap<String, f64>) -> Result<NoveltySplit, MatchError> {
    check_same_ids(report.degrees.keys(), best_so_far.keys())?;
    let parts = report
        .degrees
        .iter()
        .map(|(id, &degree)| {
            let best = best_so_far[id];
            let part = SplitPart {
                degree,
                new_part: (degree - best).max(0.0),
                old_part: degree.min(best),
            };
            (id.clone(), part)
        })
        .collect();
    Ok(NoveltySplit { parts })
}

/// Builds a report from backend-judged similarities: values are clamped into
/// `[0, 1]`, missing ids default to 0 and ids outside `points` are rejected.
pub fn llm_match_adapter(llm_scores: &BTreeMap<String, f64>, points: &[KeyPoint], utterance: &str) -> Result<MatchReport, MatchError> {
    if let Some(stray) = llm_scores.keys().find(|id| !points.iter().any(|k| &k.id == *id)) {
        return Err(MatchError::UnknownKeyPoint(stray.clone()));
    }
    let mut report = MatchReport::zeros(points, utterance);
    for (id, &raw) in llm_scores {
        let value = if raw.is_nan() { 0.0 } else { raw.clamp(0.0, 1.0) };
        if value != raw {
            report.warnings.push(format!("clamped {id} from {raw} to {value}"));
        }
        report.degrees.insert(id.clone(), value);
    }
    Ok(report)
}
