//! Authored tutoring content: scenario, seed question, weighted expectations
//! and misconceptions, and misconception/expectation pairings.

use crate::report::{IssueCode, ValidationReport};
use crate::text;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use thiserror::Error;

/// Allowed deviation of a weight list's sum from 1.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-6;
/// Scenario word count above which validation warns.
pub const SCENARIO_WORD_LIMIT: usize = 120;
pub const DEFAULT_PERSONA: &str = "Casey";

#[derive(Debug, Error)]
pub enum ContentError {
    #[error("pack is not valid JSON or has the wrong shape: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{list} weight for {id:?} must be > 0, got {weight}")]
    ZeroWeight { list: &'static str, id: String, weight: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyPoint {
    pub id: String,
    pub statement: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub weight: f64,
}

impl KeyPoint {
    pub fn new(id: impl Into<String>, statement: impl Into<String>, weight: f64) -> Self {
        Self {
            id: id.into(),
            statement: statement.into(),
            aliases: Vec::new(),
            weight,
        }
    }

    pub fn with_aliases<I, S>(mut self, aliases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.aliases = aliases.into_iter().map(Into::into).collect();
        self
    }

    /// Statement followed by every alias.
    pub fn phrasings(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.statement.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pairing {
    pub misconception_id: String,
    pub expectation_id: String,
}

impl Pairing {
    pub fn new(misconception_id: impl Into<String>, expectation_id: impl Into<String>) -> Self {
        Self {
            misconception_id: misconception_id.into(),
            expectation_id: expectation_id.into(),
        }
    }
}

/// Multiple-choice item used by Assessment mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizItem {
    pub id: String,
    pub prompt: String,
    pub choices: Vec<String>,
    pub correct_choice: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardCell {
    pub value: u32,
    /// Expectation the question probes.
    pub question_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardCategory {
    pub name: String,
    pub cells: Vec<BoardCell>,
}

/// Category/value question board for Gaming mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamingBoard {
    pub categories: Vec<BoardCategory>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscussantRole {
    /// States correct key points.
    Expert,
    /// Voices misconceptions.
    Confused,
    /// Resolves disagreements.
    Teacher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discussant {
    pub name: String,
    pub role: DiscussantRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentPack {
    pub pack_id: String,
    pub scenario: String,
    pub seed_question: String,
    pub expectations: Vec<KeyPoint>,
    #[serde(default)]
    pub misconceptions: Vec<KeyPoint>,
    #[serde(default)]
    pub pairings: Vec<Pairing>,
    pub language: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audience_level: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub quiz: Vec<QuizItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaming_board: Option<GamingBoard>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub discussants: Vec<Discussant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub persona_name: Option<String>,
}

/// How unknown JSON fields in a pack file are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    #[default]
    Strict,
    Lenient,
}

/// A decoded pack together with everything validation found.
#[derive(Debug, Clone)]
pub struct LoadedPack {
    pub pack: ContentPack,
    pub report: ValidationReport,
}

const PACK_FIELDS: &[&str] = &[
    "pack_id",
    "scenario",
    "seed_question",
    "expectations",
    "misconceptions",
    "pairings",
    "language",
    "audience_level",
    "quiz",
    "gaming_board",
    "discussants",
    "persona_name",
];
const KEY_POINT_FIELDS: &[&str] = &["id", "statement", "aliases", "weight"];
const PAIRING_FIELDS: &[&str] = &["misconception_id", "expectation_id"];

impl ContentPack {
    /// Decodes a pack file and validates it. Malformed JSON is an `Err`; every
    /// other problem lands in the returned report.
    pub fn from_json_str(input: &str, strictness: Strictness) -> Result<LoadedPack, ContentError> {
        let value: serde_json::Value = serde_json::from_str(input)?;
        let mut report = ValidationReport::new();
        scan_unknown_fields(&value, strictness, &mut report);
        let pack: ContentPack = serde_json::from_value(value)?;
        report.merge(validate_pack(&pack));
        Ok(LoadedPack { pack, report })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("pack serializes")
    }

    pub fn expectation(&self, id: &str) -> Option<&KeyPoint> {
        self.expectations.iter().find(|k| k.id == id)
    }

    pub fn misconception(&self, id: &str) -> Option<&KeyPoint> {
        self.misconceptions.iter().find(|k| k.id == id)
    }

    /// Expectations paired with `misconception_id`, in pairing-list order.
    pub fn paired_expectations<'a>(&'a self, misconception_id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.pairings
            .iter()
            .filter(move |p| p.misconception_id == misconception_id)
            .map(|p| p.expectation_id.as_str())
    }

    pub fn persona(&self) -> &str {
        self.persona_name.as_deref().unwrap_or(DEFAULT_PERSONA)
    }
}

fn scan_unknown_fields(value: &serde_json::Value, strictness: Strictness, report: &mut ValidationReport) {
    let mut flag = |location: String, key: &str| {
        let message = format!("unknown field {key:?}");
        match strictness {
            Strictness::Strict => report.error(IssueCode::UnknownField, location, message),
            Strictness::Lenient => report.warning(IssueCode::UnknownField, location, message),
        }
    };
    let Some(top) = value.as_object() else { return };
    for key in top.keys() {
        if !PACK_FIELDS.contains(&key.as_str()) {
            flag(key.clone(), key);
        }
    }
    for list in ["expectations", "misconceptions"] {
        let Some(items) = top.get(list).and_then(|v| v.as_array()) else { continue };
        for (i, item) in items.iter().enumerate() {
            let Some(obj) = item.as_object() else { continue };
            for key in obj.keys() {
                if !KEY_POINT_FIELDS.contains(&key.as_str()) {
                    flag(format!("{list}[{i}].{key}"), key);
                }
            }
        }
    }
    if let Some(items) = top.get("pairings").and_then(|v| v.as_array()) {
        for (i, item) in items.iter().enumerate() {
            let Some(obj) = item.as_object() else { continue };
            for key in obj.keys() {
                if !PAIRING_FIELDS.contains(&key.as_str()) {
                    flag(format!("pairings[{i}].{key}"), key);
                }
            }
        }
    }
}

/// Sum in ascending order so the result does not depend on list order.
fn ordered_sum(weights: impl Iterator<Item = f64>) -> f64 {
    let mut ws: Vec<f64> = weights.collect();
    ws.sort_by(f64::total_cmp);
    ws.into_iter().sum()
}

fn check_key_points(list: &'static str, points: &[KeyPoint], report: &mut ValidationReport) {
    let mut seen = HashSet::new();
    let mut duplicates = BTreeSet::new();
    for kp in points {
        let loc = format!("{list}[id={}]", kp.id);
        if kp.id.trim().is_empty() {
            report.error(IssueCode::EmptyId, loc.clone(), "key point id is empty");
        }
        if !seen.insert(kp.id.as_str()) {
            duplicates.insert(kp.id.as_str());
        }
        if kp.statement.trim().is_empty() {
            report.error(IssueCode::EmptyStatement, loc.clone(), "statement is empty");
        } else if kp.phrasings().all(|p| text::content_tokens(p).is_empty()) {
            report.warning(
                IssueCode::NoContentTokens,
                loc.clone(),
                "statement and aliases contain only stop words; the lexical matcher can never match it",
            );
        }
        if !(kp.weight > 0.0 && kp.weight <= 1.0) {
            report.error(
                IssueCode::WeightOutOfRange,
                format!("{loc}.weight"),
                format!("weight must lie in (0, 1], got {}", kp.weight),
            );
        }
    }
    for id in duplicates {
        report.error(IssueCode::DuplicateId, format!("{list}[id={id}]"), format!("id {id:?} appears more than once"));
    }
    if !points.is_empty() {
        let sum = ordered_sum(points.iter().map(|k| k.weight));
        // false for NaN, so a NaN sum is rejected
        let within = (sum - 1.0).abs() <= WEIGHT_SUM_TOLERANCE;
        if !within {
            report.error(
                IssueCode::WeightSumViolation,
                list,
                format!("weights sum to {sum}, expected 1 within {WEIGHT_SUM_TOLERANCE}"),
            );
        }
    }
}

/// Reports every violated pack invariant. Never fails and never mutates.
pub fn validate_pack(pack: &ContentPack) -> ValidationReport {
    let mut report = ValidationReport::new();

    if pack.expectations.is_empty() {
        report.error(IssueCode::EmptyExpectations, "expectations", "at least one expectation is required");
    }
    check_key_points("expectations", &pack.expectations, &mut report);
    check_key_points("misconceptions", &pack.misconceptions, &mut report);

    if pack.misconceptions.is_empty() && !pack.pairings.is_empty() {
        report.error(
            IssueCode::PairingsWithoutMisconceptions,
            "pairings",
            "pairings present but the misconception list is empty",
        );
    }
    let exp_ids: HashSet<&str> = pack.expectations.iter().map(|k| k.id.as_str()).collect();
    let mis_ids: HashSet<&str> = pack.misconceptions.iter().map(|k| k.id.as_str()).collect();
    let mut dangling = BTreeSet::new();
    for p in &pack.pairings {
        if !mis_ids.contains(p.misconception_id.as_str()) || !exp_ids.contains(p.expectation_id.as_str()) {
            dangling.insert((p.misconception_id.as_str(), p.expectation_id.as_str()));
        }
    }
    for (m, e) in dangling {
        let mut missing = Vec::new();
        if !mis_ids.contains(m) {
            missing.push(format!("misconception {m:?}"));
        }
        if !exp_ids.contains(e) {
            missing.push(format!("expectation {e:?}"));
        }
        report.error(
            IssueCode::DanglingPairing,
            format!("pairings[({m},{e})]"),
            format!("pairing references unknown {}", missing.join(" and ")),
        );
    }

    let words = pack.scenario.split_whitespace().count();
    if words > SCENARIO_WORD_LIMIT {
        report.warning(
            IssueCode::ScenarioTooLong,
            "scenario",
            format!("scenario has {words} words; keep it to about 100 (limit {SCENARIO_WORD_LIMIT})"),
        );
    }

    check_quiz(pack, &mut report);
    check_board(pack, &exp_ids, &mut report);

    report.issues.sort();
    report
}

fn check_quiz(pack: &ContentPack, report: &mut ValidationReport) {
    let mut seen = HashSet::new();
    for item in &pack.quiz {
        let loc = format!("quiz[id={}]", item.id);
        if !seen.insert(item.id.as_str()) {
            report.error(IssueCode::DuplicateId, loc.clone(), "quiz item id repeated");
        }
        if item.choices.is_empty() || item.correct_choice >= item.choices.len() {
            report.error(
                IssueCode::InvalidQuizItem,
                loc,
                format!("correct_choice {} is not an index into {} choices", item.correct_choice, item.choices.len()),
            );
        }
    }
}

fn check_board(pack: &ContentPack, exp_ids: &HashSet<&str>, report: &mut ValidationReport) {
    let Some(board) = &pack.gaming_board else { return };
    if board.categories.is_empty() {
        report.error(IssueCode::InvalidGamingBoard, "gaming_board", "board has no categories");
    }
    for cat in &board.categories {
        let loc = format!("gaming_board[{}]", cat.name);
        if cat.cells.is_empty() {
            report.error(IssueCode::InvalidGamingBoard, loc.clone(), "category has no cells");
        }
        for cell in &cat.cells {
            if cell.value == 0 {
                report.error(IssueCode::InvalidGamingBoard, format!("{loc}.{}", cell.value), "cell value must be positive");
            }
            if !exp_ids.contains(cell.question_id.as_str()) {
                report.error(
                    IssueCode::InvalidGamingBoard,
                    format!("{loc}.{}", cell.value),
                    format!("question_id {:?} is not an expectation id", cell.question_id),
                );
            }
        }
    }
}

fn normalize_list(list: &'static str, points: &[KeyPoint]) -> Result<Vec<KeyPoint>, ContentError> {
    if let Some(bad) = points.iter().find(|k| {
        let positive = k.weight > 0.0;
        !positive
    }) {
        return Err(ContentError::ZeroWeight {
            list,
            id: bad.id.clone(),
            weight: bad.weight,
        });
    }
    let sum = ordered_sum(points.iter().map(|k| k.weight));
    Ok(points
        .iter()
        .map(|k| KeyPoint {
            weight: k.weight / sum,
            ..k.clone()
        })
        .collect())
}

/// Rescales each weight list independently so it sums to 1.
pub fn normalize_weights(pack: &ContentPack) -> Result<ContentPack, ContentError> {
    Ok(ContentPack {
        expectations: normalize_list("expectations", &pack.expectations)?,
        misconceptions: normalize_list("misconceptions", &pack.misconceptions)?,
        ..pack.clone()
    })
}

/// Weight lookup keyed by id, in list order for deterministic iteration.
pub fn weights(points: &[KeyPoint]) -> BTreeMap<String, f64> {
    points.iter().map(|k| (k.id.clone(), k.weight)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Severity;

    fn pack(exp: &[f64], mis: &[f64]) -> ContentPack {
        ContentPack {
            pack_id: "p".into(),
            scenario: "A car hits a wall.".into(),
            seed_question: "What role do seatbelts play?".into(),
            expectations: exp
                .iter()
                .enumerate()
                .map(|(i, w)| KeyPoint::new(format!("e{}", i + 1), format!("expectation number {}", i + 1), *w))
                .collect(),
            misconceptions: mis
                .iter()
                .enumerate()
                .map(|(i, w)| KeyPoint::new(format!("m{}", i + 1), format!("misconception number {}", i + 1), *w))
                .collect(),
            pairings: Vec::new(),
            language: "en".into(),
            audience_level: None,
            quiz: Vec::new(),
            gaming_board: None,
            discussants: Vec::new(),
            persona_name: None,
        }
    }

    #[test]
    fn figure_weights_validate() {
        let mut p = pack(&[0.5, 0.3, 0.2], &[0.6, 0.4]);
        p.pairings = vec![Pairing::new("m1", "e1"), Pairing::new("m2", "e2")];
        let r = validate_pack(&p);
        assert!(r.ok, "{r}");
        assert!(r.issues.is_empty());
    }

    #[test]
    fn overweight_sum_is_error() {
        let r = validate_pack(&pack(&[0.5, 0.6], &[]));
        assert!(!r.ok);
        assert!(r.has(IssueCode::WeightSumViolation));
    }

    #[test]
    fn dangling_pairing_is_error() {
        let mut p = pack(&[1.0], &[1.0]);
        p.pairings = vec![Pairing::new("m9", "e1")];
        let r = validate_pack(&p);
        assert!(!r.ok);
        let issue = r.errors().find(|i| i.code == IssueCode::DanglingPairing).unwrap();
        assert!(issue.message.contains("m9"));
    }

    #[test]
    fn pairings_need_misconceptions() {
        let mut p = pack(&[1.0], &[]);
        assert!(validate_pack(&p).ok);
        p.pairings = vec![Pairing::new("m1", "e1")];
        let r = validate_pack(&p);
        assert!(r.has(IssueCode::PairingsWithoutMisconceptions));
        assert!(r.has(IssueCode::DanglingPairing));
    }

    #[test]
    fn long_scenario_only_warns() {
        let mut p = pack(&[1.0], &[1.0]);
        p.scenario = vec!["word"; 121].join(" ");
        let r = validate_pack(&p);
        assert!(r.ok);
        assert_eq!(r.issues.len(), 1);
        assert_eq!(r.issues[0].severity, Severity::Warning);
        assert_eq!(r.issues[0].code, IssueCode::ScenarioTooLong);
        p.scenario = vec!["word"; 120].join(" ");
        assert!(validate_pack(&p).issues.is_empty());
    }

    #[test]
    fn duplicate_and_empty_fields() {
        let mut p = pack(&[0.5, 0.5], &[]);
        p.expectations[1].id = "e1".into();
        p.expectations[0].statement = "  ".into();
        let r = validate_pack(&p);
        assert!(r.has(IssueCode::DuplicateId));
        assert!(r.has(IssueCode::EmptyStatement));
        assert!(validate_pack(&pack(&[], &[])).has(IssueCode::EmptyExpectations));
    }

    #[test]
    fn weight_range_checked() {
        let r = validate_pack(&pack(&[1.5, -0.5], &[]));
        assert_eq!(r.errors().filter(|i| i.code == IssueCode::WeightOutOfRange).count(), 2);
    }

    #[test]
    fn normalize_examples() {
        let n = normalize_weights(&pack(&[1.0, 1.0], &[])).unwrap();
        assert_eq!(n.expectations.iter().map(|k| k.weight).collect::<Vec<_>>(), vec![0.5, 0.5]);

        let n = normalize_weights(&pack(&[0.5, 0.3, 0.2], &[0.6, 0.4])).unwrap();
        let ws: Vec<f64> = n.expectations.iter().map(|k| k.weight).collect();
        for (got, want) in ws.iter().zip([0.5, 0.3, 0.2]) {
            assert!((got - want).abs() < 1e-15);
        }

        let n = normalize_weights(&pack(&[2.0, 3.0, 5.0], &[])).unwrap();
        let ws: Vec<f64> = n.expectations.iter().map(|k| k.weight).collect();
        // 2/10, 3/10, 5/10, and the result re-sums to 1
        for (got, want) in ws.iter().zip([0.2, 0.3, 0.5]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((ws.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_rejects_zero() {
        let err = normalize_weights(&pack(&[1.0, 0.0], &[])).unwrap_err();
        assert!(matches!(err, ContentError::ZeroWeight { ref id, .. } if id == "e2"));
    }

    #[test]
    fn unknown_fields_by_strictness() {
        let mut v = serde_json::to_value(pack(&[1.0], &[1.0])).unwrap();
        v["colour"] = "blue".into();
        v["expectations"][0]["hint"] = "x".into();
        let text = v.to_string();
        let strict = ContentPack::from_json_str(&text, Strictness::Strict).unwrap();
        assert!(!strict.report.ok);
        assert_eq!(strict.report.errors().filter(|i| i.code == IssueCode::UnknownField).count(), 2);
        let lenient = ContentPack::from_json_str(&text, Strictness::Lenient).unwrap();
        assert!(lenient.report.ok);
        assert_eq!(lenient.report.warnings().count(), 2);
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(
            ContentPack::from_json_str("{ nope", Strictness::Strict),
            Err(ContentError::Parse(_))
        ));
    }

    #[test]
    fn board_must_reference_expectations() {
        let mut p = pack(&[1.0], &[]);
        p.gaming_board = Some(GamingBoard {
            categories: vec![BoardCategory {
                name: "Basics".into(),
                cells: vec![BoardCell { value: 100, question_id: "e1".into() }, BoardCell { value: 0, question_id: "zz".into() }],
            }],
        });
        let r = validate_pack(&p);
        assert_eq!(r.errors().filter(|i| i.code == IssueCode::InvalidGamingBoard).count(), 2);
    }
}
