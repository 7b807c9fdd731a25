//! System-prompt instantiation and the tutor-response wire protocol.
//!
//! Backends are asked for a single pure-JSON object. Real models still wrap
//! replies in code fences, add a sentence before or after the object, or leave
//! trailing commas, so parsing runs a fixed repair pipeline when a strict
//! parse fails, then validates the shape.

use crate::content::ContentPack;
use crate::report::{IssueCode, ValidationReport};
use crate::scoring::{Status, TurnScore};
use crate::text;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::BTreeMap;
use thiserror::Error;

pub const PROMPT_TEMPLATE_VERSION: &str = "tutor-prompt/v1";
pub const RESPONSE_SCHEMA_VERSION: &str = "tutor-response/v1";

const PROMPT_TEMPLATE: &str = include_str!("../protocol/tutor_prompt.v1.json");
const CONTEXT_BLOCK: &str = include_str!("../protocol/context_block.v1.txt");
/// Published JSON Schema for [`TutorResponse`].
pub const RESPONSE_SCHEMA: &str = include_str!("../protocol/tutor_response.schema.v1.json");

const CONTEXT_HOOK: &str = "${Consider_Context()}";
const LANGUAGE_HOOK: &str = "${theLang}";

pub const TEXT_FIELDS: [&str; 4] = ["feedback_brief", "feedback_detailed", "follow_up", "justification"];

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("placeholder {0:?} left unexpanded")]
    UnresolvedPlaceholder(String),
    #[error("prompt template is malformed: {0}")]
    BadTemplate(String),
    #[error("backend output is not JSON even after repair: {reason}")]
    UnparseableOutput { raw: String, reason: String },
    #[error("backend output does not match the tutor response schema")]
    SchemaViolation { raw: String, report: ValidationReport },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSnapshot {
    pub turn: TurnScore,
    pub accumulated_correct: f64,
    pub accumulated_wrong: f64,
    pub overall: f64,
}

/// The structured reply shown to the learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TutorResponse {
    pub feedback_brief: String,
    pub feedback_detailed: String,
    pub follow_up: String,
    pub justification: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<ScoreSnapshot>,
    #[serde(default)]
    pub status: Status,
    /// Backend-judged similarity per expectation id (live matching only).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub expectation_matches: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub misconception_matches: BTreeMap<String, f64>,
}

impl TutorResponse {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("response serializes")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputMetadata {
    pub backend_id: String,
    pub latency_ms: u64,
    pub retries: u32,
}

/// Text as it came back from a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawBackendOutput {
    pub text: String,
    pub metadata: OutputMetadata,
}

impl RawBackendOutput {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            metadata: OutputMetadata::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedResponse {
    pub response: TutorResponse,
    /// Repairs applied and values clamped, for logging.
    pub warnings: Vec<String>,
}

/// The instruction document with its two placeholders.
#[derive(Debug, Clone)]
pub struct PromptTemplate {
    template_text: String,
    context_block: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self::bundled()
    }
}

impl PromptTemplate {
    pub fn bundled() -> Self {
        Self {
            template_text: PROMPT_TEMPLATE.to_owned(),
            context_block: CONTEXT_BLOCK.to_owned(),
        }
    }

    pub fn new(template_text: impl Into<String>, context_block: impl Into<String>) -> Self {
        Self {
            template_text: template_text.into(),
            context_block: context_block.into(),
        }
    }

    pub fn template_text(&self) -> &str {
        &self.template_text
    }

    fn context_lines(&self, pack: &ContentPack) -> Vec<String> {
        self.context_block
            .lines()
            .filter_map(|line| {
                if line.contains("{audience}") {
                    let level = pack.audience_level.as_deref()?;
                    return Some(line.replace("{audience}", level));
                }
                Some(line.replace("{scenario}", &pack.scenario))
            })
            .filter(|l| !l.trim().is_empty())
            .collect()
    }

    pub fn instantiate(&self, pack: &ContentPack) -> Result<String, ProtocolError> {
        let mut doc: Value = serde_json::from_str(&self.template_text).map_err(|e| ProtocolError::BadTemplate(e.to_string()))?;
        let initial = doc
            .get_mut("Initial_Interaction")
            .and_then(Value::as_object_mut)
            .ok_or_else(|| ProtocolError::BadTemplate("missing Initial_Interaction".into()))?;

        let context = self.context_lines(pack);
        for section in initial.values_mut() {
            let Some(lines) = section.as_array_mut() else { continue };
            if let Some(pos) = lines.iter().position(|v| v.as_str() == Some(CONTEXT_HOOK)) {
                lines.splice(pos..=pos, context.iter().cloned().map(Value::String));
            }
        }
        let mut append = |section: &str, extra: Vec<String>| {
            if let Some(lines) = initial.get_mut(section).and_then(Value::as_array_mut) {
                lines.extend(extra.into_iter().map(Value::String));
            }
        };
        append("Seed_Question", vec![format!("Seed question: {}", pack.seed_question)]);
        append(
            "Expectations",
            pack.expectations
                .iter()
                .map(|k| format!("{} (weight {}): {}", k.id, k.weight, k.statement))
                .collect(),
        );
        append(
            "Misconceptions",
            pack.misconceptions
                .iter()
                .map(|k| format!("{} (weight {}): {}", k.id, k.weight, k.statement))
                .collect(),
        );
        append(
            "Pairing",
            pack.pairings
                .iter()
                .map(|p| format!("{} is corrected by {}", p.misconception_id, p.expectation_id))
                .collect(),
        );

        replace_in_strings(&mut doc, LANGUAGE_HOOK, &pack.language);
        let rendered = serde_json::to_string_pretty(&doc).expect("prompt serializes");
        if let Some(start) = rendered.find("${") {
            let end = rendered[start..].find('}').map_or(rendered.len(), |e| start + e + 1);
            return Err(ProtocolError::UnresolvedPlaceholder(rendered[start..end].to_owned()));
        }
        Ok(rendered)
    }
}

fn replace_in_strings(value: &mut Value, from: &str, to: &str) {
    match value {
        Value::String(s) if s.contains(from) => *s = s.replace(from, to),
        Value::Array(items) => items.iter_mut().for_each(|v| replace_in_strings(v, from, to)),
        Value::Object(map) => map.values_mut().for_each(|v| replace_in_strings(v, from, to)),
        _ => {}
    }
}

/// Renders the bundled instruction document for `pack`.
pub fn assemble_system_prompt(pack: &ContentPack) -> Result<String, ProtocolError> {
    PromptTemplate::bundled().instantiate(pack)
}

/// Drops a surrounding code fence. Only fences at the start of a line count,
/// which cannot occur inside a JSON string.
fn strip_code_fences(input: &str) -> Option<String> {
    let mut inside = Vec::new();
    let mut state = 0; // 0 before, 1 inside, 2 after
    for line in input.lines() {
        let fence = line.trim_start().starts_with("```");
        match (state, fence) {
            (0, true) => state = 1,
            (1, true) => state = 2,
            (1, false) => inside.push(line),
            _ => {}
        }
    }
    (state > 0).then(|| inside.join("\n"))
}

fn trim_to_braces(input: &str) -> Option<&str> {
    let start = input.find('{')?;
    let end = input.rfind('}')?;
    (end > start && (start > 0 || end + 1 < input.len())).then(|| &input[start..=end])
}

fn remove_trailing_commas(input: &str) -> Option<String> {
    let chars: Vec<char> = input.chars().collect();
    let mut out = String::with_capacity(input.len());
    let mut in_string = false;
    let mut escaped = false;
    let mut changed = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            out.push(c);
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_string = false,
                _ => {}
            }
            continue;
        }
        if c == '"' {
            in_string = true;
        } else if c == ',' {
            let next = chars[i + 1..].iter().find(|n| !n.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                changed = true;
                continue;
            }
        }
        out.push(c);
    }
    changed.then_some(out)
}

/// Applies every repair step in order, recording which ones changed the text.
pub fn repair(input: &str) -> (String, Vec<String>) {
    let mut text = input.to_owned();
    let mut applied = Vec::new();
    if let Some(inner) = strip_code_fences(&text) {
        text = inner;
        applied.push("stripped code fence".to_owned());
    }
    if let Some(inner) = trim_to_braces(&text) {
        text = inner.to_owned();
        applied.push("trimmed text outside the outermost braces".to_owned());
    }
    if let Some(cleaned) = remove_trailing_commas(&text) {
        text = cleaned;
        applied.push("removed trailing commas".to_owned());
    }
    (text, applied)
}

fn third_person(text_value: &str) -> bool {
    let toks = text::tokens(text_value);
    toks.windows(2)
        .any(|w| w[0] == "the" && matches!(w[1].as_str(), "learner" | "learners" | "student" | "students" | "user"))
}

/// Shape check for a decoded tutor response document.
pub fn validate_response_schema(candidate: &Value) -> ValidationReport {
    let mut report = ValidationReport::new();
    let Some(obj) = candidate.as_object() else {
        report.error(IssueCode::InvalidType, "$", "tutor response must be a JSON object");
        return report;
    };
    for field in TEXT_FIELDS {
        match obj.get(field) {
            None => report.error(IssueCode::MissingField, field, format!("MissingField({field})")),
            Some(Value::String(s)) if s.trim().is_empty() => report.error(IssueCode::EmptyField, field, "text field is empty"),
            Some(Value::String(s)) => {
                if third_person(s) {
                    report.warning(IssueCode::ThirdPerson, field, "text seems to refer to the learner in the third person");
                }
            }
            Some(_) => report.error(IssueCode::InvalidType, field, "expected a string"),
        }
    }
    match obj.get("status") {
        None | Some(Value::Null) => {}
        Some(Value::String(s)) if s == "ACTIVE" || s == "DONE" => {}
        Some(Value::String(s)) => report.error(IssueCode::InvalidStatus, "status", format!("status {s:?} is not ACTIVE or DONE")),
        Some(_) => report.error(IssueCode::InvalidType, "status", "expected a string"),
    }
    match obj.get("scores") {
        None | Some(Value::Null) | Some(Value::Object(_)) => {}
        Some(_) => report.error(IssueCode::InvalidType, "scores", "expected an object"),
    }
    for field in ["expectation_matches", "misconception_matches"] {
        match obj.get(field) {
            None | Some(Value::Null) => {}
            Some(Value::Object(m)) => {
                for (k, v) in m {
                    if !v.is_number() {
                        report.error(IssueCode::InvalidType, format!("{field}.{k}"), "expected a number");
                    }
                }
            }
            Some(_) => report.error(IssueCode::InvalidType, field, "expected an object"),
        }
    }
    report
}

fn clamp_into(value: &mut f64, lo: f64, hi: f64, label: &str, warnings: &mut Vec<String>) {
    let clamped = if value.is_nan() { lo } else { value.clamp(lo, hi) };
    if clamped != *value {
        warnings.push(format!("clamped {label} from {value} to {clamped}"));
        *value = clamped;
    }
}

fn clamp_scores(scores: &mut ScoreSnapshot, warnings: &mut Vec<String>) {
    let t = &mut scores.turn;
    clamp_into(&mut t.rn, 0.0, 1.0, "scores.turn.rn", warnings);
    clamp_into(&mut t.ro, 0.0, 1.0, "scores.turn.ro", warnings);
    clamp_into(&mut t.in_, 0.0, 1.0, "scores.turn.in", warnings);
    clamp_into(&mut t.io, 0.0, 1.0, "scores.turn.io", warnings);
    for (list, points) in [("expectations", &mut t.per_point.expectations), ("misconceptions", &mut t.per_point.misconceptions)] {
        for (id, c) in points.iter_mut() {
            for (name, v) in [("weight", &mut c.weight), ("degree", &mut c.degree), ("new", &mut c.new), ("old", &mut c.old)] {
                clamp_into(v, 0.0, 1.0, &format!("scores.turn.per_point.{list}.{id}.{name}"), warnings);
            }
        }
    }
    clamp_into(&mut scores.accumulated_correct, 0.0, 1.0, "scores.accumulated_correct", warnings);
    clamp_into(&mut scores.accumulated_wrong, 0.0, 1.0, "scores.accumulated_wrong", warnings);
    clamp_into(&mut scores.overall, -1.0, 1.0, "scores.overall", warnings);
}

/// Strict parse, then repair and re-parse, then schema validation.
pub fn parse_tutor_json(raw: &RawBackendOutput) -> Result<ParsedResponse, ProtocolError> {
    let mut warnings = Vec::new();
    let value: Value = match serde_json::from_str(&raw.text) {
        Ok(v) => v,
        Err(first) => {
            let (repaired, applied) = repair(&raw.text);
            match serde_json::from_str(&repaired) {
                Ok(v) => {
                    warnings.extend(applied);
                    v
                }
                Err(second) => {
                    let reason = if applied.is_empty() {
                        first.to_string()
                    } else {
                        format!("{first}; after repair: {second}")
                    };
                    return Err(ProtocolError::UnparseableOutput {
                        raw: raw.text.clone(),
                        reason,
                    });
                }
            }
        }
    };
    let report = validate_response_schema(&value);
    if !report.ok {
        return Err(ProtocolError::SchemaViolation {
            raw: raw.text.clone(),
            report,
        });
    }
    warnings.extend(report.warnings().map(|i| i.to_string()));
    let mut response: TutorResponse = serde_json::from_value(value).map_err(|e| {
        let mut report = ValidationReport::new();
        report.error(IssueCode::InvalidType, "scores", e.to_string());
        ProtocolError::SchemaViolation {
            raw: raw.text.clone(),
            report,
        }
    })?;
    if let Some(scores) = response.scores.as_mut() {
        clamp_scores(scores, &mut warnings);
    }
    Ok(ParsedResponse { response, warnings })
}
