//! Issue reports shared by pack validation and tutor-response validation.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IssueCode {
    // content packs
    WeightSumViolation,
    WeightOutOfRange,
    DuplicateId,
    EmptyId,
    EmptyStatement,
    EmptyExpectations,
    PairingsWithoutMisconceptions,
    DanglingPairing,
    ScenarioTooLong,
    NoContentTokens,
    UnknownField,
    InvalidGamingBoard,
    InvalidQuizItem,
    MalformedJson,
    // tutor responses
    MissingField,
    InvalidType,
    EmptyField,
    InvalidStatus,
    ThirdPerson,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Issue {
    pub code: IssueCode,
    pub severity: Severity,
    pub message: String,
    /// Dotted path to the offending element, e.g. `expectations[2].weight`.
    pub location: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev} {:?} at {}: {}", self.code, self.location, self.message)
    }
}

/// `ok` is true iff no error-severity issue is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl Default for ValidationReport {
    fn default() -> Self {
        Self {
            ok: true,
            issues: Vec::new(),
        }
    }
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, code: IssueCode, severity: Severity, location: impl Into<String>, message: impl Into<String>) {
        if severity == Severity::Error {
            self.ok = false;
        }
        self.issues.push(Issue {
            code,
            severity,
            message: message.into(),
            location: location.into(),
        });
    }

    pub fn error(&mut self, code: IssueCode, location: impl Into<String>, message: impl Into<String>) {
        self.push(code, Severity::Error, location, message);
    }

    pub fn warning(&mut self, code: IssueCode, location: impl Into<String>, message: impl Into<String>) {
        self.push(code, Severity::Warning, location, message);
    }

    pub fn merge(&mut self, other: ValidationReport) {
        self.ok &= other.ok;
        self.issues.extend(other.issues);
    }

    pub fn has(&self, code: IssueCode) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ok: {}", self.ok)?;
        for issue in &self.issues {
            writeln!(f, "  {issue}")?;
        }
        Ok(())
    }
}
