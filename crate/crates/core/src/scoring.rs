//! LCC turn scoring: relevant/irrelevant by new/old, accumulated
//! contributions, overall score and completion.
//!
//! Accumulation keeps the best degree seen per key point and weights it, so a
//! repeated point is acknowledged as relevant-old without adding weight again.

use crate::content::{ContentPack, KeyPoint};
use crate::matcher::{MatchError, NoveltySplit};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Overall score a session must strictly exceed to complete.
pub const COMPLETION_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    #[default]
    Active,
    Done,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Active => "ACTIVE",
            Status::Done => "DONE",
        })
    }
}

/// One key point's share of a turn. `new` and `old` are weight-scaled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointContribution {
    pub weight: f64,
    pub degree: f64,
    pub new: f64,
    pub old: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerPoint {
    pub expectations: BTreeMap<String, PointContribution>,
    pub misconceptions: BTreeMap<String, PointContribution>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TurnScore {
    pub rn: f64,
    pub ro: f64,
    #[serde(rename = "in")]
    pub in_: f64,
    pub io: f64,
    #[serde(default)]
    pub per_point: PerPoint,
}

impl TurnScore {
    /// A turn that matched nothing, covering every key point of `pack`.
    pub fn empty(pack: &ContentPack) -> Self {
        let zero = |points: &[KeyPoint]| {
            points
                .iter()
                .map(|k| {
                    let c = PointContribution {
                        weight: k.weight,
                        degree: 0.0,
                        new: 0.0,
                        old: 0.0,
                    };
                    (k.id.clone(), c)
                })
                .collect()
        };
        Self {
            per_point: PerPoint {
                expectations: zero(&pack.expectations),
                misconceptions: zero(&pack.misconceptions),
            },
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreState {
    pub best_correct: BTreeMap<String, f64>,
    pub best_wrong: BTreeMap<String, f64>,
    pub accumulated_correct: f64,
    pub accumulated_wrong: f64,
    pub overall: f64,
    pub status: Status,
}

impl ScoreState {
    pub fn new(pack: &ContentPack) -> Self {
        Self {
            best_correct: pack.expectations.iter().map(|k| (k.id.clone(), 0.0)).collect(),
            best_wrong: pack.misconceptions.iter().map(|k| (k.id.clone(), 0.0)).collect(),
            ..Self::default()
        }
    }

    pub fn is_done(&self) -> bool {
        self.status == Status::Done
    }
}

fn contributions(split: &NoveltySplit, points: &[KeyPoint]) -> Result<(f64, f64, BTreeMap<String, PointContribution>), MatchError> {
    let missing: Vec<String> = points
        .iter()
        .filter(|k| !split.parts.contains_key(&k.id))
        .map(|k| k.id.clone())
        .collect();
    let unexpected: Vec<String> = split
        .parts
        .keys()
        .filter(|id| !points.iter().any(|k| &k.id == *id))
        .cloned()
        .collect();
    if !missing.is_empty() || !unexpected.is_empty() {
        return Err(MatchError::IdMismatch { missing, unexpected });
    }
    let mut new_sum = 0.0;
    let mut old_sum = 0.0;
    let mut per_point = BTreeMap::new();
    for kp in points {
        let part = split.parts[&kp.id];
        let c = PointContribution {
            weight: kp.weight,
            degree: part.degree,
            new: kp.weight * part.new_part,
            old: kp.weight * part.old_part,
        };
        new_sum += c.new;
        old_sum += c.old;
        per_point.insert(kp.id.clone(), c);
    }
    Ok((new_sum, old_sum, per_point))
}

/// Weight-scaled LCC categories for one turn.
pub fn score_turn(exp_split: &NoveltySplit, mis_split: &NoveltySplit, pack: &ContentPack) -> Result<TurnScore, MatchError> {
    let (rn, ro, expectations) = contributions(exp_split, &pack.expectations)?;
    let (in_, io, misconceptions) = contributions(mis_split, &pack.misconceptions)?;
    Ok(TurnScore {
        rn,
        ro,
        in_,
        io,
        per_point: PerPoint {
            expectations,
            misconceptions,
        },
    })
}

fn raise_and_weigh(best: &mut BTreeMap<String, f64>, points: &BTreeMap<String, PointContribution>) -> f64 {
    let mut acc = 0.0;
    for (id, c) in points {
        let slot = best.entry(id.clone()).or_insert(0.0);
        *slot = slot.max(c.degree);
        acc += c.weight * *slot;
    }
    acc.clamp(0.0, 1.0)
}

/// Folds a turn into the running state. DONE never reverts.
pub fn update_state(state: &ScoreState, turn: &TurnScore) -> ScoreState {
    let mut next = state.clone();
    next.accumulated_correct = raise_and_weigh(&mut next.best_correct, &turn.per_point.expectations);
    next.accumulated_wrong = raise_and_weigh(&mut next.best_wrong, &turn.per_point.misconceptions);
    next.overall = next.accumulated_correct - next.accumulated_wrong;
    next.status = check_completion(&next);
    next
}

pub fn check_completion(state: &ScoreState) -> Status {
    if state.status == Status::Done || state.overall > COMPLETION_THRESHOLD {
        Status::Done
    } else {
        Status::Active
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LccRow {
    pub turn: usize,
    pub rn: f64,
    pub ro: f64,
    #[serde(rename = "in")]
    pub in_: f64,
    pub io: f64,
    pub acc_correct: f64,
    pub acc_wrong: f64,
    pub overall: f64,
    pub status: Status,
}

pub const LCC_CSV_HEADER: &str = "turn,rn,ro,in,io,acc_correct,acc_wrong,overall,status";

/// One row per turn with the running accumulated values.
pub fn lcc_table(transcript: &[TurnScore]) -> Vec<LccRow> {
    let mut state = ScoreState::default();
    transcript
        .iter()
        .enumerate()
        .map(|(turn, ts)| {
            state = update_state(&state, ts);
            LccRow {
                turn,
                rn: ts.rn,
                ro: ts.ro,
                in_: ts.in_,
                io: ts.io,
                acc_correct: state.accumulated_correct,
                acc_wrong: state.accumulated_wrong,
                overall: state.overall,
                status: state.status,
            }
        })
        .collect()
}

pub fn lcc_csv(rows: &[LccRow]) -> String {
    let mut out = String::from(LCC_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}\n",
            r.turn, r.rn, r.ro, r.in_, r.io, r.acc_correct, r.acc_wrong, r.overall, r.status
        ));
    }
    out
}
