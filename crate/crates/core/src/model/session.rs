use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDateTime, Timelike, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{ExamId, QuestionId, QuestionKind, ResultId};
use crate::points::Points;

/// Upper bound on the text of one essay answer.
pub const MAX_ESSAY_BYTES: usize = 65_535;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// A second-resolution wall-clock time, rendered `YYYY-MM-DD HH:MM:SS`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(NaiveDateTime);

impl Timestamp {
    pub fn now() -> Self {
        Timestamp::from_naive(Utc::now().naive_utc())
    }

    /// Drops sub-second precision.
    pub fn from_naive(t: NaiveDateTime) -> Self {
        Timestamp(t.with_nanosecond(0).expect("zero nanoseconds is always valid"))
    }

    pub fn as_naive(&self) -> NaiveDateTime {
        self.0
    }

    pub fn plus_seconds(self, secs: i64) -> Self {
        Timestamp(self.0 + chrono::Duration::seconds(secs))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format(TIMESTAMP_FORMAT))
    }
}

impl fmt::Debug for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Timestamp({self})")
    }
}

impl FromStr for Timestamp {
    type Err = chrono::ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT).map(Timestamp)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Identity fields collected on the form before an exam starts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentDetails {
    pub first_name: String,
    pub second_name: String,
    /// Student registry number.
    pub am: String,
    /// Year of study.
    #[serde(default)]
    pub etos_spoudon: String,
    /// Department.
    #[serde(default)]
    pub tmima: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{field}: {reason}")]
pub struct StudentDetailsError {
    pub field: &'static str,
    pub reason: &'static str,
}

impl StudentDetails {
    /// Column widths of the results table, in characters.
    pub const LIMITS: [(&'static str, usize, bool); 5] = [
        ("first_name", 50, true),
        ("second_name", 50, true),
        ("am", 10, true),
        ("etos_spoudon", 20, false),
        ("tmima", 100, false),
    ];

    fn fields(&self) -> [&str; 5] {
        [
            &self.first_name,
            &self.second_name,
            &self.am,
            &self.etos_spoudon,
            &self.tmima,
        ]
    }

    pub fn validate(&self) -> Result<(), StudentDetailsError> {
        for ((field, max, required), value) in Self::LIMITS.iter().zip(self.fields()) {
            if *required && value.trim().is_empty() {
                return Err(StudentDetailsError {
                    field,
                    reason: "must not be empty",
                });
            }
            if value.chars().count() > *max {
                return Err(StudentDetailsError {
                    field,
                    reason: "too long",
                });
            }
            if value.chars().any(char::is_control) {
                return Err(StudentDetailsError {
                    field,
                    reason: "must not contain control characters",
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionStatus {
    Open,
    Finalized,
    Checked,
}

impl SessionStatus {
    pub const ALL: [SessionStatus; 3] = [
        SessionStatus::Open,
        SessionStatus::Finalized,
        SessionStatus::Checked,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SessionStatus::Open => "Open",
            SessionStatus::Finalized => "Finalized",
            SessionStatus::Checked => "Checked",
        }
    }

    /// The lifecycle has exactly two edges: Open→Finalized and Finalized→Checked.
    pub fn can_transition_to(self, next: SessionStatus) -> bool {
        matches!(
            (self, next),
            (SessionStatus::Open, SessionStatus::Finalized)
                | (SessionStatus::Finalized, SessionStatus::Checked)
        )
    }
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SessionStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SessionStatus::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown status {s:?}"))
    }
}

/// Maps display slot → original option index. Always a bijection on `0..4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u8; 4]", into = "[u8; 4]")]
pub struct OptionPermutation([u8; 4]);

impl OptionPermutation {
    pub const IDENTITY: OptionPermutation = OptionPermutation([0, 1, 2, 3]);

    pub fn new(slots: [u8; 4]) -> Option<Self> {
        let mut seen = [false; 4];
        for &s in &slots {
            if s > 3 || std::mem::replace(&mut seen[s as usize], true) {
                return None;
            }
        }
        Some(OptionPermutation(slots))
    }

    pub fn as_array(&self) -> [u8; 4] {
        self.0
    }

    /// Original option index shown at `slot`.
    pub fn original_at(&self, slot: u8) -> Option<u8> {
        self.0.get(slot as usize).copied()
    }

    /// Display slot where original option `index` appears.
    pub fn slot_of(&self, index: u8) -> Option<u8> {
        self.0.iter().position(|&o| o == index).map(|p| p as u8)
    }

    pub fn inverse(&self) -> OptionPermutation {
        let mut inv = [0u8; 4];
        for (slot, &orig) in self.0.iter().enumerate() {
            inv[orig as usize] = slot as u8;
        }
        OptionPermutation(inv)
    }

    /// `(self ∘ other)[i] = self[other[i]]`.
    pub fn compose(&self, other: &OptionPermutation) -> OptionPermutation {
        OptionPermutation(other.0.map(|i| self.0[i as usize]))
    }
}

impl TryFrom<[u8; 4]> for OptionPermutation {
    type Error = String;

    fn try_from(v: [u8; 4]) -> Result<Self, Self::Error> {
        OptionPermutation::new(v).ok_or_else(|| format!("{v:?} is not a permutation of 0..4"))
    }
}

impl From<OptionPermutation> for [u8; 4] {
    fn from(p: OptionPermutation) -> [u8; 4] {
        p.0
    }
}

/// One question bound to a session at start, with its answer key snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignedQuestion {
    pub question_id: QuestionId,
    pub display_order: u32,
    pub kind: QuestionKind,
    /// Present exactly for multiple-choice questions.
    pub option_permutation: Option<OptionPermutation>,
    /// Correct original option index copied from the bank at start.
    pub answer_key: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Answer {
    /// Chosen original option index.
    McChoice(u8),
    EssayText(String),
    Blank,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EssayGrade {
    pub points: Points,
    pub grader: String,
}

/// One student's attempt at an exam; one row of the results table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamSession {
    pub result_id: ResultId,
    pub exam_id: ExamId,
    pub student: StudentDetails,
    pub assignment: Vec<AssignedQuestion>,
    pub answers: BTreeMap<QuestionId, Answer>,
    pub essay_grades: BTreeMap<QuestionId, EssayGrade>,
    pub status: SessionStatus,
    pub time_started: Timestamp,
    pub time_submitted: Option<Timestamp>,
    pub successful: bool,
    pub final_score: Option<Points>,
}

impl ExamSession {
    pub fn assigned(&self, id: QuestionId) -> Option<&AssignedQuestion> {
        self.assignment.iter().find(|a| a.question_id == id)
    }

    /// Assigned questions in display order.
    pub fn in_display_order(&self) -> Vec<&AssignedQuestion> {
        let mut v: Vec<_> = self.assignment.iter().collect();
        v.sort_by_key(|a| a.display_order);
        v
    }

    pub fn essay_ids(&self) -> impl Iterator<Item = QuestionId> + '_ {
        self.assignment
            .iter()
            .filter(|a| a.kind == QuestionKind::Essay)
            .map(|a| a.question_id)
    }

    /// Checks the structural invariants tying status, answers and grades together.
    pub fn check_invariants(&self) -> Result<(), &'static str> {
        match self.status {
            SessionStatus::Open => {
                if !self.answers.is_empty() {
                    return Err("open session has answers");
                }
                if self.time_submitted.is_some() {
                    return Err("open session has a submission time");
                }
            }
            SessionStatus::Finalized | SessionStatus::Checked => {
                if self.time_submitted.is_none() {
                    return Err("submitted session lacks a submission time");
                }
            }
        }
        if self.status == SessionStatus::Checked {
            if self.essay_ids().any(|id| !self.essay_grades.contains_key(&id)) {
                return Err("checked session has ungraded essays");
            }
            if self.final_score.is_none() {
                return Err("checked session lacks a final score");
            }
        }
        let in_assignment = |id: &QuestionId| self.assigned(*id).is_some();
        if !self.answers.keys().all(in_assignment) || !self.essay_grades.keys().all(in_assignment) {
            return Err("answer or grade for a question outside the assignment");
        }
        for a in &self.assignment {
            let mc = a.kind == QuestionKind::MultipleChoice;
            if mc != a.option_permutation.is_some() || mc != a.answer_key.is_some() {
                return Err("permutation and answer key must be present exactly for MC");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionScore {
    pub question_id: QuestionId,
    pub kind: QuestionKind,
    pub awarded: Points,
    pub maximum: Points,
}

/// Earned points reduced to the unit and scaled to the exam's rating.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub raw_earned: Points,
    pub raw_max: Points,
    /// Exact `raw_earned / raw_max · max_rating`.
    pub normalized: Points,
    pub max_rating: u32,
    pub per_question: Vec<QuestionScore>,
    /// True when missing essay grades were counted as zero.
    pub preview: bool,
    pub ungraded: Vec<QuestionId>,
}
