use serde::{Deserialize, Serialize};

use super::document::AnswersDocument;
use super::PersistenceError;
use crate::model::{ExamId, ExamSession, ResultId, SessionStatus, StudentDetails};

pub const MAX_RESULT_ID: u64 = 999_999_999;
pub const MAX_EXAM_ID: u64 = 99_999_999_999;
pub const MAX_ANSWERS_BYTES: usize = 65_535;
const MAX_STATUS_CHARS: usize = 100;

/// One row of the results table.
///
/// `final_score` and `successful` extend the original column set; the
/// assignment, answers, essay grades and start time all live inside the
/// `answers` document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub result_id: u64,
    pub diagonisma_id: u64,
    pub first_name: String,
    pub second_name: String,
    pub am: String,
    pub etos_spoudon: String,
    pub tmima: String,
    /// `YYYY-MM-DD HH:MM:SS`, empty while the session is Open.
    pub time_submitted: String,
    pub status: String,
    pub answers: String,
    /// Exact score once Checked, empty before.
    #[serde(default)]
    pub final_score: String,
    #[serde(default)]
    pub successful: bool,
}

fn too_long(field: &'static str, len: usize, max: usize) -> PersistenceError {
    PersistenceError::FieldTooLong { field, len, max }
}

impl ResultsRow {
    pub fn from_session(session: &ExamSession) -> Result<Self, PersistenceError> {
        let answers = AnswersDocument {
            time_started: session.time_started,
            assignment: session.assignment.clone(),
            answers: session.answers.clone(),
            essay_grades: session.essay_grades.clone(),
        }
        .encode();
        let s = &session.student;
        let row = ResultsRow {
            result_id: session.result_id.0,
            diagonisma_id: session.exam_id.0,
            first_name: s.first_name.clone(),
            second_name: s.second_name.clone(),
            am: s.am.clone(),
            etos_spoudon: s.etos_spoudon.clone(),
            tmima: s.tmima.clone(),
            time_submitted: session
                .time_submitted
                .map(|t| t.to_string())
                .unwrap_or_default(),
            status: session.status.as_str().to_string(),
            answers,
            final_score: session
                .final_score
                .map(|p| p.to_string())
                .unwrap_or_default(),
            successful: session.successful,
        };
        row.check_bounds()?;
        Ok(row)
    }

    /// Enforces the column widths of the results table.
    pub fn check_bounds(&self) -> Result<(), PersistenceError> {
        if self.result_id > MAX_RESULT_ID {
            return Err(too_long("result_id", self.result_id.to_string().len(), 9));
        }
        if self.diagonisma_id > MAX_EXAM_ID {
            return Err(too_long("diagonisma_id", self.diagonisma_id.to_string().len(), 11));
        }
        for ((field, max, _), value) in StudentDetails::LIMITS.iter().zip([
            &self.first_name,
            &self.second_name,
            &self.am,
            &self.etos_spoudon,
            &self.tmima,
        ]) {
            let len = value.chars().count();
            if len > *max {
                return Err(too_long(field, len, *max));
            }
        }
        if self.status.chars().count() > MAX_STATUS_CHARS || self.status.parse::<SessionStatus>().is_err() {
            return Err(PersistenceError::Malformed(format!("status {:?}", self.status)));
        }
        if self.answers.len() > MAX_ANSWERS_BYTES {
            return Err(too_long("answers", self.answers.len(), MAX_ANSWERS_BYTES));
        }
        Ok(())
    }

    pub fn to_session(&self) -> Result<ExamSession, PersistenceError> {
        let malformed = |what: &str| PersistenceError::Malformed(format!("result {}: {what}", self.result_id));
        let doc = AnswersDocument::decode(&self.answers)
            .map_err(|e| PersistenceError::Malformed(format!("result {}: {e}", self.result_id)))?;
        let session = ExamSession {
            result_id: ResultId(self.result_id),
            exam_id: ExamId(self.diagonisma_id),
            student: StudentDetails {
                first_name: self.first_name.clone(),
                second_name: self.second_name.clone(),
                am: self.am.clone(),
                etos_spoudon: self.etos_spoudon.clone(),
                tmima: self.tmima.clone(),
            },
            assignment: doc.assignment,
            answers: doc.answers,
            essay_grades: doc.essay_grades,
            status: self.status.parse().map_err(|_| malformed("bad status"))?,
            time_started: doc.time_started,
            time_submitted: match self.time_submitted.as_str() {
                "" => None,
                t => Some(t.parse().map_err(|_| malformed("bad time_submitted"))?),
            },
            successful: self.successful,
            final_score: match self.final_score.as_str() {
                "" => None,
                s => Some(s.parse().map_err(|_| malformed("bad final_score"))?),
            },
        };
        session.check_invariants().map_err(malformed)?;
        Ok(session)
    }
}
