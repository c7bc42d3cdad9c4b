use std::fmt;

use serde::Serialize;

use crate::bank::BankError;
use crate::engine::EngineError;
use crate::grading::GradingError;
use crate::model::{ExamSpecError, QuestionError, StudentDetailsError};
use crate::persistence::PersistenceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Validation,
    NotFound,
    Conflict,
    Unauthorized,
    Forbidden,
    Unavailable,
    Internal,
}

/// The error every service operation returns: a coarse kind for transport
/// mapping, a stable machine code and, for validation failures, the field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OdesError {
    pub kind: ErrorKind,
    pub code: &'static str,
    pub field: Option<&'static str>,
    pub message: String,
}

impl OdesError {
    pub fn new(kind: ErrorKind, code: &'static str, message: impl Into<String>) -> Self {
        OdesError {
            kind,
            code,
            field: None,
            message: message.into(),
        }
    }

    pub fn validation(code: &'static str, field: &'static str, message: impl Into<String>) -> Self {
        OdesError {
            field: Some(field),
            ..Self::new(ErrorKind::Validation, code, message)
        }
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::NotFound, code, message)
    }

    pub fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Conflict, code, message)
    }

    pub fn unauthorized() -> Self {
        Self::new(ErrorKind::Unauthorized, "invalid_token", "missing or invalid credentials")
    }

    pub fn forbidden() -> Self {
        Self::new(ErrorKind::Forbidden, "forbidden", "this role may not perform the operation")
    }

    fn with_field(mut self, field: &'static str) -> Self {
        self.field = Some(field);
        self
    }
}

impl fmt::Display for OdesError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.field {
            Some(field) => write!(f, "{} ({field}): {}", self.code, self.message),
            None => write!(f, "{}: {}", self.code, self.message),
        }
    }
}

impl std::error::Error for OdesError {}

impl From<QuestionError> for OdesError {
    fn from(e: QuestionError) -> Self {
        OdesError::validation(e.code(), e.field(), e.to_string())
    }
}

impl From<ExamSpecError> for OdesError {
    fn from(e: ExamSpecError) -> Self {
        OdesError::validation(e.code(), e.field(), e.to_string())
    }
}

impl From<StudentDetailsError> for OdesError {
    fn from(e: StudentDetailsError) -> Self {
        OdesError::validation("invalid_student_details", e.field, e.to_string())
    }
}

impl From<BankError> for OdesError {
    fn from(e: BankError) -> Self {
        let msg = e.to_string();
        match e {
            BankError::EmptyName => OdesError::validation("empty_name", "name", msg),
            BankError::NameTooLong => OdesError::validation("name_too_long", "name", msg),
            BankError::UnknownParent(_) => OdesError::validation("unknown_parent", "parent", msg),
            BankError::CycleDetected(..) => OdesError::validation("cycle_detected", "parent", msg),
            BankError::UnknownCategory(_) => OdesError::not_found("unknown_category", msg),
            BankError::UnknownQuestion(_) => OdesError::not_found("unknown_question", msg),
            BankError::DuplicateSlug(_) => OdesError::conflict("duplicate_slug", msg),
            BankError::CategoryInUse { .. } => OdesError::conflict("category_in_use", msg),
            BankError::Invalid(q) => q.into(),
        }
    }
}

impl From<EngineError> for OdesError {
    fn from(e: EngineError) -> Self {
        let msg = e.to_string();
        match e {
            EngineError::ExamNotPublished => OdesError::conflict("exam_not_published", msg),
            EngineError::InvalidStudentDetails(d) => d.into(),
            EngineError::InsufficientQuestions { .. } => {
                OdesError::conflict("insufficient_questions", msg)
            }
            EngineError::SessionNotOpen => OdesError::conflict("session_not_open", msg),
            EngineError::NotMultipleChoice(_) => {
                OdesError::new(ErrorKind::Internal, "internal", msg)
            }
            EngineError::Bank(b) => b.into(),
        }
    }
}

impl From<GradingError> for OdesError {
    fn from(e: GradingError) -> Self {
        let code = e.code();
        let msg = e.to_string();
        match e {
            GradingError::AlreadyFinalized
            | GradingError::WrongStatus { .. }
            | GradingError::MissingEssayGrades(_) => OdesError::conflict(code, msg),
            GradingError::UnknownAssignedQuestion(_)
            | GradingError::AnswerTypeMismatch(_)
            | GradingError::ChoiceOutOfRange(_)
            | GradingError::EssayTooLong(_) => OdesError::validation(code, "answers", msg),
            GradingError::NotAnEssay(_) => OdesError::validation(code, "question_id", msg),
            GradingError::PointsOutOfRange { .. } => OdesError::validation(code, "points", msg),
        }
    }
}

impl From<PersistenceError> for OdesError {
    fn from(e: PersistenceError) -> Self {
        let msg = e.to_string();
        match e {
            PersistenceError::UnknownResult(_) => OdesError::not_found("unknown_result", msg),
            PersistenceError::UnknownExam(_) => OdesError::not_found("unknown_exam", msg),
            PersistenceError::FieldTooLong { field, .. } => {
                OdesError::validation("field_too_long", field, msg)
            }
            PersistenceError::Malformed(_) => OdesError::new(ErrorKind::Internal, "storage_corrupt", msg),
            PersistenceError::IdSpaceExhausted(_) => {
                OdesError::new(ErrorKind::Unavailable, "id_space_exhausted", msg)
            }
            PersistenceError::Unavailable(_) | PersistenceError::Locked(_) => {
                OdesError::new(ErrorKind::Unavailable, "storage_unavailable", msg)
            }
        }
    }
}

/// Re-labels a "not found" category reference that came from a request
/// body as a validation failure on `field`.
pub(crate) fn category_ref(field: &'static str) -> impl Fn(BankError) -> OdesError {
    move |e| match e {
        BankError::UnknownCategory(_) => {
            OdesError::from(e).with_field(field).retag(ErrorKind::Validation)
        }
        other => other.into(),
    }
}

impl OdesError {
    fn retag(mut self, kind: ErrorKind) -> Self {
        self.kind = kind;
        self
    }
}
