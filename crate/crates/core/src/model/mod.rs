//! Domain types shared by the bank, the exam engine, grading and storage.

mod exam;
mod ids;
mod question;
mod session;

pub use exam::{validate_exam_spec, ExamSpec, ExamSpecDraft, ExamSpecError, MaxRating};
pub use ids::{CategoryId, ExamId, QuestionId, ResultId};
pub use question::{
    validate_question, Category, Question, QuestionBody, QuestionDraft, QuestionError,
    QuestionKind, ValidQuestion, MAX_DESCRIPTION_BYTES, MAX_TITLE_CHARS,
};
pub use session::{
    Answer, AssignedQuestion, EssayGrade, ExamSession, OptionPermutation, ScoreReport,
    QuestionScore, SessionStatus, StudentDetails, StudentDetailsError, Timestamp,
    MAX_ESSAY_BYTES,
};

/// Lowercases ASCII alphanumerics and turns every run of other characters
/// into a single `-`. Leading and trailing dashes are dropped.
pub fn slugify(text: &str) -> String {
    let mut slug = String::with_capacity(text.len());
    for c in text.chars() {
        if c.is_ascii_alphanumeric() {
            slug.push(c.to_ascii_lowercase());
        } else if !slug.is_empty() && !slug.ends_with('-') {
            slug.push('-');
        }
    }
    while slug.ends_with('-') {
        slug.pop();
    }
    slug
}

/// A slug is non-empty lowercase ASCII alphanumerics separated by single dashes.
pub fn is_valid_slug(slug: &str) -> bool {
    !slug.is_empty()
        && slug.len() <= 200
        && slug
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
        && !slug.starts_with('-')
        && !slug.ends_with('-')
        && !slug.contains("--")
}
