use serde::{Deserialize, Serialize};

use super::{is_valid_slug, CategoryId, ExamId, MAX_DESCRIPTION_BYTES, MAX_TITLE_CHARS};
use crate::points::Points;

/// Upper bound on questions of one kind per exam.
pub const MAX_QUESTIONS_PER_KIND: u32 = 10_000;

/// The scale scores are reduced to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum MaxRating {
    Ten,
    Hundred,
}

impl MaxRating {
    pub fn value(self) -> u32 {
        match self {
            MaxRating::Ten => 10,
            MaxRating::Hundred => 100,
        }
    }

    pub fn points(self) -> Points {
        Points::from_integer(self.value() as i64)
    }
}

impl TryFrom<u32> for MaxRating {
    type Error = ExamSpecError;

    fn try_from(v: u32) -> Result<Self, Self::Error> {
        match v {
            10 => Ok(MaxRating::Ten),
            100 => Ok(MaxRating::Hundred),
            other => Err(ExamSpecError::BadMaxRating(other)),
        }
    }
}

impl From<MaxRating> for u32 {
    fn from(r: MaxRating) -> u32 {
        r.value()
    }
}

/// The recipe from which every student's exam instance is generated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamSpec {
    pub id: ExamId,
    pub title: String,
    pub slug: String,
    pub description: Option<String>,
    pub source_category: CategoryId,
    pub n_mc: u32,
    pub n_essay: u32,
    /// Points per correct multiple-choice answer.
    pub w_mc: Points,
    /// Points subtracted per wrong multiple-choice answer.
    pub penalty_mc: Points,
    /// Maximum points per essay.
    pub w_essay: Points,
    pub max_rating: MaxRating,
    pub randomize: bool,
    pub published: bool,
}

impl ExamSpec {
    /// `n_mc·w_mc + n_essay·w_essay`, positive for every validated spec.
    pub fn raw_max(&self) -> Points {
        self.w_mc * self.n_mc + self.w_essay * self.n_essay
    }

    /// Settings that change how sessions are graded or assembled.
    pub fn same_grading_terms(&self, other: &ExamSpec) -> bool {
        self.source_category == other.source_category
            && self.n_mc == other.n_mc
            && self.n_essay == other.n_essay
            && self.w_mc == other.w_mc
            && self.penalty_mc == other.penalty_mc
            && self.w_essay == other.w_essay
            && self.max_rating == other.max_rating
    }
}

/// Unvalidated exam options as entered by a teacher.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamSpecDraft {
    pub title: String,
    /// Derived from the title when absent.
    #[serde(default)]
    pub slug: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    pub source_category: CategoryId,
    #[serde(default)]
    pub n_mc: u32,
    #[serde(default)]
    pub n_essay: u32,
    #[serde(default)]
    pub w_mc: Points,
    #[serde(default)]
    pub penalty_mc: Points,
    #[serde(default)]
    pub w_essay: Points,
    pub max_rating: u32,
    #[serde(default = "default_true")]
    pub randomize: bool,
    #[serde(default)]
    pub published: bool,
}

fn default_true() -> bool {
    true
}

impl From<&ExamSpec> for ExamSpecDraft {
    fn from(s: &ExamSpec) -> Self {
        ExamSpecDraft {
            title: s.title.clone(),
            slug: Some(s.slug.clone()),
            description: s.description.clone(),
            source_category: s.source_category,
            n_mc: s.n_mc,
            n_essay: s.n_essay,
            w_mc: s.w_mc,
            penalty_mc: s.penalty_mc,
            w_essay: s.w_essay,
            max_rating: s.max_rating.value(),
            randomize: s.randomize,
            published: s.published,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExamSpecError {
    #[error("exam title must not be empty")]
    EmptyTitle,
    #[error("exam title exceeds {MAX_TITLE_CHARS} characters")]
    TitleTooLong,
    #[error("exam description exceeds {MAX_DESCRIPTION_BYTES} bytes")]
    DescriptionTooLong,
    #[error("slug {0:?} is not lowercase letters, digits and single dashes")]
    BadSlug(String),
    #[error("an exam must request at least one question")]
    NoQuestionsRequested,
    #[error("at most {MAX_QUESTIONS_PER_KIND} questions of each kind")]
    TooManyQuestions,
    #[error("maximum rating must be 10 or 100, got {0}")]
    BadMaxRating(u32),
    #[error("{0} must be positive")]
    NonPositiveWeight(&'static str),
    #[error("penalty_mc must not be negative")]
    NegativePenalty,
    #[error("unknown category {0}")]
    UnknownCategory(CategoryId),
}

impl ExamSpecError {
    pub fn code(&self) -> &'static str {
        match self {
            ExamSpecError::EmptyTitle => "empty_title",
            ExamSpecError::TitleTooLong => "title_too_long",
            ExamSpecError::DescriptionTooLong => "description_too_long",
            ExamSpecError::BadSlug(_) => "bad_slug",
            ExamSpecError::NoQuestionsRequested => "no_questions_requested",
            ExamSpecError::TooManyQuestions => "too_many_questions",
            ExamSpecError::BadMaxRating(_) => "bad_max_rating",
            ExamSpecError::NonPositiveWeight(_) => "non_positive_weight",
            ExamSpecError::NegativePenalty => "negative_penalty",
            ExamSpecError::UnknownCategory(_) => "unknown_category",
        }
    }

    pub fn field(&self) -> &'static str {
        match self {
            ExamSpecError::EmptyTitle | ExamSpecError::TitleTooLong => "title",
            ExamSpecError::DescriptionTooLong => "description",
            ExamSpecError::BadSlug(_) => "slug",
            ExamSpecError::NoQuestionsRequested | ExamSpecError::TooManyQuestions => "n_mc",
            ExamSpecError::BadMaxRating(_) => "max_rating",
            ExamSpecError::NonPositiveWeight(field) => field,
            ExamSpecError::NegativePenalty => "penalty_mc",
            ExamSpecError::UnknownCategory(_) => "source_category",
        }
    }
}

/// Checks every exam invariant and returns the draft unchanged.
pub fn validate_exam_spec(
    draft: &ExamSpecDraft,
    category_exists: impl Fn(CategoryId) -> bool,
) -> Result<ExamSpecDraft, ExamSpecError> {
    if draft.title.trim().is_empty() {
        return Err(ExamSpecError::EmptyTitle);
    }
    if draft.title.chars().count() > MAX_TITLE_CHARS {
        return Err(ExamSpecError::TitleTooLong);
    }
    if draft
        .description
        .as_ref()
        .is_some_and(|d| d.len() > MAX_DESCRIPTION_BYTES)
    {
        return Err(ExamSpecError::DescriptionTooLong);
    }
    if let Some(slug) = &draft.slug {
        if !is_valid_slug(slug) {
            return Err(ExamSpecError::BadSlug(slug.clone()));
        }
    }
    if draft.n_mc == 0 && draft.n_essay == 0 {
        return Err(ExamSpecError::NoQuestionsRequested);
    }
    if draft.n_mc > MAX_QUESTIONS_PER_KIND || draft.n_essay > MAX_QUESTIONS_PER_KIND {
        return Err(ExamSpecError::TooManyQuestions);
    }
    MaxRating::try_from(draft.max_rating)?;
    if draft.n_mc > 0 && !draft.w_mc.is_positive() || draft.w_mc.is_negative() {
        return Err(ExamSpecError::NonPositiveWeight("w_mc"));
    }
    if draft.n_essay > 0 && !draft.w_essay.is_positive() || draft.w_essay.is_negative() {
        return Err(ExamSpecError::NonPositiveWeight("w_essay"));
    }
    if draft.penalty_mc.is_negative() {
        return Err(ExamSpecError::NegativePenalty);
    }
    if !category_exists(draft.source_category) {
        return Err(ExamSpecError::UnknownCategory(draft.source_category));
    }
    Ok(draft.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draft() -> ExamSpecDraft {
        ExamSpecDraft {
            title: "Networks midterm".into(),
            slug: None,
            description: None,
            source_category: CategoryId(1),
            n_mc: 4,
            n_essay: 1,
            w_mc: Points::from_integer(1),
            penalty_mc: Points::ZERO,
            w_essay: Points::from_integer(6),
            max_rating: 10,
            randomize: true,
            published: false,
        }
    }

    fn known(c: CategoryId) -> bool {
        c == CategoryId(1)
    }

    #[test]
    fn valid_spec_returned_unchanged() {
        assert_eq!(validate_exam_spec(&draft(), known), Ok(draft()));
    }

    #[test]
    fn no_questions() {
        let d = ExamSpecDraft { n_mc: 0, n_essay: 0, ..draft() };
        assert_eq!(validate_exam_spec(&d, known), Err(ExamSpecError::NoQuestionsRequested));
    }

    #[test]
    fn max_rating_must_be_10_or_100() {
        let d = ExamSpecDraft { max_rating: 20, ..draft() };
        assert_eq!(validate_exam_spec(&d, known), Err(ExamSpecError::BadMaxRating(20)));
        let d = ExamSpecDraft { max_rating: 100, ..draft() };
        assert!(validate_exam_spec(&d, known).is_ok());
    }

    #[test]
    fn weights() {
        let d = ExamSpecDraft { w_mc: Points::ZERO, ..draft() };
        assert_eq!(validate_exam_spec(&d, known), Err(ExamSpecError::NonPositiveWeight("w_mc")));
        let d = ExamSpecDraft { w_essay: Points::from_integer(-1), ..draft() };
        assert_eq!(validate_exam_spec(&d, known), Err(ExamSpecError::NonPositiveWeight("w_essay")));
        // unused weight may be zero
        let d = ExamSpecDraft { n_essay: 0, w_essay: Points::ZERO, ..draft() };
        assert!(validate_exam_spec(&d, known).is_ok());
        let d = ExamSpecDraft { penalty_mc: Points::from_integer(-1), ..draft() };
        assert_eq!(validate_exam_spec(&d, known), Err(ExamSpecError::NegativePenalty));
    }

    #[test]
    fn unknown_category_and_slug() {
        let d = ExamSpecDraft { source_category: CategoryId(7), ..draft() };
        assert_eq!(validate_exam_spec(&d, known), Err(ExamSpecError::UnknownCategory(CategoryId(7))));
        let d = ExamSpecDraft { slug: Some("Bad Slug".into()), ..draft() };
        assert_eq!(validate_exam_spec(&d, known).unwrap_err().code(), "bad_slug");
    }

    #[test]
    fn max_rating_serde() {
        assert_eq!(serde_json::to_string(&MaxRating::Hundred).unwrap(), "100");
        assert!(serde_json::from_str::<MaxRating>("20").is_err());
    }

    proptest::proptest! {
        #[test]
        fn validated_specs_have_positive_raw_max(
            n_mc in 0u32..20, n_essay in 0u32..20,
            w_mc in -3i64..5, w_essay in -3i64..5, pen in -1i64..3,
            rating in proptest::sample::select(vec![10u32, 20, 100]),
        ) {
            let d = ExamSpecDraft {
                n_mc, n_essay,
                w_mc: Points::from_integer(w_mc),
                w_essay: Points::from_integer(w_essay),
                penalty_mc: Points::from_integer(pen),
                max_rating: rating,
                ..draft()
            };
            if let Ok(d) = validate_exam_spec(&d, known) {
                let raw_max = d.w_mc * d.n_mc + d.w_essay * d.n_essay;
                proptest::prop_assert!(raw_max.is_positive());
            }
        }
    }
}
