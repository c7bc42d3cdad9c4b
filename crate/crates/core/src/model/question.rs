use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{CategoryId, QuestionId, Timestamp};

pub const MAX_TITLE_CHARS: usize = 500;
pub const MAX_DESCRIPTION_BYTES: usize = 64 * 1024;

/// A node in the category taxonomy. Roots have no parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: CategoryId,
    pub name: String,
    pub parent: Option<CategoryId>,
    pub slug: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    MultipleChoice,
    Essay,
}

impl QuestionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            QuestionKind::MultipleChoice => "multiple_choice",
            QuestionKind::Essay => "essay",
        }
    }
}

/// Kind-specific content of a question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuestionBody {
    MultipleChoice { options: [String; 4], correct_index: u8 },
    Essay,
}

impl QuestionBody {
    pub fn kind(&self) -> QuestionKind {
        match self {
            QuestionBody::MultipleChoice { .. } => QuestionKind::MultipleChoice,
            QuestionBody::Essay => QuestionKind::Essay,
        }
    }
}

/// A stored bank question. Never exposed outside the authoring surface.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: QuestionId,
    pub title: String,
    pub description: Option<String>,
    #[serde(flatten)]
    pub body: QuestionBody,
    pub categories: BTreeSet<CategoryId>,
    pub published: bool,
    pub created_at: Timestamp,
}

impl Question {
    pub fn kind(&self) -> QuestionKind {
        self.body.kind()
    }

    pub fn correct_index(&self) -> Option<u8> {
        match &self.body {
            QuestionBody::MultipleChoice { correct_index, .. } => Some(*correct_index),
            QuestionBody::Essay => None,
        }
    }

    pub fn options(&self) -> Option<&[String; 4]> {
        match &self.body {
            QuestionBody::MultipleChoice { options, .. } => Some(options),
            QuestionBody::Essay => None,
        }
    }
}

/// Unvalidated authoring input, as submitted by a form or an import record.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionDraft {
    pub title: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub kind: Option<QuestionKind>,
    #[serde(default)]
    pub options: Option<Vec<String>>,
    #[serde(default)]
    pub correct_index: Option<i64>,
    #[serde(default)]
    pub categories: Vec<CategoryId>,
    #[serde(default)]
    pub published: bool,
}

/// A draft that satisfies every question invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidQuestion {
    pub title: String,
    pub description: Option<String>,
    pub body: QuestionBody,
    pub categories: BTreeSet<CategoryId>,
    pub published: bool,
}

impl From<ValidQuestion> for QuestionDraft {
    fn from(v: ValidQuestion) -> Self {
        let (kind, options, correct_index) = match v.body {
            QuestionBody::MultipleChoice {
                options,
                correct_index,
            } => (
                QuestionKind::MultipleChoice,
                Some(options.to_vec()),
                Some(correct_index as i64),
            ),
            QuestionBody::Essay => (QuestionKind::Essay, None, None),
        };
        QuestionDraft {
            title: v.title,
            description: v.description,
            kind: Some(kind),
            options,
            correct_index,
            categories: v.categories.into_iter().collect(),
            published: v.published,
        }
    }
}

impl From<&Question> for QuestionDraft {
    fn from(q: &Question) -> Self {
        ValidQuestion {
            title: q.title.clone(),
            description: q.description.clone(),
            body: q.body.clone(),
            categories: q.categories.clone(),
            published: q.published,
        }
        .into()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QuestionError {
    #[error("question title must not be empty")]
    EmptyTitle,
    #[error("question title exceeds {MAX_TITLE_CHARS} characters")]
    TitleTooLong,
    #[error("question description exceeds {MAX_DESCRIPTION_BYTES} bytes")]
    DescriptionTooLong,
    #[error("no question type was chosen")]
    MissingKind,
    #[error("{0}")]
    BadOptions(&'static str),
    #[error("{0}")]
    BadCorrectIndex(&'static str),
    #[error("question must belong to at least one category")]
    NoCategory,
}

impl QuestionError {
    pub fn code(&self) -> &'static str {
        match self {
            QuestionError::EmptyTitle => "empty_title",
            QuestionError::TitleTooLong => "title_too_long",
            QuestionError::DescriptionTooLong => "description_too_long",
            QuestionError::MissingKind => "missing_kind",
            QuestionError::BadOptions(_) => "bad_options",
            QuestionError::BadCorrectIndex(_) => "bad_correct_index",
            QuestionError::NoCategory => "no_category",
        }
    }

    pub fn field(&self) -> &'static str {
        match self {
            QuestionError::EmptyTitle | QuestionError::TitleTooLong => "title",
            QuestionError::DescriptionTooLong => "description",
            QuestionError::MissingKind => "kind",
            QuestionError::BadOptions(_) => "options",
            QuestionError::BadCorrectIndex(_) => "correct_index",
            QuestionError::NoCategory => "categories",
        }
    }
}

/// Checks every question invariant. Category existence is the bank's concern.
pub fn validate_question(draft: &QuestionDraft) -> Result<ValidQuestion, QuestionError> {
    if draft.title.trim().is_empty() {
        return Err(QuestionError::EmptyTitle);
    }
    if draft.title.chars().count() > MAX_TITLE_CHARS {
        return Err(QuestionError::TitleTooLong);
    }
    if draft
        .description
        .as_ref()
        .is_some_and(|d| d.len() > MAX_DESCRIPTION_BYTES)
    {
        return Err(QuestionError::DescriptionTooLong);
    }
    let kind = draft.kind.ok_or(QuestionError::MissingKind)?;
    let body = match kind {
        QuestionKind::MultipleChoice => {
            let options = draft
                .options
                .as_deref()
                .ok_or(QuestionError::BadOptions("multiple choice needs four options"))?;
            let options: [String; 4] = options
                .to_vec()
                .try_into()
                .map_err(|_| QuestionError::BadOptions("multiple choice needs exactly four options"))?;
            if options.iter().any(|o| o.trim().is_empty()) {
                return Err(QuestionError::BadOptions("option text must not be empty"));
            }
            if options.iter().any(|o| o.len() > MAX_DESCRIPTION_BYTES) {
                return Err(QuestionError::BadOptions("option text is too long"));
            }
            let correct_index = match draft.correct_index {
                Some(i @ 0..=3) => i as u8,
                Some(_) => return Err(QuestionError::BadCorrectIndex("correct_index must be in 0..=3")),
                None => return Err(QuestionError::BadCorrectIndex("correct_index is required")),
            };
            QuestionBody::MultipleChoice {
                options,
                correct_index,
            }
        }
        QuestionKind::Essay => {
            if draft.options.as_ref().is_some_and(|o| !o.is_empty()) {
                return Err(QuestionError::BadOptions("essay questions take no options"));
            }
            if draft.correct_index.is_some() {
                return Err(QuestionError::BadCorrectIndex("essay questions take no correct_index"));
            }
            QuestionBody::Essay
        }
    };
    if draft.categories.is_empty() {
        return Err(QuestionError::NoCategory);
    }
    Ok(ValidQuestion {
        title: draft.title.clone(),
        description: draft.description.clone(),
        body,
        categories: draft.categories.iter().copied().collect(),
        published: draft.published,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mc_draft() -> QuestionDraft {
        QuestionDraft {
            title: "Which layer does IP live in?".into(),
            kind: Some(QuestionKind::MultipleChoice),
            options: Some(vec!["Link".into(), "Transport".into(), "Network".into(), "Session".into()]),
            correct_index: Some(2),
            categories: vec![CategoryId(1)],
            ..Default::default()
        }
    }

    #[test]
    fn valid_mc_draft() {
        let v = validate_question(&mc_draft()).unwrap();
        assert_eq!(v.body.kind(), QuestionKind::MultipleChoice);
        assert!(!v.published);
    }

    #[test]
    fn missing_kind_is_reported() {
        let d = QuestionDraft { kind: None, ..mc_draft() };
        assert_eq!(validate_question(&d), Err(QuestionError::MissingKind));
    }

    #[test]
    fn three_options_rejected() {
        let mut d = mc_draft();
        d.options.as_mut().unwrap().pop();
        assert_eq!(validate_question(&d).unwrap_err().code(), "bad_options");
    }

    #[test]
    fn blank_option_rejected() {
        let mut d = mc_draft();
        d.options.as_mut().unwrap()[1] = "   ".into();
        assert_eq!(validate_question(&d).unwrap_err().code(), "bad_options");
    }

    #[test]
    fn correct_index_bounds() {
        for bad in [-1, 4, 100] {
            let d = QuestionDraft { correct_index: Some(bad), ..mc_draft() };
            assert_eq!(validate_question(&d).unwrap_err().code(), "bad_correct_index");
        }
        let d = QuestionDraft { correct_index: None, ..mc_draft() };
        assert_eq!(validate_question(&d).unwrap_err().code(), "bad_correct_index");
    }

    #[test]
    fn essay_rejects_mc_fields() {
        let base = QuestionDraft {
            title: "Explain TCP slow start".into(),
            kind: Some(QuestionKind::Essay),
            categories: vec![CategoryId(3)],
            ..Default::default()
        };
        assert_eq!(validate_question(&base).unwrap().body, QuestionBody::Essay);
        let d = QuestionDraft { options: Some(vec!["a".into()]), ..base.clone() };
        assert_eq!(validate_question(&d).unwrap_err().code(), "bad_options");
        let d = QuestionDraft { correct_index: Some(0), ..base };
        assert_eq!(validate_question(&d).unwrap_err().code(), "bad_correct_index");
    }

    #[test]
    fn empty_title_and_categories() {
        let d = QuestionDraft { title: " \t".into(), ..mc_draft() };
        assert_eq!(validate_question(&d), Err(QuestionError::EmptyTitle));
        let d = QuestionDraft { categories: vec![], ..mc_draft() };
        assert_eq!(validate_question(&d), Err(QuestionError::NoCategory));
        let d = QuestionDraft { title: "x".repeat(MAX_TITLE_CHARS + 1), ..mc_draft() };
        assert_eq!(validate_question(&d), Err(QuestionError::TitleTooLong));
    }

    #[test]
    fn stored_question_serializes_kind_inline() {
        let v = validate_question(&mc_draft()).unwrap();
        let q = Question {
            id: QuestionId(9),
            title: v.title,
            description: None,
            body: v.body,
            categories: v.categories,
            published: true,
            created_at: "2024-05-01 10:00:00".parse().unwrap(),
        };
        let json = serde_json::to_value(&q).unwrap();
        assert_eq!(json["kind"], "multiple_choice");
        assert_eq!(json["correct_index"], 2);
        let back: Question = serde_json::from_value(json).unwrap();
        assert_eq!(back, q);
    }

    proptest::proptest! {
        #[test]
        fn validation_is_idempotent(
            title in "[a-zA-Z ]{0,12}",
            kind in proptest::option::of(proptest::sample::select(vec![QuestionKind::MultipleChoice, QuestionKind::Essay])),
            options in proptest::option::of(proptest::collection::vec("[a-z ]{0,4}", 0..6)),
            correct in proptest::option::of(-2i64..6),
            cats in proptest::collection::vec(0u64..4, 0..3),
            published in proptest::bool::ANY,
        ) {
            let draft = QuestionDraft {
                title,
                description: None,
                kind,
                options,
                correct_index: correct,
                categories: cats.into_iter().map(CategoryId).collect(),
                published,
            };
            if let Ok(valid) = validate_question(&draft) {
                let again = validate_question(&QuestionDraft::from(valid.clone()));
                proptest::prop_assert_eq!(again, Ok(valid));
            }
        }
    }
}
