//! Per-student exam assembly.
//!
//! Every random choice is drawn from a ChaCha8 stream keyed by the session's
//! [`Seed`], so an assignment can be regenerated bit-for-bit from the seed and
//! the bank snapshot it was drawn from.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bank::{BankError, QuestionBank};
use crate::model::{
    AssignedQuestion, ExamId, ExamSession, ExamSpec, OptionPermutation, Question, QuestionId,
    QuestionKind, ResultId, SessionStatus, StudentDetails, StudentDetailsError, Timestamp,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

impl Seed {
    /// Draws a seed from the thread-local CSPRNG.
    pub fn random() -> Self {
        Seed(rand::rng().random())
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("exam is not published")]
    ExamNotPublished,
    #[error("invalid student details: {0}")]
    InvalidStudentDetails(#[from] StudentDetailsError),
    #[error("not enough {} questions: {available} available, {requested} requested", kind.as_str())]
    InsufficientQuestions {
        kind: QuestionKind,
        available: usize,
        requested: usize,
    },
    #[error("question {0} is not multiple choice")]
    NotMultipleChoice(QuestionId),
    #[error("session is no longer open")]
    SessionNotOpen,
    #[error(transparent)]
    Bank(#[from] BankError),
}

/// In-place partial Fisher–Yates: afterwards `items[..k]` is a uniformly
/// random `k`-permutation of the input.
fn partial_shuffle<T, R: Rng + ?Sized>(items: &mut [T], k: usize, rng: &mut R) {
    let n = items.len();
    for i in 0..k.min(n) {
        let j = rng.random_range(i..n);
        items.swap(i, j);
    }
}

/// Draws a uniform permutation of the four options of an MC question.
pub fn shuffle_options<R: Rng + ?Sized>(
    question: &Question,
    rng: &mut R,
) -> Result<OptionPermutation, EngineError> {
    if question.kind() != QuestionKind::MultipleChoice {
        return Err(EngineError::NotMultipleChoice(question.id));
    }
    let mut slots = [0u8, 1, 2, 3];
    partial_shuffle(&mut slots, 4, rng);
    Ok(OptionPermutation::new(slots).expect("shuffle of 0..4 is a permutation"))
}

fn take_eligible<'a>(
    bank: &'a QuestionBank,
    spec: &ExamSpec,
    kind: QuestionKind,
    requested: u32,
) -> Result<Vec<&'a Question>, EngineError> {
    let pool = bank.eligible(spec.source_category, kind)?;
    let requested = requested as usize;
    if pool.len() < requested {
        return Err(EngineError::InsufficientQuestions {
            kind,
            available: pool.len(),
            requested,
        });
    }
    Ok(pool)
}

/// Chooses the questions (and option orders) one student will see.
///
/// With `randomize` off every student gets the lowest-id questions of each
/// kind, MC block first, options in authored order.
pub fn select_questions(
    spec: &ExamSpec,
    bank: &QuestionBank,
    seed: Seed,
) -> Result<Vec<AssignedQuestion>, EngineError> {
    let mut mc = take_eligible(bank, spec, QuestionKind::MultipleChoice, spec.n_mc)?;
    let mut essays = take_eligible(bank, spec, QuestionKind::Essay, spec.n_essay)?;
    let (n_mc, n_essay) = (spec.n_mc as usize, spec.n_essay as usize);

    let mut rng = seed.rng();
    let mut chosen: Vec<&Question> = if spec.randomize {
        partial_shuffle(&mut mc, n_mc, &mut rng);
        partial_shuffle(&mut essays, n_essay, &mut rng);
        let mut chosen: Vec<&Question> = mc[..n_mc].iter().chain(&essays[..n_essay]).copied().collect();
        let len = chosen.len();
        partial_shuffle(&mut chosen, len, &mut rng);
        chosen
    } else {
        mc[..n_mc].iter().chain(&essays[..n_essay]).copied().collect()
    };

    chosen
        .drain(..)
        .enumerate()
        .map(|(pos, q)| {
            let option_permutation = match q.kind() {
                QuestionKind::Essay => None,
                QuestionKind::MultipleChoice if spec.randomize => Some(shuffle_options(q, &mut rng)?),
                QuestionKind::MultipleChoice => Some(OptionPermutation::IDENTITY),
            };
            Ok(AssignedQuestion {
                question_id: q.id,
                display_order: pos as u32,
                kind: q.kind(),
                option_permutation,
                answer_key: q.correct_index(),
            })
        })
        .collect()
}

/// Creates an Open session with its assignment fixed for good.
pub fn start_session(
    result_id: ResultId,
    spec: &ExamSpec,
    bank: &QuestionBank,
    student: StudentDetails,
    now: Timestamp,
    seed: Seed,
) -> Result<ExamSession, EngineError> {
    if !spec.published {
        return Err(EngineError::ExamNotPublished);
    }
    student.validate()?;
    let assignment = select_questions(spec, bank, seed)?;
    Ok(ExamSession {
        result_id,
        exam_id: spec.id,
        student,
        assignment,
        answers: Default::default(),
        essay_grades: Default::default(),
        status: SessionStatus::Open,
        time_started: now,
        time_submitted: None,
        successful: false,
        final_score: None,
    })
}

/// Student-facing rendering of a session. Carries no answer keys or weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamView {
    pub result_id: ResultId,
    pub exam_id: ExamId,
    pub exam_title: String,
    pub exam_description: Option<String>,
    pub status: SessionStatus,
    pub questions: Vec<ViewQuestion>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewQuestion {
    pub question_id: QuestionId,
    pub position: u32,
    pub kind: QuestionKind,
    pub title: String,
    pub description: Option<String>,
    /// Options in display order; the student answers with a slot number.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<ViewOption>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewOption {
    pub slot: u8,
    pub text: String,
}

pub fn render_assignment(
    session: &ExamSession,
    spec: &ExamSpec,
    bank: &QuestionBank,
) -> Result<ExamView, EngineError> {
    if session.status != SessionStatus::Open {
        return Err(EngineError::SessionNotOpen);
    }
    let questions = session
        .in_display_order()
        .into_iter()
        .map(|a| {
            let q = bank.get_question(a.question_id)?;
            let options = match (q.options(), a.option_permutation) {
                (Some(texts), Some(perm)) => Some(
                    (0..4u8)
                        .map(|slot| ViewOption {
                            slot,
                            text: texts[perm.original_at(slot).expect("slot < 4") as usize].clone(),
                        })
                        .collect(),
                ),
                _ => None,
            };
            Ok(ViewQuestion {
                question_id: q.id,
                position: a.display_order,
                kind: a.kind,
                title: q.title.clone(),
                description: q.description.clone(),
                options,
            })
        })
        .collect::<Result<_, EngineError>>()?;
    Ok(ExamView {
        result_id: session.result_id,
        exam_id: session.exam_id,
        exam_title: spec.title.clone(),
        exam_description: spec.description.clone(),
        status: session.status,
        questions,
    })
}
