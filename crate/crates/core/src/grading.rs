//! Scoring and the Open → Finalized → Checked lifecycle.
//!
//! All operations are pure: they take a session by reference and hand back
//! the updated copy, leaving persistence to the caller.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{
    Answer, EssayGrade, ExamSession, ExamSpec, QuestionId, QuestionKind, QuestionScore,
    ScoreReport, SessionStatus, Timestamp, MAX_ESSAY_BYTES,
};
use crate::points::Points;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GradingError {
    #[error("answers were already submitted")]
    AlreadyFinalized,
    #[error("{op} is not allowed while the session is {status}")]
    WrongStatus {
        op: &'static str,
        status: SessionStatus,
    },
    #[error("question {0} is not part of this session")]
    UnknownAssignedQuestion(QuestionId),
    #[error("answer to question {0} does not match its type")]
    AnswerTypeMismatch(QuestionId),
    #[error("choice for question {0} is outside 0..=3")]
    ChoiceOutOfRange(QuestionId),
    #[error("essay answer to question {0} exceeds {MAX_ESSAY_BYTES} bytes")]
    EssayTooLong(QuestionId),
    #[error("question {0} is not an essay")]
    NotAnEssay(QuestionId),
    #[error("points {points} outside [0, {max}]")]
    PointsOutOfRange { points: Points, max: Points },
    #[error("essays still ungraded: {0:?}")]
    MissingEssayGrades(Vec<QuestionId>),
}

impl GradingError {
    pub fn code(&self) -> &'static str {
        match self {
            GradingError::AlreadyFinalized => "already_finalized",
            GradingError::WrongStatus { .. } => "wrong_status",
            GradingError::UnknownAssignedQuestion(_) => "unknown_assigned_question",
            GradingError::AnswerTypeMismatch(_) => "answer_type_mismatch",
            GradingError::ChoiceOutOfRange(_) => "choice_out_of_range",
            GradingError::EssayTooLong(_) => "essay_too_long",
            GradingError::NotAnEssay(_) => "not_an_essay",
            GradingError::PointsOutOfRange { .. } => "points_out_of_range",
            GradingError::MissingEssayGrades(_) => "missing_essay_grades",
        }
    }
}

fn require(
    session: &ExamSession,
    op: &'static str,
    allowed: &[SessionStatus],
) -> Result<(), GradingError> {
    if allowed.contains(&session.status) {
        Ok(())
    } else {
        Err(GradingError::WrongStatus {
            op,
            status: session.status,
        })
    }
}

/// Stores the student's answers and closes the attempt.
///
/// Unanswered questions are recorded as [`Answer::Blank`]. An exam without
/// essays has nothing left for a teacher to do, so it is finalized straight
/// to Checked.
pub fn submit_answers(
    session: &ExamSession,
    spec: &ExamSpec,
    answers: BTreeMap<QuestionId, Answer>,
    now: Timestamp,
) -> Result<ExamSession, GradingError> {
    if session.status != SessionStatus::Open {
        return Err(GradingError::AlreadyFinalized);
    }
    for (id, answer) in &answers {
        let assigned = session
            .assigned(*id)
            .ok_or(GradingError::UnknownAssignedQuestion(*id))?;
        match (assigned.kind, answer) {
            (_, Answer::Blank) => {}
            (QuestionKind::MultipleChoice, Answer::McChoice(c)) if *c > 3 => {
                return Err(GradingError::ChoiceOutOfRange(*id))
            }
            (QuestionKind::MultipleChoice, Answer::McChoice(_)) => {}
            (QuestionKind::Essay, Answer::EssayText(t)) if t.len() > MAX_ESSAY_BYTES => {
                return Err(GradingError::EssayTooLong(*id))
            }
            (QuestionKind::Essay, Answer::EssayText(_)) => {}
            _ => return Err(GradingError::AnswerTypeMismatch(*id)),
        }
    }

    let mut next = session.clone();
    next.answers = session
        .assignment
        .iter()
        .map(|a| {
            let answer = answers.get(&a.question_id).cloned().unwrap_or(Answer::Blank);
            (a.question_id, answer)
        })
        .collect();
    next.time_submitted = Some(now);
    next.status = SessionStatus::Finalized;

    if next.essay_ids().next().is_none() {
        next = finalize_grading(&next, spec)?;
    }
    Ok(next)
}

fn mc_points(session: &ExamSession, spec: &ExamSpec) -> Vec<QuestionScore> {
    session
        .in_display_order()
        .into_iter()
        .filter(|a| a.kind == QuestionKind::MultipleChoice)
        .map(|a| {
            let awarded = match session.answers.get(&a.question_id) {
                Some(Answer::McChoice(c)) if Some(*c) == a.answer_key => spec.w_mc,
                Some(Answer::McChoice(_)) => -spec.penalty_mc,
                _ => Points::ZERO,
            };
            QuestionScore {
                question_id: a.question_id,
                kind: QuestionKind::MultipleChoice,
                awarded,
                maximum: spec.w_mc,
            }
        })
        .collect()
}

/// Raw multiple-choice points: `+w_mc` per correct answer, `-penalty_mc`
/// per wrong one, nothing for blanks. Uses the answer key captured at start.
pub fn grade_mc(session: &ExamSession, spec: &ExamSpec) -> Result<Points, GradingError> {
    require(
        session,
        "grade_mc",
        &[SessionStatus::Finalized, SessionStatus::Checked],
    )?;
    Ok(mc_points(session, spec).into_iter().map(|s| s.awarded).sum())
}

/// Records (or overwrites) a teacher's grade for one essay.
pub fn grade_essay(
    session: &ExamSession,
    spec: &ExamSpec,
    question: QuestionId,
    points: Points,
    grader: &str,
) -> Result<ExamSession, GradingError> {
    require(session, "grade_essay", &[SessionStatus::Finalized])?;
    let assigned = session
        .assigned(question)
        .ok_or(GradingError::UnknownAssignedQuestion(question))?;
    if assigned.kind != QuestionKind::Essay {
        return Err(GradingError::NotAnEssay(question));
    }
    if points.is_negative() || points > spec.w_essay {
        return Err(GradingError::PointsOutOfRange {
            points,
            max: spec.w_essay,
        });
    }
    let mut next = session.clone();
    next.essay_grades.insert(
        question,
        EssayGrade {
            points,
            grader: grader.to_string(),
        },
    );
    Ok(next)
}

/// Computes the final score and moves the session to Checked.
pub fn finalize_grading(
    session: &ExamSession,
    spec: &ExamSpec,
) -> Result<ExamSession, GradingError> {
    require(session, "finalize_grading", &[SessionStatus::Finalized])?;
    let report = compute_score(session, spec, ScoreMode::Final)?;
    let mut next = session.clone();
    next.final_score = Some(report.normalized.round_2dp());
    next.status = SessionStatus::Checked;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Every essay must be graded.
    Final,
    /// Ungraded essays count as zero and are listed in the report.
    Preview,
}

/// Reduces earned points to the unit and scales to the exam's rating.
pub fn compute_score(
    session: &ExamSession,
    spec: &ExamSpec,
    mode: ScoreMode,
) -> Result<ScoreReport, GradingError> {
    require(
        session,
        "compute_score",
        &[SessionStatus::Finalized, SessionStatus::Checked],
    )?;
    let ungraded: Vec<QuestionId> = session
        .essay_ids()
        .filter(|id| !session.essay_grades.contains_key(id))
        .collect();
    if mode == ScoreMode::Final && !ungraded.is_empty() {
        return Err(GradingError::MissingEssayGrades(ungraded));
    }

    let mut per_question = mc_points(session, spec);
    per_question.extend(
        session
            .in_display_order()
            .into_iter()
            .filter(|a| a.kind == QuestionKind::Essay)
            .map(|a| QuestionScore {
                question_id: a.question_id,
                kind: QuestionKind::Essay,
                awarded: session
                    .essay_grades
                    .get(&a.question_id)
                    .map_or(Points::ZERO, |g| g.points),
                maximum: spec.w_essay,
            }),
    );
    let order: BTreeMap<QuestionId, u32> = session
        .assignment
        .iter()
        .map(|a| (a.question_id, a.display_order))
        .collect();
    per_question.sort_by_key(|s| order[&s.question_id]);

    let raw_earned: Points = per_question.iter().map(|s| s.awarded).sum();
    let raw_max = spec.raw_max();
    let normalized = raw_earned / raw_max * spec.max_rating.points();
    Ok(ScoreReport {
        raw_earned,
        raw_max,
        normalized,
        max_rating: spec.max_rating.value(),
        per_question,
        preview: !ungraded.is_empty(),
        ungraded,
    })
}

pub fn mark_successful(session: &ExamSession, flag: bool) -> Result<ExamSession, GradingError> {
    require(session, "mark_successful", &[SessionStatus::Checked])?;
    let mut next = session.clone();
    next.successful = flag;
    Ok(next)
}
