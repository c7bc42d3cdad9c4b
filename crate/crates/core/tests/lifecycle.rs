use std::collections::BTreeMap;
use std::sync::{Arc, Barrier};

use odes_core::bank::QuestionBank;
use odes_core::engine::{start_session, Seed};
use odes_core::grading::{self, GradingError, ScoreMode};
use odes_core::model::{
    Answer, CategoryId, ExamId, ExamSession, ExamSpec, MaxRating, QuestionDraft, QuestionKind,
    ResultId, SessionStatus, StudentDetails, Timestamp,
};
use odes_core::persistence::Store;
use odes_core::service::SubmittedAnswer;
use odes_core::{Odes, Points};
use proptest::prelude::*;

fn bank() -> QuestionBank {
    let mut bank = QuestionBank::new();
    let cat = bank.create_category("Maths", None).unwrap().id;
    let now: Timestamp = "2024-01-01 00:00:00".parse().unwrap();
    for i in 0..4 {
        bank.create_question(
            &QuestionDraft {
                title: format!("mc {i}"),
                kind: Some(QuestionKind::MultipleChoice),
                options: Some(vec!["1".into(), "2".into(), "3".into(), "4".into()]),
                correct_index: Some(i % 4),
                categories: vec![cat],
                published: true,
                ..Default::default()
            },
            now,
        )
        .unwrap();
        bank.create_question(
            &QuestionDraft {
                title: format!("essay {i}"),
                kind: Some(QuestionKind::Essay),
                categories: vec![cat],
                published: true,
                ..Default::default()
            },
            now,
        )
        .unwrap();
    }
    bank
}

fn spec(n_essay: u32) -> ExamSpec {
    ExamSpec {
        id: ExamId(1),
        title: "t".into(),
        slug: "t".into(),
        description: None,
        source_category: CategoryId(1),
        n_mc: 2,
        n_essay,
        w_mc: Points::from_integer(1),
        penalty_mc: Points::ratio(1, 2),
        w_essay: Points::from_integer(5),
        max_rating: MaxRating::Ten,
        randomize: true,
        published: true,
    }
}

fn student() -> StudentDetails {
    StudentDetails {
        first_name: "A".into(),
        second_name: "B".into(),
        am: "1".into(),
        ..Default::default()
    }
}

fn open(n_essay: u32) -> (ExamSession, ExamSpec) {
    let spec = spec(n_essay);
    let s = start_session(ResultId(1), &spec, &bank(), student(), Timestamp::now(), Seed(9)).unwrap();
    (s, spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Submit,
    GradeEssay,
    Finalize,
    MarkSuccessful,
    ScoreFinal,
    ScorePreview,
    GradeMc,
}

const OPS: [Op; 7] = [
    Op::Submit,
    Op::GradeEssay,
    Op::Finalize,
    Op::MarkSuccessful,
    Op::ScoreFinal,
    Op::ScorePreview,
    Op::GradeMc,
];

/// Applies `op`; `Ok(Some(next))` for ops that produce a new session.
fn apply(op: Op, s: &ExamSession, spec: &ExamSpec) -> Result<Option<ExamSession>, GradingError> {
    let essay = s.essay_ids().next();
    match op {
        Op::Submit => grading::submit_answers(s, spec, BTreeMap::new(), Timestamp::now()).map(Some),
        Op::GradeEssay => match essay {
            Some(q) => grading::grade_essay(s, spec, q, Points::from_integer(2), "t").map(Some),
            None => Ok(None),
        },
        Op::Finalize => grading::finalize_grading(s, spec).map(Some),
        Op::MarkSuccessful => grading::mark_successful(s, true).map(Some),
        Op::ScoreFinal => grading::compute_score(s, spec, ScoreMode::Final).map(|_| None),
        Op::ScorePreview => grading::compute_score(s, spec, ScoreMode::Preview).map(|_| None),
        Op::GradeMc => grading::grade_mc(s, spec).map(|_| None),
    }
}

/// Sessions in every status, with and without essays graded.
fn sessions_in_each_status() -> Vec<(ExamSession, ExamSpec)> {
    let (o, spec) = open(1);
    let f = grading::submit_answers(&o, &spec, BTreeMap::new(), Timestamp::now()).unwrap();
    let q = f.essay_ids().next().unwrap();
    let graded = grading::grade_essay(&f, &spec, q, Points::from_integer(1), "t").unwrap();
    let c = grading::finalize_grading(&graded, &spec).unwrap();
    vec![(o, spec.clone()), (f, spec.clone()), (graded, spec.clone()), (c, spec)]
}

#[test]
fn every_status_operation_pair() {
    for (s, spec) in sessions_in_each_status() {
        let all_graded = s.essay_ids().all(|q| s.essay_grades.contains_key(&q));
        for op in OPS {
            let out = apply(op, &s, &spec);
            let status_after = out.as_ref().ok().and_then(|n| n.as_ref()).map(|n| n.status);
            use SessionStatus::*;
            match (s.status, op) {
                (Open, Op::Submit) => assert_eq!(status_after, Some(Finalized)),
                (_, Op::Submit) => assert_eq!(out.unwrap_err(), GradingError::AlreadyFinalized),
                (Finalized, Op::GradeEssay) => assert_eq!(status_after, Some(Finalized)),
                (Finalized, Op::Finalize) if all_graded => assert_eq!(status_after, Some(Checked)),
                (Finalized, Op::Finalize) => {
                    assert!(matches!(out, Err(GradingError::MissingEssayGrades(_))))
                }
                (Checked, Op::MarkSuccessful) => assert_eq!(status_after, Some(Checked)),
                (Finalized, Op::ScoreFinal) if !all_graded => {
                    assert!(matches!(out, Err(GradingError::MissingEssayGrades(_))))
                }
                (Finalized | Checked, Op::ScoreFinal | Op::ScorePreview | Op::GradeMc) => {
                    assert!(out.is_ok(), "{:?} {op:?}", s.status)
                }
                (status, op) => assert!(
                    matches!(out, Err(GradingError::WrongStatus { .. })),
                    "{status:?} {op:?} -> {out:?}"
                ),
            }
        }
    }
}

#[test]
fn essayless_submit_goes_straight_to_checked() {
    let (o, spec) = open(0);
    let c = grading::submit_answers(&o, &spec, BTreeMap::new(), Timestamp::now()).unwrap();
    assert_eq!(c.status, SessionStatus::Checked);
    assert_eq!(c.final_score, Some(Points::ZERO));
}

proptest! {
    /// Random operation sequences never produce a transition other than
    /// Open→Finalized, Open→Checked (no essays) or Finalized→Checked, and
    /// the persisted-session invariants hold after every step.
    #[test]
    fn random_sequences_respect_the_lifecycle(
        n_essay in 0u32..3,
        ops in proptest::collection::vec(proptest::sample::select(OPS.to_vec()), 0..25),
    ) {
        let (mut s, spec) = open(n_essay);
        for op in ops {
            let before = s.status;
            if let Ok(Some(next)) = apply(op, &s, &spec) {
                let after = next.status;
                prop_assert!(
                    before == after
                        || before.can_transition_to(after)
                        || (before == SessionStatus::Open && after == SessionStatus::Checked && n_essay == 0),
                    "{before:?} -> {after:?} via {op:?}"
                );
                prop_assert!(next.check_invariants().is_ok());
                prop_assert_eq!(&next.assignment, &s.assignment);
                s = next;
            }
        }
    }
}

#[test]
fn concurrent_double_submit_yields_one_success() {
    for round in 0..20 {
        let odes = Arc::new(Odes::new(Store::in_memory(), None));
        let t = Odes::operator();
        let cat = odes.create_category(&t, "C", None).unwrap().id;
        for i in 0..2 {
            odes.create_question(
                &t,
                &QuestionDraft {
                    title: format!("q{i}"),
                    kind: Some(QuestionKind::MultipleChoice),
                    options: Some(vec!["a".into(), "b".into(), "c".into(), "d".into()]),
                    correct_index: Some(0),
                    categories: vec![cat],
                    published: true,
                    ..Default::default()
                },
            )
            .unwrap();
        }
        let mut draft = odes_core::model::ExamSpecDraft::from(&spec(0));
        draft.source_category = cat;
        draft.slug = None;
        let exam = odes.create_exam(&t, &draft).unwrap();
        let started = odes.start_session(exam.id, student()).unwrap();
        let barrier = Arc::new(Barrier::new(2));
        let handles: Vec<_> = (0..2u8)
            .map(|slot| {
                let odes = Arc::clone(&odes);
                let barrier = Arc::clone(&barrier);
                let token = started.session_token.clone();
                let q = started.view.questions[0].question_id;
                std::thread::spawn(move || {
                    barrier.wait();
                    odes.submit(&token, BTreeMap::from([(q, SubmittedAnswer::Choice(slot))]))
                })
            })
            .collect();
        let results: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        let ok = results.iter().filter(|r| r.is_ok()).count();
        let conflicts = results
            .iter()
            .filter(|r| r.as_ref().is_err_and(|e| e.code == "already_finalized"))
            .count();
        assert_eq!((ok, conflicts), (1, 1), "round {round}: {results:?}");
        let stored = odes.store().read(|db| db.load_session(started.result_id)).unwrap();
        let answered: Vec<&Answer> = stored.answers.values().filter(|a| **a != Answer::Blank).collect();
        assert_eq!(answered.len(), 1);
    }
}
