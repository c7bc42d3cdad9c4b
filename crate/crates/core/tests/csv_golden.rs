use std::collections::BTreeMap;

use odes_core::accounts::Role;
use odes_core::engine::Seed;
use odes_core::model::{ExamSpecDraft, QuestionDraft, QuestionKind, SessionStatus, StudentDetails};
use odes_core::persistence::Store;
use odes_core::service::{Staff, SubmittedAnswer};
use odes_core::{Odes, Points};

const GOLDEN: &str = include_str!("golden/results_three_statuses.csv");

fn student(first: &str, second: &str, am: &str, year: &str, dept: &str) -> StudentDetails {
    StudentDetails {
        first_name: first.into(),
        second_name: second.into(),
        am: am.into(),
        etos_spoudon: year.into(),
        tmima: dept.into(),
    }
}

/// One Open, one Finalized and one Checked session on a 2 MC + 1 essay exam.
fn scenario() -> (Odes, odes_core::model::ExamId) {
    let odes = Odes::new(Store::in_memory(), None);
    let t = Staff {
        username: "grader".into(),
        role: Role::Teacher,
    };
    let cat = odes.create_category(&t, "Databases", None).unwrap();
    for (i, kind) in [QuestionKind::MultipleChoice, QuestionKind::MultipleChoice, QuestionKind::Essay]
        .into_iter()
        .enumerate()
    {
        let mc = kind == QuestionKind::MultipleChoice;
        odes.create_question(
            &t,
            &QuestionDraft {
                title: format!("Question {i}"),
                kind: Some(kind),
                options: mc.then(|| vec!["w".into(), "x".into(), "y".into(), "z".into()]),
                correct_index: mc.then_some(i as i64),
                categories: vec![cat.id],
                published: true,
                ..Default::default()
            },
        )
        .unwrap();
    }
    let exam = odes
        .create_exam(
            &t,
            &ExamSpecDraft {
                title: "Databases final".into(),
                slug: None,
                description: None,
                source_category: cat.id,
                n_mc: 2,
                n_essay: 1,
                w_mc: Points::from_integer(1),
                penalty_mc: Points::ZERO,
                w_essay: Points::from_integer(6),
                max_rating: 10,
                randomize: true,
                published: true,
            },
        )
        .unwrap();

    let at = |s: &str| s.parse().unwrap();
    odes.start_session_at(exam.id, student("Anna", "Smith, Jr.", "1001", "2", "Informatics"), at("2024-06-01 10:00:00"), Seed(1))
        .unwrap();
    let b = odes
        .start_session_at(exam.id, student("Nikos", "Papas", "1002", "3", "Dept \"A\""), at("2024-06-01 10:01:00"), Seed(2))
        .unwrap();
    odes.submit_at(&b.session_token, BTreeMap::new(), at("2024-06-01 10:45:00")).unwrap();

    let c = odes
        .start_session_at(exam.id, student("Eleni", "Georgiou", "1003", "1", "Informatics"), at("2024-06-01 10:02:00"), Seed(3))
        .unwrap();
    let session = odes.store().read(|db| db.load_session(c.result_id)).unwrap();
    let answers = session
        .assignment
        .iter()
        .map(|a| {
            let answer = match (a.option_permutation, a.answer_key) {
                (Some(p), Some(k)) => SubmittedAnswer::Choice(p.slot_of(k).unwrap()),
                _ => SubmittedAnswer::Text("Normal forms, \"3NF\" and C:\\dump".into()),
            };
            (a.question_id, answer)
        })
        .collect();
    odes.submit_at(&c.session_token, answers, at("2024-06-01 10:50:30")).unwrap();
    let essay = session.essay_ids().next().unwrap();
    odes.grade_essay(&t, c.result_id, essay, "4.5".parse().unwrap()).unwrap();
    let checked = odes.finalize_grading(&t, c.result_id).unwrap();
    assert_eq!(checked.summary.status, SessionStatus::Checked);
    odes.mark_successful(&t, c.result_id, true).unwrap();
    (odes, exam.id)
}

#[test]
fn export_matches_golden_bytes() {
    let (odes, exam) = scenario();
    let csv = odes.export_csv(&Odes::operator(), exam).unwrap();
    assert_eq!(csv, GOLDEN);
}

#[test]
fn checked_score_is_exact_rational_rounded_half_up() {
    // (1 + 1 + 4.5) / 8 * 10 = 8.125, which rounds up to 8.13.
    let (odes, _) = scenario();
    let rows = odes.list_results(&Odes::operator(), None).unwrap();
    let checked = rows.iter().find(|r| r.status == SessionStatus::Checked).unwrap();
    assert_eq!(checked.final_score, Some("8.13".parse().unwrap()));
    let raw = Points::ratio(13, 2) / Points::from_integer(8) * Points::from_integer(10);
    assert_eq!(raw, Points::ratio(65, 8));
}

#[test]
fn golden_parses_with_an_independent_reader() {
    let mut reader = csv::ReaderBuilder::new().from_reader(GOLDEN.as_bytes());
    let headers = reader.headers().unwrap().clone();
    assert_eq!(headers.len(), 11);
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(&rows[0][3], "Smith, Jr.");
    assert_eq!(&rows[1][6], "Dept \"A\"");
    let statuses: Vec<&str> = rows.iter().map(|r| &r[8]).collect();
    assert_eq!(statuses, ["Open", "Finalized", "Checked"]);
    for r in &rows {
        let t = &r[7];
        assert!(t.is_empty() || chrono_like(t), "{t:?}");
    }
}

/// `YYYY-MM-DD HH:MM:SS`, checked character by character.
fn chrono_like(t: &str) -> bool {
    let b = t.as_bytes();
    b.len() == 19
        && b.iter().enumerate().all(|(i, c)| match i {
            4 | 7 => *c == b'-',
            10 => *c == b' ',
            13 | 16 => *c == b':',
            _ => c.is_ascii_digit(),
        })
}

#[test]
fn empty_exam_exports_header_only() {
    let (odes, _) = scenario();
    let t = Odes::operator();
    let cat = odes.list_categories(&t).unwrap()[0].id;
    let other = odes
        .create_exam(
            &t,
            &ExamSpecDraft {
                title: "Empty".into(),
                slug: None,
                description: None,
                source_category: cat,
                n_mc: 1,
                n_essay: 0,
                w_mc: Points::from_integer(1),
                penalty_mc: Points::ZERO,
                w_essay: Points::ZERO,
                max_rating: 100,
                randomize: false,
                published: false,
            },
        )
        .unwrap();
    assert_eq!(odes.export_csv(&t, other.id).unwrap(), GOLDEN.lines().next().unwrap().to_string() + "\n");
}
