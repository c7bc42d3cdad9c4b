use std::collections::{BTreeMap, BTreeSet};

use odes_core::bank::QuestionBank;
use odes_core::engine::{render_assignment, select_questions, shuffle_options, start_session, Seed};
use odes_core::model::{
    CategoryId, ExamId, ExamSpec, MaxRating, QuestionDraft, QuestionId, QuestionKind, ResultId,
    StudentDetails, Timestamp,
};
use odes_core::Points;
use proptest::prelude::*;
use rand::SeedableRng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn bank(n_mc: usize, n_essay: usize) -> QuestionBank {
    let mut bank = QuestionBank::new();
    let root = bank.create_category("Physics", None).unwrap().id;
    let child = bank.create_category("Optics", Some(root)).unwrap().id;
    let other = bank.create_category("History", None).unwrap().id;
    let now: Timestamp = "2024-01-01 00:00:00".parse().unwrap();
    let mut add = |title: String, kind, cat: CategoryId, published: bool| {
        let mc = kind == QuestionKind::MultipleChoice;
        bank.create_question(
            &QuestionDraft {
                title,
                kind: Some(kind),
                options: mc.then(|| vec!["a".into(), "b".into(), "c".into(), "d".into()]),
                correct_index: mc.then_some(2),
                categories: vec![cat],
                published,
                ..Default::default()
            },
            now,
        )
        .unwrap();
    };
    for i in 0..n_mc {
        add(format!("mc {i}"), QuestionKind::MultipleChoice, if i % 2 == 0 { root } else { child }, true);
    }
    for i in 0..n_essay {
        add(format!("essay {i}"), QuestionKind::Essay, child, true);
    }
    // Noise that must never be selected.
    add("foreign".into(), QuestionKind::MultipleChoice, other, true);
    add("draft".into(), QuestionKind::MultipleChoice, root, false);
    bank
}

fn spec(n_mc: u32, n_essay: u32, randomize: bool) -> ExamSpec {
    ExamSpec {
        id: ExamId(1),
        title: "Optics".into(),
        slug: "optics".into(),
        description: None,
        source_category: CategoryId(1),
        n_mc,
        n_essay,
        w_mc: Points::from_integer(1),
        penalty_mc: Points::ZERO,
        w_essay: Points::from_integer(1),
        max_rating: MaxRating::Ten,
        randomize,
        published: true,
    }
}

proptest! {
    #[test]
    fn assignments_are_well_formed(seed in any::<u64>(), n_mc in 0u32..6, n_essay in 0u32..4, randomize in any::<bool>()) {
        prop_assume!(n_mc + n_essay > 0);
        let bank = bank(6, 3);
        let spec = spec(n_mc, n_essay, randomize);
        let a = select_questions(&spec, &bank, Seed(seed)).unwrap();
        prop_assert_eq!(a.len() as u32, n_mc + n_essay);
        let ids: BTreeSet<QuestionId> = a.iter().map(|q| q.question_id).collect();
        prop_assert_eq!(ids.len(), a.len(), "no repeats");
        let orders: BTreeSet<u32> = a.iter().map(|q| q.display_order).collect();
        prop_assert_eq!(orders, (0..a.len() as u32).collect::<BTreeSet<_>>());
        let eligible_mc: BTreeSet<QuestionId> = bank.eligible(CategoryId(1), QuestionKind::MultipleChoice).unwrap().iter().map(|q| q.id).collect();
        let eligible_essay: BTreeSet<QuestionId> = bank.eligible(CategoryId(1), QuestionKind::Essay).unwrap().iter().map(|q| q.id).collect();
        for q in &a {
            let pool = if q.kind == QuestionKind::MultipleChoice { &eligible_mc } else { &eligible_essay };
            prop_assert!(pool.contains(&q.question_id));
            prop_assert_eq!(q.answer_key, bank.get_question(q.question_id).unwrap().correct_index());
        }
        prop_assert_eq!(a.iter().filter(|q| q.kind == QuestionKind::MultipleChoice).count() as u32, n_mc);
        prop_assert_eq!(&a, &select_questions(&spec, &bank, Seed(seed)).unwrap(), "same seed, same assignment");
    }

    #[test]
    fn non_random_exams_ignore_the_seed(a in any::<u64>(), b in any::<u64>()) {
        let bank = bank(6, 3);
        let spec = spec(3, 2, false);
        prop_assert_eq!(select_questions(&spec, &bank, Seed(a)).unwrap(), select_questions(&spec, &bank, Seed(b)).unwrap());
    }

    #[test]
    fn every_option_permutation_is_a_bijection(seed in any::<u64>()) {
        let bank = bank(1, 0);
        let q = bank.get_question(QuestionId(1)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p = shuffle_options(q, &mut rng).unwrap();
        let slots: BTreeSet<u8> = p.as_array().into_iter().collect();
        prop_assert_eq!(slots.len(), 4);
        for i in 0..4u8 {
            prop_assert_eq!(p.original_at(p.slot_of(i).unwrap()), Some(i));
        }
    }
}

#[test]
fn insufficient_pool_is_reported() {
    let bank = bank(2, 0);
    let err = select_questions(&spec(3, 0, true), &bank, Seed(1)).unwrap_err();
    assert_eq!(
        err.to_string(),
        "not enough multiple_choice questions: 2 available, 3 requested"
    );
}

/// 10 questions, 3 drawn, 20,000 seeds: each question is picked with
/// probability 3/10, and the unordered 3-subsets are uniform over C(10,3).
#[test]
fn selection_is_uniform_without_replacement() {
    let bank = bank(10, 0);
    let spec = spec(3, 0, true);
    let draws = 20_000;
    let mut per_question: BTreeMap<QuestionId, u64> = BTreeMap::new();
    let mut subsets: BTreeMap<Vec<QuestionId>, u64> = BTreeMap::new();
    for seed in 0..draws {
        let a = select_questions(&spec, &bank, Seed(seed)).unwrap();
        let mut ids: Vec<QuestionId> = a.iter().map(|q| q.question_id).collect();
        for id in &ids {
            *per_question.entry(*id).or_default() += 1;
        }
        ids.sort();
        *subsets.entry(ids).or_default() += 1;
    }
    assert_eq!(per_question.len(), 10);
    for (id, n) in &per_question {
        let f = *n as f64 / draws as f64;
        assert!((f - 0.3).abs() < 0.02, "{id}: {f}");
    }
    let cells = 120.0;
    let expected = draws as f64 / cells;
    let observed: Vec<f64> = subsets.values().map(|n| *n as f64).collect();
    assert_eq!(observed.len(), 120);
    let chi2: f64 = observed.iter().map(|o| (o - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new(cells - 1.0).unwrap().cdf(chi2);
    assert!(p > 0.001, "chi2 = {chi2}, p = {p}");
}

#[test]
fn rendered_view_hides_the_answer_key() {
    let bank = bank(6, 2);
    let spec = spec(4, 2, true);
    let student = StudentDetails {
        first_name: "X".into(),
        second_name: "Y".into(),
        am: "9".into(),
        ..Default::default()
    };
    let s = start_session(ResultId(1), &spec, &bank, student, Timestamp::now(), Seed(4)).unwrap();
    let view = render_assignment(&s, &spec, &bank).unwrap();
    let json = serde_json::to_string(&view).unwrap();
    for needle in ["correct", "answer_key", "w_mc", "penalty", "weight"] {
        assert!(!json.contains(needle), "{needle} leaked: {json}");
    }
    // The option marked correct ("c") sits at the slot the permutation says.
    for (q, a) in view.questions.iter().zip(s.in_display_order()) {
        if let (Some(options), Some(perm)) = (&q.options, a.option_permutation) {
            let slot = perm.slot_of(2).unwrap() as usize;
            assert_eq!(options[slot].text, "c");
        }
    }
}
