//! The whole workflow behind one handle, with role checks.
//!
//! Every mutating call runs inside a single [`Store::write`], so a session is
//! loaded, transitioned and saved without interleaving and is persisted
//! before the call returns.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::accounts::{self, Account, Role};
use crate::bank::QuestionFilter;
use crate::engine::{self, ExamView, Seed};
use crate::error::{category_ref, OdesError};
use crate::grading::{self, ScoreMode};
use crate::model::{
    slugify, validate_exam_spec, Answer, Category, CategoryId, ExamId, ExamSession, ExamSpec,
    ExamSpecDraft, ExamSpecError, MaxRating, Question, QuestionDraft, QuestionId, QuestionKind,
    ResultId, ScoreReport, SessionStatus, StudentDetails, Timestamp,
};
use crate::persistence::{AttendanceEntry, Database, Store};
use crate::points::Points;

/// An authenticated teacher or administrator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Staff {
    pub username: String,
    pub role: Role,
}

impl Staff {
    pub(crate) fn require(&self, role: Role) -> Result<(), OdesError> {
        if self.role.includes(role) {
            Ok(())
        } else {
            Err(OdesError::forbidden())
        }
    }
}

/// What anyone may see of a published exam.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicExam {
    pub id: ExamId,
    pub title: String,
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StartedSession {
    pub result_id: ResultId,
    /// Capability for this session's view and submit calls. Shown once.
    pub session_token: String,
    pub view: ExamView,
}

/// Read-only confirmation shown once answers are in.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub result_id: ResultId,
    pub exam_id: ExamId,
    pub exam_title: String,
    pub status: SessionStatus,
    pub time_started: Timestamp,
    pub time_submitted: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SessionView {
    Open(ExamView),
    Submitted(Receipt),
}

/// A student's answer as sent by a client. Choices name the display slot,
/// not the authored option index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum SubmittedAnswer {
    Choice(u8),
    Text(String),
    Blank,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub result_id: ResultId,
    pub exam_id: ExamId,
    pub exam_title: String,
    pub student: StudentDetails,
    pub status: SessionStatus,
    pub time_started: Timestamp,
    pub time_submitted: Option<Timestamp>,
    /// Stored final score (rounded to 2 decimals), once Checked.
    pub final_score: Option<Points>,
    /// `final_score` formatted with exactly two decimals.
    pub grade: Option<String>,
    pub successful: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradedQuestion {
    pub question_id: QuestionId,
    pub position: u32,
    pub kind: QuestionKind,
    /// Current bank title, if the question still exists.
    pub title: Option<String>,
    pub answer: Option<Answer>,
    /// Authored index of the correct option, from the session snapshot.
    pub correct_index: Option<u8>,
    pub awarded: Option<Points>,
    pub maximum: Points,
    pub grader: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultDetail {
    pub summary: ResultSummary,
    pub questions: Vec<GradedQuestion>,
    /// Preview score while Finalized, the full report once Checked.
    pub score: Option<ScoreReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccountInfo {
    pub username: String,
    pub role: Role,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuedCredential {
    pub username: String,
    pub role: Role,
    pub token: String,
}

pub struct Odes {
    store: Store,
    bootstrap_admin: Option<String>,
}

impl Odes {
    /// `admin_token`, if given, authenticates as the built-in `admin` account.
    pub fn new(store: Store, admin_token: Option<&str>) -> Self {
        Odes {
            store,
            bootstrap_admin: admin_token.filter(|t| !t.is_empty()).map(accounts::hash_token),
        }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// The identity used by local operator commands.
    pub fn operator() -> Staff {
        Staff {
            username: "operator".into(),
            role: Role::Admin,
        }
    }

    fn read<T>(&self, f: impl FnOnce(&Database) -> Result<T, OdesError>) -> Result<T, OdesError> {
        self.store.read(f)
    }

    fn write<T>(&self, f: impl FnOnce(&mut Database) -> Result<T, OdesError>) -> Result<T, OdesError> {
        self.store.write(f)
    }

    pub fn authenticate(&self, bearer: &str) -> Result<Staff, OdesError> {
        let hash = accounts::hash_token(bearer);
        if self.bootstrap_admin.as_deref() == Some(hash.as_str()) {
            return Ok(Staff {
                username: "admin".into(),
                role: Role::Admin,
            });
        }
        self.store.read(|db| {
            db.accounts
                .values()
                .find(|a| a.token_hash == hash)
                .map(|a| Staff {
                    username: a.username.clone(),
                    role: a.role,
                })
                .ok_or_else(OdesError::unauthorized)
        })
    }

    // ---- categories -------------------------------------------------------

    pub fn list_categories(&self, staff: &Staff) -> Result<Vec<Category>, OdesError> {
        staff.require(Role::Teacher)?;
        self.read(|db| Ok(db.bank.categories().cloned().collect()))
    }

    pub fn get_category(&self, staff: &Staff, id: CategoryId) -> Result<Category, OdesError> {
        staff.require(Role::Teacher)?;
        self.read(|db| {
            db.bank
                .category(id)
                .cloned()
                .ok_or_else(|| OdesError::not_found("unknown_category", format!("unknown category {id}")))
        })
    }

    pub fn create_category(
        &self,
        staff: &Staff,
        name: &str,
        parent: Option<CategoryId>,
    ) -> Result<Category, OdesError> {
        staff.require(Role::Teacher)?;
        self.write(|db| Ok(db.bank.create_category(name, parent)?))
    }

    pub fn edit_category(
        &self,
        staff: &Staff,
        id: CategoryId,
        name: Option<&str>,
        parent: Option<Option<CategoryId>>,
    ) -> Result<Category, OdesError> {
        staff.require(Role::Teacher)?;
        self.write(|db| Ok(db.bank.edit_category(id, name, parent)?))
    }

    /// Refused while an exam draws from the category.
    pub fn delete_category(&self, staff: &Staff, id: CategoryId) -> Result<(), OdesError> {
        staff.require(Role::Teacher)?;
        self.write(|db| {
            if let Some(exam) = db.exams.values().find(|e| e.source_category == id) {
                return Err(OdesError::conflict(
                    "category_in_use",
                    format!("exam {} draws from category {id}", exam.id),
                ));
            }
            Ok(db.bank.delete_category(id)?)
        })
    }

    // ---- questions --------------------------------------------------------

    pub fn list_questions(&self, staff: &Staff, filter: &QuestionFilter) -> Result<Vec<Question>, OdesError> {
        staff.require(Role::Teacher)?;
        self.read(|db| {
            Ok(db
                .bank
                .list_questions(filter)
                .map_err(category_ref("category"))?
                .into_iter()
                .cloned()
                .collect())
        })
    }

    pub fn get_question(&self, staff: &Staff, id: QuestionId) -> Result<Question, OdesError> {
        staff.require(Role::Teacher)?;
        self.read(|db| Ok(db.bank.get_question(id)?.clone()))
    }

    pub fn create_question(&self, staff: &Staff, draft: &QuestionDraft) -> Result<Question, OdesError> {
        staff.require(Role::Teacher)?;
        let now = Timestamp::now();
        self.write(|db| db.bank.create_question(draft, now).map_err(category_ref("categories")))
    }

    pub fn update_question(
        &self,
        staff: &Staff,
        id: QuestionId,
        draft: &QuestionDraft,
    ) -> Result<Question, OdesError> {
        staff.require(Role::Teacher)?;
        self.write(|db| {
            db.bank.get_question(id)?;
            db.bank.update_question(id, draft).map_err(category_ref("categories"))
        })
    }

    /// Refused while an Open session still has to display the question.
    pub fn delete_question(&self, staff: &Staff, id: QuestionId) -> Result<(), OdesError> {
        staff.require(Role::Teacher)?;
        self.write(|db| {
            db.bank.get_question(id)?;
            for s in db.all_sessions()? {
                if s.status == SessionStatus::Open && s.assigned(id).is_some() {
                    return Err(OdesError::conflict(
                        "question_in_use",
                        format!("open session {} displays question {id}", s.result_id),
                    ));
                }
            }
            db.bank.delete_question(id)?;
            Ok(())
        })
    }

    // ---- exams ------------------------------------------------------------

    pub fn list_public_exams(&self) -> Vec<PublicExam> {
        self.store.read(|db| {
            db.exams
                .values()
                .filter(|e| e.published)
                .map(|e| PublicExam {
                    id: e.id,
                    title: e.title.clone(),
                    description: e.description.clone(),
                })
                .collect()
        })
    }

    pub fn list_exams(&self, staff: &Staff) -> Result<Vec<ExamSpec>, OdesError> {
        staff.require(Role::Teacher)?;
        self.read(|db| Ok(db.exams.values().cloned().collect()))
    }

    pub fn get_exam(&self, staff: &Staff, id: ExamId) -> Result<ExamSpec, OdesError> {
        staff.require(Role::Teacher)?;
        self.read(|db| Ok(db.exam(id)?.clone()))
    }

    pub fn create_exam(&self, staff: &Staff, draft: &ExamSpecDraft) -> Result<ExamSpec, OdesError> {
        staff.require(Role::Teacher)?;
        self.write(|db| {
            let valid = validate_exam_spec(draft, |c| db.bank.has_category(c))?;
            let slug = exam_slug(db, &valid, None)?;
            let id = db.allocate_exam_id()?;
            let spec = build_exam(id, slug, valid)?;
            db.exams.insert(id, spec.clone());
            Ok(spec)
        })
    }

    /// Sessions keep the terms they were started under, so once any exist the
    /// counts, weights, penalty, rating and source category are frozen.
    pub fn update_exam(&self, staff: &Staff, id: ExamId, draft: &ExamSpecDraft) -> Result<ExamSpec, OdesError> {
        staff.require(Role::Teacher)?;
        self.write(|db| {
            let current = db.exam(id)?.clone();
            let valid = validate_exam_spec(draft, |c| db.bank.has_category(c))?;
            let slug = exam_slug(db, &valid, Some(&current))?;
            let spec = build_exam(id, slug, valid)?;
            if !spec.same_grading_terms(&current) && db.rows_for_exam(id).next().is_some() {
                return Err(OdesError::conflict(
                    "exam_in_use",
                    "grading terms cannot change once sessions exist",
                ));
            }
            db.exams.insert(id, spec.clone());
            Ok(spec)
        })
    }

    pub fn delete_exam(&self, staff: &Staff, id: ExamId) -> Result<(), OdesError> {
        staff.require(Role::Teacher)?;
        self.write(|db| {
            db.exam(id)?;
            if db.rows_for_exam(id).next().is_some() {
                return Err(OdesError::conflict("exam_in_use", "exam has sessions"));
            }
            db.exams.remove(&id);
            Ok(())
        })
    }

    // ---- student sessions -------------------------------------------------

    pub fn start_session(&self, exam: ExamId, student: StudentDetails) -> Result<StartedSession, OdesError> {
        self.start_session_at(exam, student, Timestamp::now(), Seed::random())
    }

    pub fn start_session_at(
        &self,
        exam: ExamId,
        student: StudentDetails,
        now: Timestamp,
        seed: Seed,
    ) -> Result<StartedSession, OdesError> {
        self.write(|db| {
            let spec = db.exam(exam)?.clone();
            let id = db.next_result_id()?;
            let session = engine::start_session(id, &spec, &db.bank, student, now, seed)?;
            let view = engine::render_assignment(&session, &spec, &db.bank)?;
            db.save_session(&session)?;
            let token = accounts::generate_token();
            db.session_tokens.insert(accounts::hash_token(&token), id);
            tracing::info!(result = %id, exam = %exam, "session started");
            Ok(StartedSession {
                result_id: id,
                session_token: token,
                view,
            })
        })
    }

    fn session_for_token(db: &Database, token: &str) -> Result<ExamSession, OdesError> {
        let id = db
            .session_tokens
            .get(&accounts::hash_token(token))
            .copied()
            .ok_or_else(OdesError::unauthorized)?;
        Ok(db.load_session(id)?)
    }

    /// Whether `token` is a live session token, whatever the session's status.
    pub fn is_session_token(&self, token: &str) -> bool {
        let hash = accounts::hash_token(token);
        self.store.read(|db| db.session_tokens.contains_key(&hash))
    }

    /// The questions while Open; a read-only receipt afterwards.
    pub fn session_view(&self, token: &str) -> Result<SessionView, OdesError> {
        self.read(|db| {
            let session = Self::session_for_token(db, token)?;
            let spec = db.exam(session.exam_id)?;
            if session.status == SessionStatus::Open {
                Ok(SessionView::Open(engine::render_assignment(&session, spec, &db.bank)?))
            } else {
                Ok(SessionView::Submitted(receipt(&session, spec)))
            }
        })
    }

    pub fn submit(&self, token: &str, answers: BTreeMap<QuestionId, SubmittedAnswer>) -> Result<Receipt, OdesError> {
        self.submit_at(token, answers, Timestamp::now())
    }

    pub fn submit_at(
        &self,
        token: &str,
        answers: BTreeMap<QuestionId, SubmittedAnswer>,
        now: Timestamp,
    ) -> Result<Receipt, OdesError> {
        self.write(|db| {
            let session = Self::session_for_token(db, token)?;
            if session.status != SessionStatus::Open {
                return Err(grading::GradingError::AlreadyFinalized.into());
            }
            let spec = db.exam(session.exam_id)?.clone();
            let answers = answers
                .into_iter()
                .map(|(id, a)| Ok((id, to_answer(&session, id, a)?)))
                .collect::<Result<BTreeMap<_, _>, OdesError>>()?;
            let next = grading::submit_answers(&session, &spec, answers, now)?;
            db.save_session(&next)?;
            tracing::info!(result = %next.result_id, status = %next.status, "answers submitted");
            Ok(receipt(&next, &spec))
        })
    }

    // ---- results and grading ----------------------------------------------

    pub fn list_results(&self, staff: &Staff, exam: Option<ExamId>) -> Result<Vec<ResultSummary>, OdesError> {
        staff.require(Role::Teacher)?;
        self.read(|db| {
            let sessions = match exam {
                Some(id) => {
                    db.exam(id)?;
                    db.sessions_for_exam(id)?
                }
                None => db.all_sessions()?,
            };
            Ok(sessions.iter().map(|s| summary(db, s)).collect())
        })
    }

    pub fn attendance(&self, staff: &Staff, exam: ExamId) -> Result<Vec<AttendanceEntry>, OdesError> {
        staff.require(Role::Teacher)?;
        self.read(|db| Ok(db.attendance_log(exam)?))
    }

    pub fn result_detail(&self, staff: &Staff, id: ResultId) -> Result<ResultDetail, OdesError> {
        staff.require(Role::Teacher)?;
        self.read(|db| detail(db, &db.load_session(id)?))
    }

    pub fn grade_essay(
        &self,
        staff: &Staff,
        id: ResultId,
        question: QuestionId,
        points: Points,
    ) -> Result<ResultDetail, OdesError> {
        staff.require(Role::Teacher)?;
        self.update_session(id, |s, spec| grading::grade_essay(s, spec, question, points, &staff.username))
    }

    pub fn finalize_grading(&self, staff: &Staff, id: ResultId) -> Result<ResultDetail, OdesError> {
        staff.require(Role::Teacher)?;
        self.update_session(id, grading::finalize_grading)
    }

    pub fn mark_successful(&self, staff: &Staff, id: ResultId, flag: bool) -> Result<ResultDetail, OdesError> {
        staff.require(Role::Teacher)?;
        self.update_session(id, |s, _| grading::mark_successful(s, flag))
    }

    fn update_session(
        &self,
        id: ResultId,
        op: impl FnOnce(&ExamSession, &ExamSpec) -> Result<ExamSession, grading::GradingError>,
    ) -> Result<ResultDetail, OdesError> {
        self.write(|db| {
            let session = db.load_session(id)?;
            let spec = db.exam(session.exam_id)?.clone();
            let next = op(&session, &spec)?;
            db.save_session(&next)?;
            detail(db, &next)
        })
    }

    pub fn export_csv(&self, staff: &Staff, exam: ExamId) -> Result<String, OdesError> {
        staff.require(Role::Teacher)?;
        self.read(|db| Ok(db.export_results_csv(exam)?))
    }

    // ---- accounts ---------------------------------------------------------

    pub fn list_accounts(&self, staff: &Staff) -> Result<Vec<AccountInfo>, OdesError> {
        staff.require(Role::Admin)?;
        self.read(|db| {
            Ok(db
                .accounts
                .values()
                .map(|a| AccountInfo {
                    username: a.username.clone(),
                    role: a.role,
                    created_at: a.created_at,
                })
                .collect())
        })
    }

    pub fn create_account(&self, staff: &Staff, username: &str, role: Role) -> Result<IssuedCredential, OdesError> {
        staff.require(Role::Admin)?;
        if !accounts::is_valid_username(username) {
            return Err(OdesError::validation(
                "bad_username",
                "username",
                "1-64 ASCII letters, digits, '.', '_' or '-'",
            ));
        }
        self.write(|db| {
            if db.accounts.contains_key(username) {
                return Err(OdesError::conflict("duplicate_username", format!("{username} exists")));
            }
            let token = accounts::generate_token();
            db.accounts.insert(
                username.to_string(),
                Account {
                    username: username.to_string(),
                    role,
                    token_hash: accounts::hash_token(&token),
                    created_at: Timestamp::now(),
                },
            );
            Ok(IssuedCredential {
                username: username.to_string(),
                role,
                token,
            })
        })
    }

    /// Replaces an account's token; the old one stops working immediately.
    pub fn rotate_token(&self, staff: &Staff, username: &str) -> Result<IssuedCredential, OdesError> {
        staff.require(Role::Admin)?;
        self.write(|db| {
            let account = db
                .accounts
                .get_mut(username)
                .ok_or_else(|| OdesError::not_found("unknown_account", format!("no account {username}")))?;
            let token = accounts::generate_token();
            account.token_hash = accounts::hash_token(&token);
            Ok(IssuedCredential {
                username: account.username.clone(),
                role: account.role,
                token,
            })
        })
    }

    pub fn delete_account(&self, staff: &Staff, username: &str) -> Result<(), OdesError> {
        staff.require(Role::Admin)?;
        self.write(|db| {
            db.accounts
                .remove(username)
                .map(|_| ())
                .ok_or_else(|| OdesError::not_found("unknown_account", format!("no account {username}")))
        })
    }
}

fn exam_slug(db: &Database, draft: &ExamSpecDraft, current: Option<&ExamSpec>) -> Result<String, OdesError> {
    let taken = |slug: &str| {
        db.exams
            .values()
            .any(|e| e.slug == slug && Some(e.id) != current.map(|c| c.id))
    };
    match (&draft.slug, current) {
        (Some(slug), _) if taken(slug) => Err(OdesError::conflict("duplicate_slug", format!("slug {slug:?} is taken"))),
        (Some(slug), _) => Ok(slug.clone()),
        (None, Some(current)) => Ok(current.slug.clone()),
        (None, None) => {
            let mut base = slugify(&draft.title);
            if base.is_empty() {
                base = "exam".into();
            }
            (1..)
                .map(|n| if n == 1 { base.clone() } else { format!("{base}-{n}") })
                .find(|s| !taken(s))
                .ok_or_else(|| OdesError::conflict("duplicate_slug", "no free slug"))
        }
    }
}

fn build_exam(id: ExamId, slug: String, d: ExamSpecDraft) -> Result<ExamSpec, OdesError> {
    let max_rating = MaxRating::try_from(d.max_rating).map_err(|_| ExamSpecError::BadMaxRating(d.max_rating))?;
    Ok(ExamSpec {
        id,
        title: d.title,
        slug,
        description: d.description,
        source_category: d.source_category,
        n_mc: d.n_mc,
        n_essay: d.n_essay,
        w_mc: d.w_mc,
        penalty_mc: d.penalty_mc,
        w_essay: d.w_essay,
        max_rating,
        randomize: d.randomize,
        published: d.published,
    })
}

/// Maps a display slot back to the authored option index. Anything that
/// does not fit is passed through for the grading rules to reject.
fn to_answer(session: &ExamSession, id: QuestionId, a: SubmittedAnswer) -> Result<Answer, OdesError> {
    Ok(match a {
        SubmittedAnswer::Blank => Answer::Blank,
        SubmittedAnswer::Text(t) => Answer::EssayText(t),
        SubmittedAnswer::Choice(slot) => {
            let assigned = session
                .assigned(id)
                .ok_or(grading::GradingError::UnknownAssignedQuestion(id))?;
            match assigned.option_permutation {
                Some(perm) => Answer::McChoice(
                    perm.original_at(slot)
                        .ok_or(grading::GradingError::ChoiceOutOfRange(id))?,
                ),
                None => return Err(grading::GradingError::AnswerTypeMismatch(id).into()),
            }
        }
    })
}

fn receipt(s: &ExamSession, spec: &ExamSpec) -> Receipt {
    Receipt {
        result_id: s.result_id,
        exam_id: s.exam_id,
        exam_title: spec.title.clone(),
        status: s.status,
        time_started: s.time_started,
        time_submitted: s.time_submitted,
    }
}

fn summary(db: &Database, s: &ExamSession) -> ResultSummary {
    ResultSummary {
        result_id: s.result_id,
        exam_id: s.exam_id,
        exam_title: db.exams.get(&s.exam_id).map(|e| e.title.clone()).unwrap_or_default(),
        student: s.student.clone(),
        status: s.status,
        time_started: s.time_started,
        time_submitted: s.time_submitted,
        final_score: s.final_score,
        grade: s.final_score.map(Points::fmt_2dp),
        successful: s.successful,
    }
}

fn detail(db: &Database, s: &ExamSession) -> Result<ResultDetail, OdesError> {
    let spec = db.exam(s.exam_id)?;
    let score = match s.status {
        SessionStatus::Open => None,
        _ => Some(grading::compute_score(s, spec, ScoreMode::Preview)?),
    };
    let awarded: BTreeMap<QuestionId, Points> = score
        .iter()
        .flat_map(|r| &r.per_question)
        .filter(|q| q.kind == QuestionKind::MultipleChoice || s.essay_grades.contains_key(&q.question_id))
        .map(|q| (q.question_id, q.awarded))
        .collect();
    let questions = s
        .in_display_order()
        .into_iter()
        .map(|a| GradedQuestion {
            question_id: a.question_id,
            position: a.display_order,
            kind: a.kind,
            title: db.bank.get_question(a.question_id).ok().map(|q| q.title.clone()),
            answer: s.answers.get(&a.question_id).cloned(),
            correct_index: a.answer_key,
            awarded: awarded.get(&a.question_id).copied(),
            maximum: match a.kind {
                QuestionKind::MultipleChoice => spec.w_mc,
                QuestionKind::Essay => spec.w_essay,
            },
            grader: s.essay_grades.get(&a.question_id).map(|g| g.grader.clone()),
        })
        .collect();
    Ok(ResultDetail {
        summary: summary(db, s),
        questions,
        score,
    })
}
