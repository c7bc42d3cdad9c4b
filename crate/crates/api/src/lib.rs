//! HTTP routes of the examination service, all under `/api/v1`.
//!
//! | method | path | who |
//! |---|---|---|
//! | GET | `/health` | anyone |
//! | GET | `/api/v1/exams` | anyone (published exams, title and description) |
//! | POST | `/api/v1/exams/{id}/sessions` | anyone (student details in, session token out) |
//! | GET | `/api/v1/session` | session token |
//! | POST | `/api/v1/session/answers` | session token |
//! | GET, POST | `/api/v1/categories` | teacher |
//! | GET, PATCH, DELETE | `/api/v1/categories/{id}` | teacher |
//! | GET, POST | `/api/v1/questions` | teacher |
//! | GET, PUT, DELETE | `/api/v1/questions/{id}` | teacher |
//! | GET, POST | `/api/v1/exam-specs` | teacher |
//! | GET, PUT, DELETE | `/api/v1/exam-specs/{id}` | teacher |
//! | GET | `/api/v1/exam-specs/{id}/results` | teacher |
//! | GET | `/api/v1/exam-specs/{id}/attendance` | teacher |
//! | GET | `/api/v1/exam-specs/{id}/results.csv` | teacher |
//! | GET | `/api/v1/results` | teacher |
//! | GET | `/api/v1/results/{id}` | teacher |
//! | PUT | `/api/v1/results/{id}/essays/{question_id}` | teacher |
//! | POST | `/api/v1/results/{id}/finalize` | teacher |
//! | PUT | `/api/v1/results/{id}/successful` | teacher |
//! | GET, POST | `/api/v1/accounts` | admin |
//! | DELETE | `/api/v1/accounts/{username}` | admin |
//! | POST | `/api/v1/accounts/{username}/token` | admin |
//!
//! "teacher" routes also admit admins.

mod auth;
mod error;

use std::collections::BTreeMap;
use std::future::Future;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use odes_core::accounts::Role;
use odes_core::bank::QuestionFilter;
use odes_core::model::{CategoryId, ExamId, ExamSpecDraft, QuestionDraft, QuestionId, ResultId, StudentDetails};
use odes_core::service::SubmittedAnswer;
use odes_core::{Odes, OdesError, Points};
use serde::{Deserialize, Deserializer};

pub use auth::SESSION_TOKEN_HEADER;
pub use error::{status_for, ApiError, ErrorBody};

use auth::{SessionAuth, StaffAuth};

pub type AppState = Arc<Odes>;

type ApiResult<T> = Result<T, ApiError>;

const MAX_BODY_BYTES: usize = 8 * 1024 * 1024;

/// Runs a store operation off the async workers; writes fsync.
async fn blocking<T, F>(odes: &AppState, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&Odes) -> Result<T, OdesError> + Send + 'static,
{
    let odes = Arc::clone(odes);
    tokio::task::spawn_blocking(move || f(&odes))
        .await
        .map_err(|e| OdesError::new(odes_core::ErrorKind::Internal, "internal", e.to_string()))?
        .map_err(ApiError)
}

fn json<T: serde::Serialize>(value: T) -> Response {
    Json(value).into_response()
}

fn created<T: serde::Serialize>(value: T) -> Response {
    (StatusCode::CREATED, Json(value)).into_response()
}

pub fn router(odes: AppState) -> Router {
    let v1 = Router::new()
        .route("/exams", get(public_exams))
        .route("/exams/{id}/sessions", post(start_session))
        .route("/session", get(session_view))
        .route("/session/answers", post(submit_answers))
        .route("/categories", get(list_categories).post(create_category))
        .route(
            "/categories/{id}",
            get(get_category).patch(edit_category).delete(delete_category),
        )
        .route("/questions", get(list_questions).post(create_question))
        .route(
            "/questions/{id}",
            get(get_question).put(update_question).delete(delete_question),
        )
        .route("/exam-specs", get(list_exams).post(create_exam))
        .route(
            "/exam-specs/{id}",
            get(get_exam).put(update_exam).delete(delete_exam),
        )
        .route("/exam-specs/{id}/results", get(exam_results))
        .route("/exam-specs/{id}/attendance", get(attendance))
        .route("/exam-specs/{id}/results.csv", get(export_csv))
        .route("/results", get(list_results))
        .route("/results/{id}", get(result_detail))
        .route("/results/{id}/essays/{question_id}", put(grade_essay))
        .route("/results/{id}/finalize", post(finalize))
        .route("/results/{id}/successful", put(mark_successful))
        .route("/accounts", get(list_accounts).post(create_account))
        .route("/accounts/{username}", axum::routing::delete(delete_account))
        .route("/accounts/{username}/token", post(rotate_token));
    Router::new()
        .route("/health", get(health))
        .nest("/api/v1", v1)
        .fallback(not_found)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(odes)
}

/// Serves until `shutdown` resolves, then drains in-flight requests.
pub async fn serve(
    listener: tokio::net::TcpListener,
    odes: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(odes))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn health() -> Response {
    json(serde_json::json!({ "status": "ok" }))
}

async fn not_found() -> ApiError {
    ApiError(OdesError::not_found("no_route", "no such route"))
}

// ---- public and student ---------------------------------------------------

async fn public_exams(State(odes): State<AppState>) -> Response {
    json(odes.list_public_exams())
}

async fn start_session(
    State(odes): State<AppState>,
    path: Result<Path<ExamId>, PathRejection>,
    body: Result<Json<StudentDetails>, JsonRejection>,
) -> ApiResult<Response> {
    let Path(exam) = path?;
    let Json(student) = body?;
    blocking(&odes, move |o| o.start_session(exam, student)).await.map(created)
}

async fn session_view(State(odes): State<AppState>, SessionAuth(token): SessionAuth) -> ApiResult<Response> {
    blocking(&odes, move |o| o.session_view(&token)).await.map(json)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SubmitBody {
    #[serde(default)]
    answers: BTreeMap<QuestionId, SubmittedAnswer>,
}

async fn submit_answers(
    State(odes): State<AppState>,
    SessionAuth(token): SessionAuth,
    body: Result<Json<SubmitBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(body) = body?;
    blocking(&odes, move |o| o.submit(&token, body.answers)).await.map(json)
}

// ---- categories -----------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewCategory {
    name: String,
    #[serde(default)]
    parent: Option<CategoryId>,
}

/// Distinguishes an absent field from an explicit `null`.
fn double_option<'de, D, T>(d: D) -> Result<Option<Option<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(d).map(Some)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CategoryPatch {
    #[serde(default)]
    name: Option<String>,
    /// `null` moves the category to the root.
    #[serde(default, deserialize_with = "double_option")]
    parent: Option<Option<CategoryId>>,
}

async fn list_categories(State(odes): State<AppState>, StaffAuth(s): StaffAuth) -> ApiResult<Response> {
    blocking(&odes, move |o| o.list_categories(&s)).await.map(json)
}

async fn create_category(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    body: Result<Json<NewCategory>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(b) = body?;
    blocking(&odes, move |o| o.create_category(&s, &b.name, b.parent)).await.map(created)
}

async fn get_category(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<CategoryId>, PathRejection>,
) -> ApiResult<Response> {
    let Path(id) = path?;
    blocking(&odes, move |o| o.get_category(&s, id)).await.map(json)
}

async fn edit_category(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<CategoryId>, PathRejection>,
    body: Result<Json<CategoryPatch>, JsonRejection>,
) -> ApiResult<Response> {
    let Path(id) = path?;
    let Json(b) = body?;
    blocking(&odes, move |o| o.edit_category(&s, id, b.name.as_deref(), b.parent)).await.map(json)
}

async fn delete_category(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<CategoryId>, PathRejection>,
) -> ApiResult<StatusCode> {
    let Path(id) = path?;
    blocking(&odes, move |o| o.delete_category(&s, id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

// ---- questions ------------------------------------------------------------

async fn list_questions(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    query: Result<Query<QuestionFilter>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(filter) = query?;
    blocking(&odes, move |o| o.list_questions(&s, &filter)).await.map(json)
}

async fn create_question(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    body: Result<Json<QuestionDraft>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(draft) = body?;
    blocking(&odes, move |o| o.create_question(&s, &draft)).await.map(created)
}

async fn get_question(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<QuestionId>, PathRejection>,
) -> ApiResult<Response> {
    let Path(id) = path?;
    blocking(&odes, move |o| o.get_question(&s, id)).await.map(json)
}

async fn update_question(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<QuestionId>, PathRejection>,
    body: Result<Json<QuestionDraft>, JsonRejection>,
) -> ApiResult<Response> {
    let Path(id) = path?;
    let Json(draft) = body?;
    blocking(&odes, move |o| o.update_question(&s, id, &draft)).await.map(json)
}

async fn delete_question(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<QuestionId>, PathRejection>,
) -> ApiResult<StatusCode> {
    let Path(id) = path?;
    blocking(&odes, move |o| o.delete_question(&s, id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

// ---- exams ----------------------------------------------------------------

async fn list_exams(State(odes): State<AppState>, StaffAuth(s): StaffAuth) -> ApiResult<Response> {
    blocking(&odes, move |o| o.list_exams(&s)).await.map(json)
}

async fn create_exam(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    body: Result<Json<ExamSpecDraft>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(draft) = body?;
    blocking(&odes, move |o| o.create_exam(&s, &draft)).await.map(created)
}

async fn get_exam(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<ExamId>, PathRejection>,
) -> ApiResult<Response> {
    let Path(id) = path?;
    blocking(&odes, move |o| o.get_exam(&s, id)).await.map(json)
}

async fn update_exam(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<ExamId>, PathRejection>,
    body: Result<Json<ExamSpecDraft>, JsonRejection>,
) -> ApiResult<Response> {
    let Path(id) = path?;
    let Json(draft) = body?;
    blocking(&odes, move |o| o.update_exam(&s, id, &draft)).await.map(json)
}

async fn delete_exam(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<ExamId>, PathRejection>,
) -> ApiResult<StatusCode> {
    let Path(id) = path?;
    blocking(&odes, move |o| o.delete_exam(&s, id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn exam_results(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<ExamId>, PathRejection>,
) -> ApiResult<Response> {
    let Path(id) = path?;
    blocking(&odes, move |o| o.list_results(&s, Some(id))).await.map(json)
}

async fn attendance(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<ExamId>, PathRejection>,
) -> ApiResult<Response> {
    let Path(id) = path?;
    blocking(&odes, move |o| o.attendance(&s, id)).await.map(json)
}

async fn export_csv(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<ExamId>, PathRejection>,
) -> ApiResult<Response> {
    let Path(id) = path?;
    let csv = blocking(&odes, move |o| o.export_csv(&s, id)).await?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8".to_string()),
            (
                header::CONTENT_DISPOSITION,
                format!("attachment; filename=\"exam-{id}-results.csv\""),
            ),
        ],
        csv,
    )
        .into_response())
}

// ---- results --------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ResultsQuery {
    #[serde(default)]
    exam: Option<ExamId>,
}

async fn list_results(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    query: Result<Query<ResultsQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = query?;
    blocking(&odes, move |o| o.list_results(&s, q.exam)).await.map(json)
}

async fn result_detail(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<ResultId>, PathRejection>,
) -> ApiResult<Response> {
    let Path(id) = path?;
    blocking(&odes, move |o| o.result_detail(&s, id)).await.map(json)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EssayGradeBody {
    points: Points,
}

async fn grade_essay(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<(ResultId, QuestionId)>, PathRejection>,
    body: Result<Json<EssayGradeBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Path((id, question)) = path?;
    let Json(b) = body?;
    blocking(&odes, move |o| o.grade_essay(&s, id, question, b.points)).await.map(json)
}

async fn finalize(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<ResultId>, PathRejection>,
) -> ApiResult<Response> {
    let Path(id) = path?;
    blocking(&odes, move |o| o.finalize_grading(&s, id)).await.map(json)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SuccessfulBody {
    successful: bool,
}

async fn mark_successful(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<ResultId>, PathRejection>,
    body: Result<Json<SuccessfulBody>, JsonRejection>,
) -> ApiResult<Response> {
    let Path(id) = path?;
    let Json(b) = body?;
    blocking(&odes, move |o| o.mark_successful(&s, id, b.successful)).await.map(json)
}

// ---- accounts -------------------------------------------------------------

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewAccount {
    username: String,
    #[serde(default = "teacher_role")]
    role: Role,
}

fn teacher_role() -> Role {
    Role::Teacher
}

async fn list_accounts(State(odes): State<AppState>, StaffAuth(s): StaffAuth) -> ApiResult<Response> {
    blocking(&odes, move |o| o.list_accounts(&s)).await.map(json)
}

async fn create_account(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    body: Result<Json<NewAccount>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(b) = body?;
    blocking(&odes, move |o| o.create_account(&s, &b.username, b.role)).await.map(created)
}

async fn delete_account(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<String>, PathRejection>,
) -> ApiResult<StatusCode> {
    let Path(username) = path?;
    blocking(&odes, move |o| o.delete_account(&s, &username)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn rotate_token(
    State(odes): State<AppState>,
    StaffAuth(s): StaffAuth,
    path: Result<Path<String>, PathRejection>,
) -> ApiResult<Response> {
    let Path(username) = path?;
    blocking(&odes, move |o| o.rotate_token(&s, &username)).await.map(json)
}
