//! Durable state: the question bank, exams, accounts and the results table.
//!
//! The whole [`Database`] is kept in memory behind a lock and written to a
//! single JSON file after every successful mutation (write to a temporary
//! file, fsync, rename). A sibling `.lock` file holds an exclusive OS lock
//! for as long as the store is open, so a server and an offline CLI command
//! never write the same file concurrently.

mod csv;
mod document;
mod escape;
mod row;

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

pub use self::csv::{render_results_csv, CSV_HEADER};
pub use document::{AnswersDocument, DocumentError};
pub use escape::{escape_answer_text, unescape_answer_text, MalformedEscape};
pub use row::{ResultsRow, MAX_ANSWERS_BYTES, MAX_EXAM_ID, MAX_RESULT_ID};

use crate::accounts::Account;
use crate::bank::QuestionBank;
use crate::model::{ExamId, ExamSession, ExamSpec, ResultId, SessionStatus, StudentDetails, Timestamp};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PersistenceError {
    #[error("unknown result {0}")]
    UnknownResult(ResultId),
    #[error("unknown exam {0}")]
    UnknownExam(ExamId),
    #[error("{field} is {len} long, the column holds {max}")]
    FieldTooLong {
        field: &'static str,
        len: usize,
        max: usize,
    },
    #[error("stored data is malformed: {0}")]
    Malformed(String),
    #[error("identifier space exhausted for {0}")]
    IdSpaceExhausted(&'static str),
    #[error("storage unavailable: {0}")]
    Unavailable(String),
    #[error("storage at {0} is locked by another process")]
    Locked(PathBuf),
}

/// One line of an exam's attendance log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttendanceEntry {
    pub result_id: ResultId,
    pub student: StudentDetails,
    pub time_started: Timestamp,
    pub time_submitted: Option<Timestamp>,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Database {
    version: u32,
    pub bank: QuestionBank,
    pub exams: BTreeMap<ExamId, ExamSpec>,
    next_exam: u64,
    results: BTreeMap<ResultId, ResultsRow>,
    next_result: u64,
    pub accounts: BTreeMap<String, Account>,
    /// SHA-256 of a session token → the session it unlocks.
    pub session_tokens: BTreeMap<String, ResultId>,
}

impl Default for Database {
    fn default() -> Self {
        Database {
            version: FORMAT_VERSION,
            bank: QuestionBank::new(),
            exams: BTreeMap::new(),
            next_exam: 0,
            results: BTreeMap::new(),
            next_result: 0,
            accounts: BTreeMap::new(),
            session_tokens: BTreeMap::new(),
        }
    }
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn allocate_exam_id(&mut self) -> Result<ExamId, PersistenceError> {
        if self.next_exam >= MAX_EXAM_ID {
            return Err(PersistenceError::IdSpaceExhausted("exams"));
        }
        self.next_exam += 1;
        Ok(ExamId(self.next_exam))
    }

    /// Peeks at the id the next session will receive. Ids are never reused.
    pub fn next_result_id(&self) -> Result<ResultId, PersistenceError> {
        if self.next_result >= MAX_RESULT_ID {
            return Err(PersistenceError::IdSpaceExhausted("results"));
        }
        Ok(ResultId(self.next_result + 1))
    }

    pub fn exam(&self, id: ExamId) -> Result<&ExamSpec, PersistenceError> {
        self.exams.get(&id).ok_or(PersistenceError::UnknownExam(id))
    }

    /// Writes the session into its results row, replacing any earlier
    /// version. Nothing is stored if a column bound is exceeded.
    pub fn save_session(&mut self, session: &ExamSession) -> Result<&ResultsRow, PersistenceError> {
        let row = ResultsRow::from_session(session)?;
        let id = session.result_id;
        if id.0 > self.next_result {
            self.next_result = id.0;
        }
        self.results.insert(id, row);
        Ok(&self.results[&id])
    }

    pub fn load_session(&self, id: ResultId) -> Result<ExamSession, PersistenceError> {
        self.results
            .get(&id)
            .ok_or(PersistenceError::UnknownResult(id))?
            .to_session()
    }

    pub fn row(&self, id: ResultId) -> Option<&ResultsRow> {
        self.results.get(&id)
    }

    pub fn rows(&self) -> impl Iterator<Item = &ResultsRow> {
        self.results.values()
    }

    pub fn rows_for_exam(&self, exam: ExamId) -> impl Iterator<Item = &ResultsRow> {
        self.results.values().filter(move |r| r.diagonisma_id == exam.0)
    }

    pub fn sessions_for_exam(&self, exam: ExamId) -> Result<Vec<ExamSession>, PersistenceError> {
        self.rows_for_exam(exam).map(ResultsRow::to_session).collect()
    }

    pub fn all_sessions(&self) -> Result<Vec<ExamSession>, PersistenceError> {
        self.results.values().map(ResultsRow::to_session).collect()
    }

    /// Every session of an exam, earliest start first.
    pub fn attendance_log(&self, exam: ExamId) -> Result<Vec<AttendanceEntry>, PersistenceError> {
        self.exam(exam)?;
        let mut entries: Vec<AttendanceEntry> = self
            .sessions_for_exam(exam)?
            .into_iter()
            .map(|s| AttendanceEntry {
                result_id: s.result_id,
                student: s.student,
                time_started: s.time_started,
                time_submitted: s.time_submitted,
                status: s.status,
            })
            .collect();
        entries.sort_by_key(|e| (e.time_started, e.result_id));
        Ok(entries)
    }

    pub fn export_results_csv(&self, exam: ExamId) -> Result<String, PersistenceError> {
        self.exam(exam)?;
        Ok(render_results_csv(self.rows_for_exam(exam)))
    }
}

struct Backing {
    path: PathBuf,
    _lock: File,
}

/// A [`Database`] behind a reader/writer lock, optionally backed by a file.
pub struct Store {
    db: RwLock<Database>,
    backing: Option<Backing>,
}

impl Store {
    pub fn in_memory() -> Self {
        Store {
            db: RwLock::new(Database::new()),
            backing: None,
        }
    }

    /// Opens (or creates) the store at `path` and takes its exclusive lock.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, PersistenceError> {
        let path = path.as_ref().to_path_buf();
        let unavailable = |e: std::io::Error| PersistenceError::Unavailable(format!("{}: {e}", path.display()));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(unavailable)?;
        }
        let lock_path = lock_path(&path);
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(unavailable)?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(fs::TryLockError::WouldBlock) => return Err(PersistenceError::Locked(path)),
            Err(fs::TryLockError::Error(e)) => return Err(unavailable(e)),
        }
        let db = match fs::read(&path) {
            Ok(bytes) => {
                let db: Database = serde_json::from_slice(&bytes)
                    .map_err(|e| PersistenceError::Malformed(format!("{}: {e}", path.display())))?;
                if db.version != FORMAT_VERSION {
                    return Err(PersistenceError::Malformed(format!(
                        "{}: unsupported format version {}",
                        path.display(),
                        db.version
                    )));
                }
                db
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Database::new(),
            Err(e) => return Err(unavailable(e)),
        };
        let store = Store {
            db: RwLock::new(db),
            backing: Some(Backing { path, _lock: lock }),
        };
        store.flush(&store.db.read())?;
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.backing.as_ref().map(|b| b.path.as_path())
    }

    pub fn read<T>(&self, f: impl FnOnce(&Database) -> T) -> T {
        f(&self.db.read())
    }

    /// Runs `f` under the write lock and persists the result if it succeeds.
    /// `f` must validate before mutating so an error leaves the state intact.
    pub fn write<T, E>(&self, f: impl FnOnce(&mut Database) -> Result<T, E>) -> Result<T, E>
    where
        E: From<PersistenceError>,
    {
        let mut db = self.db.write();
        let out = f(&mut db)?;
        self.flush(&db)?;
        Ok(out)
    }

    fn flush(&self, db: &Database) -> Result<(), PersistenceError> {
        let Some(backing) = &self.backing else {
            return Ok(());
        };
        let unavailable = |e: std::io::Error| {
            tracing::error!(path = %backing.path.display(), error = %e, "failed to persist store");
            PersistenceError::Unavailable(format!("{}: {e}", backing.path.display()))
        };
        let bytes = serde_json::to_vec(db).map_err(|e| PersistenceError::Malformed(e.to_string()))?;
        let tmp = backing.path.with_extension("tmp");
        let mut file = File::create(&tmp).map_err(unavailable)?;
        file.write_all(&bytes).map_err(unavailable)?;
        file.sync_all().map_err(unavailable)?;
        fs::rename(&tmp, &backing.path).map_err(unavailable)?;
        Ok(())
    }
}

fn lock_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".lock");
    path.with_file_name(name)
}
