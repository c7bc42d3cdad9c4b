//! Bulk question import.
//!
//! The input is JSON Lines: one question record per non-blank line.
//!
//! ```text
//! {"title": "TCP uses...", "kind": "multiple_choice", "options": ["a","b","c","d"],
//!  "correct_index": 2, "categories": ["Networks/Transport"]}
//! {"title": "Explain congestion control", "kind": "essay", "categories": ["Networks"]}
//! ```
//!
//! `categories` holds `/`-separated name paths. Each segment is matched
//! against existing children of the previous segment by slug and created
//! when missing. `published` defaults to `true`. A record whose title and
//! resolved category set equal an existing question's is skipped as a
//! duplicate.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bank::QuestionBank;
use crate::error::{ErrorKind, OdesError};
use crate::model::{slugify, validate_question, CategoryId, QuestionDraft, QuestionKind, Timestamp};
use crate::service::{Odes, Staff};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportRecord {
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
    pub categories: Vec<String>,
    #[serde(default = "default_published")]
    pub published: bool,
}

fn default_published() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordError {
    pub line: usize,
    pub code: String,
    pub field: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportSummary {
    pub created: usize,
    pub categories_created: usize,
    /// Line numbers of records skipped as duplicates.
    pub duplicates: Vec<usize>,
    pub errors: Vec<RecordError>,
}

impl ImportSummary {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

fn split_path(path: &str) -> Result<Vec<&str>, OdesError> {
    let parts: Vec<&str> = path.split('/').map(str::trim).collect();
    if parts.iter().any(|p| slugify(p).is_empty()) {
        return Err(OdesError::validation(
            "bad_category_path",
            "categories",
            format!("category path {path:?} has an empty segment"),
        ));
    }
    Ok(parts)
}

fn find_child(bank: &QuestionBank, parent: Option<CategoryId>, name: &str) -> Option<CategoryId> {
    let slug = slugify(name);
    bank.categories()
        .find(|c| c.parent == parent && slugify(&c.name) == slug)
        .map(|c| c.id)
}

/// Resolves a path without creating anything; `None` if a segment is missing.
fn lookup(bank: &QuestionBank, parts: &[&str]) -> Option<CategoryId> {
    parts
        .iter()
        .try_fold(None, |parent, name| find_child(bank, parent, name).map(Some))
        .flatten()
}

fn resolve(bank: &mut QuestionBank, parts: &[&str], created: &mut usize) -> Result<CategoryId, OdesError> {
    let mut parent = None;
    for name in parts {
        parent = Some(match find_child(bank, parent, name) {
            Some(id) => id,
            None => {
                *created += 1;
                bank.create_category(name, parent)?.id
            }
        });
    }
    Ok(parent.expect("paths are non-empty"))
}

impl Odes {
    /// Loads every valid record; invalid ones are reported and skipped.
    /// Fails as a whole only when no line is a JSON record at all.
    pub fn import_bank(&self, staff: &Staff, input: &str) -> Result<ImportSummary, OdesError> {
        staff.require(crate::accounts::Role::Teacher)?;
        let lines: Vec<(usize, &str)> = input
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        let parsed: Vec<(usize, Result<ImportRecord, serde_json::Error>)> = lines
            .iter()
            .map(|(n, l)| (*n, serde_json::from_str::<ImportRecord>(l)))
            .collect();
        let any_json = lines
            .iter()
            .any(|(_, l)| serde_json::from_str::<serde_json::Value>(l).is_ok_and(|v| v.is_object()));
        if !lines.is_empty() && !any_json {
            return Err(OdesError::new(
                ErrorKind::Validation,
                "unparseable_file",
                "no line is a JSON question record",
            ));
        }

        let now = Timestamp::now();
        self.store().write(|db| {
            let mut summary = ImportSummary::default();
            for (line, record) in parsed {
                let outcome = record
                    .map_err(|e| OdesError::validation("bad_record", "record", e.to_string()))
                    .and_then(|r| import_one(&mut db.bank, r, now, &mut summary));
                match outcome {
                    Ok(true) => summary.created += 1,
                    Ok(false) => summary.duplicates.push(line),
                    Err(e) => summary.errors.push(RecordError {
                        line,
                        code: e.code.to_string(),
                        field: e.field.map(str::to_string),
                        message: e.message,
                    }),
                }
            }
            tracing::info!(
                created = summary.created,
                duplicates = summary.duplicates.len(),
                errors = summary.errors.len(),
                "bank import finished"
            );
            Ok(summary)
        })
    }
}

/// `Ok(false)` for a duplicate.
fn import_one(
    bank: &mut QuestionBank,
    r: ImportRecord,
    now: Timestamp,
    summary: &mut ImportSummary,
) -> Result<bool, OdesError> {
    let paths = r
        .categories
        .iter()
        .map(|p| split_path(p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut draft = QuestionDraft {
        title: r.title,
        description: r.description,
        kind: r.kind,
        options: r.options,
        correct_index: r.correct_index,
        // Placeholder so the content checks run before anything is created.
        categories: if paths.is_empty() { vec![] } else { vec![CategoryId(0)] },
        published: r.published,
    };
    validate_question(&draft)?;

    let existing: Option<BTreeSet<CategoryId>> = paths.iter().map(|p| lookup(bank, p)).collect();
    if let Some(cats) = &existing {
        if bank
            .questions()
            .any(|q| q.title == draft.title && &q.categories == cats)
        {
            return Ok(false);
        }
    }

    let mut cats = BTreeSet::new();
    for p in &paths {
        cats.insert(resolve(bank, p, &mut summary.categories_created)?);
    }
    draft.categories = cats.into_iter().collect();
    bank.create_question(&draft, now)?;
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::Store;

    const FIVE: &str = r#"{"title":"Q1","kind":"multiple_choice","options":["a","b","c","d"],"correct_index":0,"categories":["Networks/Transport"]}
{"title":"Q2","kind":"multiple_choice","options":["a","b","c","d"],"correct_index":1,"categories":["Networks/Transport"]}
{"title":"Q3","kind":"multiple_choice","options":["a","b","c","d"],"correct_index":2,"categories":["Networks"]}

{"title":"Q4","kind":"multiple_choice","options":["a","b","c","d"],"correct_index":3,"categories":["Networks/Link"]}
{"title":"Q5","kind":"multiple_choice","options":["a","b","c","d"],"correct_index":0,"categories":["Security"]}
"#;

    fn odes() -> Odes {
        Odes::new(Store::in_memory(), None)
    }

    #[test]
    fn five_valid_records() {
        let odes = odes();
        let s = odes.import_bank(&Odes::operator(), FIVE).unwrap();
        assert_eq!((s.created, s.categories_created), (5, 4));
        assert!(s.duplicates.is_empty() && s.errors.is_empty());
        let t = odes.store().read(|db| db.bank.category_by_slug("transport").cloned()).unwrap();
        let n = odes.store().read(|db| db.bank.category(t.parent.unwrap()).unwrap().name.clone());
        assert_eq!(n, "Networks");
    }

    #[test]
    fn reimport_reports_duplicates() {
        let odes = odes();
        odes.import_bank(&Odes::operator(), FIVE).unwrap();
        let s = odes.import_bank(&Odes::operator(), FIVE).unwrap();
        assert_eq!(s.created, 0);
        assert_eq!(s.categories_created, 0);
        assert_eq!(s.duplicates, vec![1, 2, 3, 5, 6]);
        assert!(s.is_clean());
    }

    #[test]
    fn bad_records_are_isolated() {
        let input = r#"{"title":"ok","kind":"essay","categories":["A"]}
{"title":"three options","kind":"multiple_choice","options":["a","b","c"],"correct_index":0,"categories":["New/Cat"]}
not json
{"title":"no cats","kind":"essay"}
{"title":"bad path","kind":"essay","categories":["A//B"]}
{"title":"ok too","kind":"essay","categories":["A"],"published":false}
"#;
        let odes = odes();
        let s = odes.import_bank(&Odes::operator(), input).unwrap();
        assert_eq!(s.created, 2);
        let codes: Vec<(usize, &str)> = s.errors.iter().map(|e| (e.line, e.code.as_str())).collect();
        assert_eq!(
            codes,
            vec![(2, "bad_options"), (3, "bad_record"), (4, "no_category"), (5, "bad_category_path")]
        );
        // The rejected record did not leave categories behind.
        assert_eq!(s.categories_created, 1);
        assert!(odes.store().read(|db| db.bank.category_by_slug("new").is_none()));
    }

    #[test]
    fn unparseable_file() {
        let e = odes().import_bank(&Odes::operator(), "hello\nworld\n").unwrap_err();
        assert_eq!(e.code, "unparseable_file");
        assert_eq!(odes().import_bank(&Odes::operator(), "").unwrap().created, 0);
    }

    #[test]
    fn same_title_in_other_category_is_not_a_duplicate() {
        let odes = odes();
        let input = r#"{"title":"Same","kind":"essay","categories":["A"]}
{"title":"Same","kind":"essay","categories":["B"]}
{"title":"Same","kind":"essay","categories":["a"]}
"#;
        let s = odes.import_bank(&Odes::operator(), input).unwrap();
        assert_eq!((s.created, s.duplicates.clone()), (2, vec![3]));
    }
}
