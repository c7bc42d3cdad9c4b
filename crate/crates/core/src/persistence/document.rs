//! The `answers` column layout.
//!
//! One record per line, space-separated tokens. Free text is always a
//! double-quoted token holding [`escape_answer_text`] output, so it may span
//! lines. Version 1 records:
//!
//! ```text
//! odes-answers 1
//! started "2024-06-01 09:00:00"
//! q <question_id> mc <display_order> <permutation, 4 digits> <answer key>
//! q <question_id> essay <display_order>
//! a <question_id> choice <original option index>
//! a <question_id> text "<escaped essay>"
//! a <question_id> blank
//! g <question_id> <points> "<escaped grader>"
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::escape::{escape_answer_text, unescape_answer_text};
use crate::model::{
    Answer, AssignedQuestion, EssayGrade, OptionPermutation, QuestionId, QuestionKind, Timestamp,
};

const MAGIC: &str = "odes-answers";
const VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnswersDocument {
    pub time_started: Timestamp,
    pub assignment: Vec<AssignedQuestion>,
    pub answers: BTreeMap<QuestionId, Answer>,
    pub essay_grades: BTreeMap<QuestionId, EssayGrade>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("answers document line {line}: {reason}")]
pub struct DocumentError {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Word(String),
    Quoted(String),
}

fn quoted(text: &str) -> String {
    format!("\"{}\"", escape_answer_text(text))
}

impl AnswersDocument {
    pub fn encode(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION}\nstarted {}\n", quoted(&self.time_started.to_string()));
        for a in &self.assignment {
            let id = a.question_id;
            let order = a.display_order;
            match (a.kind, a.option_permutation, a.answer_key) {
                (QuestionKind::MultipleChoice, Some(perm), Some(key)) => {
                    let perm: String = perm.as_array().iter().map(|d| char::from(b'0' + d)).collect();
                    writeln!(out, "q {id} mc {order} {perm} {key}").unwrap();
                }
                _ => writeln!(out, "q {id} essay {order}").unwrap(),
            }
        }
        for (id, answer) in &self.answers {
            match answer {
                Answer::McChoice(c) => writeln!(out, "a {id} choice {c}").unwrap(),
                Answer::EssayText(t) => writeln!(out, "a {id} text {}", quoted(t)).unwrap(),
                Answer::Blank => writeln!(out, "a {id} blank").unwrap(),
            }
        }
        for (id, grade) in &self.essay_grades {
            writeln!(out, "g {id} {} {}", grade.points, quoted(&grade.grader)).unwrap();
        }
        out
    }

    pub fn decode(doc: &str) -> Result<Self, DocumentError> {
        let records = tokenize(doc)?;
        let mut records = records.into_iter();
        let err = |line: usize, reason: &str| DocumentError {
            line,
            reason: reason.to_string(),
        };

        match records.next() {
            Some((_, toks)) if toks == [Token::Word(MAGIC.into()), Token::Word(VERSION.into())] => {}
            Some((line, _)) => return Err(err(line, "unsupported header")),
            None => return Err(err(1, "empty document")),
        }

        let mut time_started = None;
        let mut assignment = Vec::new();
        let mut answers = BTreeMap::new();
        let mut essay_grades = BTreeMap::new();

        for (line, toks) in records {
            let words: Vec<&str> = toks
                .iter()
                .map(|t| match t {
                    Token::Word(w) => w.as_str(),
                    Token::Quoted(_) => "\"",
                })
                .collect();
            let text = |i: usize| match toks.get(i) {
                Some(Token::Quoted(s)) => Ok(s.clone()),
                _ => Err(err(line, "expected quoted text")),
            };
            let id = |i: usize| -> Result<QuestionId, DocumentError> {
                words
                    .get(i)
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| err(line, "expected question id"))
            };
            let small = |i: usize| -> Result<u8, DocumentError> {
                words
                    .get(i)
                    .and_then(|w| w.parse::<u8>().ok())
                    .filter(|v| *v <= 3)
                    .ok_or_else(|| err(line, "expected option index 0..=3"))
            };
            match words.as_slice() {
                ["started", "\""] => {
                    let ts = text(1)?;
                    time_started = Some(ts.parse().map_err(|_| err(line, "bad start time"))?);
                }
                ["q", _, "mc", _, perm, _] => {
                    let digits: Vec<u8> = perm.bytes().map(|b| b.wrapping_sub(b'0')).collect();
                    let perm = <[u8; 4]>::try_from(digits)
                        .ok()
                        .and_then(OptionPermutation::new)
                        .ok_or_else(|| err(line, "bad option permutation"))?;
                    assignment.push(AssignedQuestion {
                        question_id: id(1)?,
                        display_order: words[3].parse().map_err(|_| err(line, "bad display order"))?,
                        kind: QuestionKind::MultipleChoice,
                        option_permutation: Some(perm),
                        answer_key: Some(small(5)?),
                    });
                }
                ["q", _, "essay", order] => assignment.push(AssignedQuestion {
                    question_id: id(1)?,
                    display_order: order.parse().map_err(|_| err(line, "bad display order"))?,
                    kind: QuestionKind::Essay,
                    option_permutation: None,
                    answer_key: None,
                }),
                ["a", _, "choice", _] => {
                    answers.insert(id(1)?, Answer::McChoice(small(3)?));
                }
                ["a", _, "text", "\""] => {
                    answers.insert(id(1)?, Answer::EssayText(text(3)?));
                }
                ["a", _, "blank"] => {
                    answers.insert(id(1)?, Answer::Blank);
                }
                ["g", _, points, "\""] => {
                    let points = points.parse().map_err(|_| err(line, "bad points"))?;
                    essay_grades.insert(
                        id(1)?,
                        EssayGrade {
                            points,
                            grader: text(3)?,
                        },
                    );
                }
                _ => return Err(err(line, "unrecognised record")),
            }
        }

        Ok(AnswersDocument {
            time_started: time_started.ok_or_else(|| err(1, "missing start time"))?,
            assignment,
            answers,
            essay_grades,
        })
    }
}

/// Splits a document into records of tokens, tagging each record with the
/// line it starts on.
fn tokenize(doc: &str) -> Result<Vec<(usize, Vec<Token>)>, DocumentError> {
    let mut records = Vec::new();
    let mut current = Vec::new();
    let mut line = 1;
    let mut record_line = 1;
    let mut chars = doc.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\n' => {
                if !current.is_empty() {
                    records.push((record_line, std::mem::take(&mut current)));
                }
                line += 1;
                record_line = line;
            }
            ' ' => {}
            '"' => {
                let start_line = line;
                let mut raw = String::new();
                loop {
                    match chars.next() {
                        Some('"') => break,
                        Some('\\') => {
                            raw.push('\\');
                            match chars.next() {
                                Some(n) => {
                                    if n == '\n' {
                                        line += 1;
                                    }
                                    raw.push(n);
                                }
                                None => break,
                            }
                        }
                        Some(ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            raw.push(ch);
                        }
                        None => {
                            return Err(DocumentError {
                                line: start_line,
                                reason: "unterminated quoted text".into(),
                            })
                        }
                    }
                }
                let text = unescape_answer_text(&raw).map_err(|e| DocumentError {
                    line: start_line,
                    reason: e.to_string(),
                })?;
                current.push(Token::Quoted(text));
            }
            _ => {
                let mut word = String::from(c);
                while let Some(&n) = chars.peek() {
                    if matches!(n, ' ' | '\n' | '"') {
                        break;
                    }
                    word.push(n);
                    chars.next();
                }
                current.push(Token::Word(word));
            }
        }
    }
    if !current.is_empty() {
        records.push((record_line, current));
    }
    Ok(records)
}
