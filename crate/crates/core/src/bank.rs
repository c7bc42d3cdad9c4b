//! Question bank: the category taxonomy and the questions filed under it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{
    slugify, validate_question, Category, CategoryId, Question, QuestionDraft, QuestionError,
    QuestionId, QuestionKind, Timestamp,
};

const MAX_CATEGORY_NAME_CHARS: usize = 200;
const SLUG_ATTEMPTS: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BankError {
    #[error("category name must not be empty")]
    EmptyName,
    #[error("category name exceeds {MAX_CATEGORY_NAME_CHARS} characters")]
    NameTooLong,
    #[error("unknown parent category {0}")]
    UnknownParent(CategoryId),
    #[error("unknown category {0}")]
    UnknownCategory(CategoryId),
    #[error("no free slug for {0:?}")]
    DuplicateSlug(String),
    #[error("moving category {0} under {1} would create a cycle")]
    CycleDetected(CategoryId, CategoryId),
    #[error("category {category} is the only category of question {question}")]
    CategoryInUse {
        category: CategoryId,
        question: QuestionId,
    },
    #[error("unknown question {0}")]
    UnknownQuestion(QuestionId),
    #[error(transparent)]
    Invalid(#[from] QuestionError),
}

/// Listing filter. `category` matches the category and all its descendants.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionFilter {
    #[serde(default)]
    pub category: Option<CategoryId>,
    #[serde(default)]
    pub kind: Option<QuestionKind>,
    #[serde(default)]
    pub published_only: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionBank {
    categories: BTreeMap<CategoryId, Category>,
    questions: BTreeMap<QuestionId, Question>,
    next_category: u64,
    next_question: u64,
}

impl QuestionBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn category(&self, id: CategoryId) -> Option<&Category> {
        self.categories.get(&id)
    }

    pub fn categories(&self) -> impl Iterator<Item = &Category> {
        self.categories.values()
    }

    pub fn category_by_slug(&self, slug: &str) -> Option<&Category> {
        self.categories.values().find(|c| c.slug == slug)
    }

    pub fn has_category(&self, id: CategoryId) -> bool {
        self.categories.contains_key(&id)
    }

    pub fn create_category(
        &mut self,
        name: &str,
        parent: Option<CategoryId>,
    ) -> Result<Category, BankError> {
        check_category_name(name)?;
        if let Some(p) = parent {
            if !self.has_category(p) {
                return Err(BankError::UnknownParent(p));
            }
        }
        let slug = self.free_slug(name)?;
        self.next_category += 1;
        let category = Category {
            id: CategoryId(self.next_category),
            name: name.to_string(),
            parent,
            slug,
        };
        self.categories.insert(category.id, category.clone());
        Ok(category)
    }

    fn free_slug(&self, name: &str) -> Result<String, BankError> {
        let mut base = slugify(name);
        if base.is_empty() {
            base = "category".into();
        }
        let taken: BTreeSet<&str> = self.categories.values().map(|c| c.slug.as_str()).collect();
        (1..=SLUG_ATTEMPTS)
            .map(|n| if n == 1 { base.clone() } else { format!("{base}-{n}") })
            .find(|s| !taken.contains(s.as_str()))
            .ok_or(BankError::DuplicateSlug(base))
    }

    /// Renames and/or re-parents a category. The slug never changes.
    /// `new_parent: Some(None)` moves the category to the root.
    pub fn edit_category(
        &mut self,
        id: CategoryId,
        new_name: Option<&str>,
        new_parent: Option<Option<CategoryId>>,
    ) -> Result<Category, BankError> {
        if !self.has_category(id) {
            return Err(BankError::UnknownCategory(id));
        }
        if let Some(name) = new_name {
            check_category_name(name)?;
        }
        if let Some(Some(parent)) = new_parent {
            if !self.has_category(parent) {
                return Err(BankError::UnknownParent(parent));
            }
            if parent == id || self.ancestors(parent).contains(&id) {
                return Err(BankError::CycleDetected(id, parent));
            }
        }
        let category = self.categories.get_mut(&id).expect("checked above");
        if let Some(name) = new_name {
            category.name = name.to_string();
        }
        if let Some(parent) = new_parent {
            category.parent = parent;
        }
        Ok(category.clone())
    }

    /// Removes a category. Its children move up to its parent and it is
    /// dropped from every question that carries it.
    pub fn delete_category(&mut self, id: CategoryId) -> Result<(), BankError> {
        let parent = self
            .categories
            .get(&id)
            .ok_or(BankError::UnknownCategory(id))?
            .parent;
        if let Some(q) = self
            .questions
            .values()
            .find(|q| q.categories.len() == 1 && q.categories.contains(&id))
        {
            return Err(BankError::CategoryInUse {
                category: id,
                question: q.id,
            });
        }
        self.categories.remove(&id);
        for c in self.categories.values_mut() {
            if c.parent == Some(id) {
                c.parent = parent;
            }
        }
        for q in self.questions.values_mut() {
            q.categories.remove(&id);
        }
        Ok(())
    }

    /// Strict ancestors of `id`, nearest first.
    pub fn ancestors(&self, id: CategoryId) -> Vec<CategoryId> {
        let mut out = Vec::new();
        let mut cur = self.categories.get(&id).and_then(|c| c.parent);
        while let Some(p) = cur {
            if p == id || out.contains(&p) {
                break;
            }
            out.push(p);
            cur = self.categories.get(&p).and_then(|c| c.parent);
        }
        out
    }

    /// `id` together with every category below it.
    pub fn subtree(&self, id: CategoryId) -> BTreeSet<CategoryId> {
        let mut children: BTreeMap<CategoryId, Vec<CategoryId>> = BTreeMap::new();
        for c in self.categories.values() {
            if let Some(p) = c.parent {
                children.entry(p).or_default().push(c.id);
            }
        }
        let mut seen = BTreeSet::from([id]);
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            for &child in children.get(&cur).into_iter().flatten() {
                if seen.insert(child) {
                    stack.push(child);
                }
            }
        }
        seen
    }

    pub fn create_question(
        &mut self,
        draft: &QuestionDraft,
        now: Timestamp,
    ) -> Result<Question, BankError> {
        let valid = validate_question(draft)?;
        self.check_categories(&valid.categories)?;
        self.next_question += 1;
        let question = Question {
            id: QuestionId(self.next_question),
            title: valid.title,
            description: valid.description,
            body: valid.body,
            categories: valid.categories,
            published: valid.published,
            created_at: now,
        };
        self.questions.insert(question.id, question.clone());
        Ok(question)
    }

    /// Replaces a question's content. Sessions hold their own snapshot and
    /// are unaffected.
    pub fn update_question(
        &mut self,
        id: QuestionId,
        draft: &QuestionDraft,
    ) -> Result<Question, BankError> {
        if !self.questions.contains_key(&id) {
            return Err(BankError::UnknownQuestion(id));
        }
        let valid = validate_question(draft)?;
        self.check_categories(&valid.categories)?;
        let q = self.questions.get_mut(&id).expect("checked above");
        q.title = valid.title;
        q.description = valid.description;
        q.body = valid.body;
        q.categories = valid.categories;
        q.published = valid.published;
        Ok(q.clone())
    }

    pub fn delete_question(&mut self, id: QuestionId) -> Result<Question, BankError> {
        self.questions
            .remove(&id)
            .ok_or(BankError::UnknownQuestion(id))
    }

    pub fn get_question(&self, id: QuestionId) -> Result<&Question, BankError> {
        self.questions.get(&id).ok_or(BankError::UnknownQuestion(id))
    }

    pub fn questions(&self) -> impl Iterator<Item = &Question> {
        self.questions.values()
    }

    fn check_categories(&self, ids: &BTreeSet<CategoryId>) -> Result<(), BankError> {
        match ids.iter().find(|c| !self.has_category(**c)) {
            Some(c) => Err(BankError::UnknownCategory(*c)),
            None => Ok(()),
        }
    }

    /// Questions matching every set filter field, newest first, ties by id.
    pub fn list_questions(&self, filter: &QuestionFilter) -> Result<Vec<&Question>, BankError> {
        let scope = match filter.category {
            Some(c) if !self.has_category(c) => return Err(BankError::UnknownCategory(c)),
            Some(c) => Some(self.subtree(c)),
            None => None,
        };
        let mut out: Vec<&Question> = self
            .questions
            .values()
            .filter(|q| filter.kind.is_none_or(|k| q.kind() == k))
            .filter(|q| !filter.published_only || q.published)
            .filter(|q| {
                scope
                    .as_ref()
                    .is_none_or(|s| q.categories.iter().any(|c| s.contains(c)))
            })
            .collect();
        out.sort_by(|a, b| b.created_at.cmp(&a.created_at).then(a.id.cmp(&b.id)));
        Ok(out)
    }

    /// Published questions of `kind` in the subtree of `category`, by id.
    pub fn eligible(
        &self,
        category: CategoryId,
        kind: QuestionKind,
    ) -> Result<Vec<&Question>, BankError> {
        let mut v = self.list_questions(&QuestionFilter {
            category: Some(category),
            kind: Some(kind),
            published_only: true,
        })?;
        v.sort_by_key(|q| q.id);
        Ok(v)
    }

    pub fn count_available(
        &self,
        category: CategoryId,
        kind: QuestionKind,
    ) -> Result<usize, BankError> {
        self.eligible(category, kind).map(|v| v.len())
    }
}

fn check_category_name(name: &str) -> Result<(), BankError> {
    if name.trim().is_empty() {
        return Err(BankError::EmptyName);
    }
    if name.chars().count() > MAX_CATEGORY_NAME_CHARS {
        return Err(BankError::NameTooLong);
    }
    Ok(())
}
