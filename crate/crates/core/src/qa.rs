//! QA pair authoring over a context, prompt construction and answer checks.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::context::{format_rating, render_formatted, render_structured, Context};
use crate::model::ToolKind;
use crate::template::{Slots, Template, PROMPT_V1};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QaError {
    #[error("gold answer does not fit the {format:?} format: {detail}")]
    InvalidGold { format: AnswerFormat, detail: String },
    #[error("place '{0}' is not in the context")]
    UnresolvedPlace(String),
    #[error("{0:?} questions need at least two options")]
    MissingOptions(AnswerFormat),
    #[error("question is empty")]
    EmptyQuestion,
    #[error("draft targets context {draft} but was checked against {context}")]
    WrongContext { draft: String, context: String },
    #[error("question generation hook failed: {0}")]
    HookFailure(String),
}

impl QaError {
    pub fn code(&self) -> &'static str {
        match self {
            QaError::InvalidGold { .. } => "InvalidGold",
            QaError::UnresolvedPlace(_) => "UnresolvedPlace",
            QaError::MissingOptions(_) => "MissingOptions",
            QaError::EmptyQuestion => "EmptyQuestion",
            QaError::WrongContext { .. } => "WrongContext",
            QaError::HookFailure(_) => "HookFailure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnswerFormat {
    YesNo,
    SingleChoice,
    MultipleChoice,
    OpenEnded,
}

impl AnswerFormat {
    pub fn is_choice(&self) -> bool {
        matches!(self, AnswerFormat::SingleChoice | AnswerFormat::MultipleChoice)
    }
}

/// Gold answer. YesNo uses `Text("Yes"|"No")`; SingleChoice an option
/// index; MultipleChoice a set of option indices (0-based); OpenEnded text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gold {
    Index(usize),
    Indices(BTreeSet<usize>),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaDraft {
    pub context_id: String,
    pub question: String,
    pub format: AnswerFormat,
    #[serde(default)]
    pub options: Vec<String>,
    pub gold: Gold,
    #[serde(default)]
    pub categories: Vec<String>,
    /// Id of the pair this one revises, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supersedes: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub id: String,
    #[serde(flatten)]
    pub draft: QaDraft,
}

impl std::ops::Deref for QaPair {
    type Target = QaDraft;
    fn deref(&self) -> &QaDraft {
        &self.draft
    }
}

impl QaPair {
    /// Content-derived id: equal drafts get equal ids, and any edit (which
    /// records `supersedes`) gets a fresh one.
    pub fn id_for(draft: &QaDraft) -> String {
        let digest = Sha256::digest(crate::canonical::to_string(draft).as_bytes());
        format!("qa-{}", &hex::encode(digest)[..16])
    }
}

/// Finds every `@name` reference in `text` and resolves it against the
/// context's place names, preferring the longest name that matches at a
/// word boundary. Returns the resolved names in order of appearance.
pub fn resolve_references(ctx: &Context, text: &str) -> Result<Vec<String>, QaError> {
    let mut names: Vec<&str> = ctx.place_names().collect();
    names.sort_by_key(|n| std::cmp::Reverse(n.len()));
    let mut out = Vec::new();
    for (at, _) in text.match_indices('@') {
        let rest = &text[at + 1..];
        let hit = names.iter().find(|name| {
            rest.starts_with(**name)
                && rest[name.len()..]
                    .chars()
                    .next()
                    .is_none_or(|c| !c.is_alphanumeric())
        });
        match hit {
            Some(name) => out.push(name.to_string()),
            None => return Err(QaError::UnresolvedPlace(unresolved_token(rest))),
        }
    }
    Ok(out)
}

/// The name an unresolved reference most likely meant: the first word plus
/// following capitalised words, without trailing punctuation.
fn unresolved_token(rest: &str) -> String {
    let mut words = Vec::new();
    for (i, word) in rest.split(' ').enumerate() {
        let starts_upper = word.chars().next().is_some_and(|c| c.is_uppercase() || c.is_ascii_digit());
        if i > 0 && !starts_upper {
            break;
        }
        let trimmed = word.trim_end_matches(|c: char| !c.is_alphanumeric());
        if !trimmed.is_empty() {
            words.push(trimmed);
        }
        if trimmed.len() != word.len() || word.is_empty() {
            break;
        }
    }
    words.join(" ")
}

fn check_gold(draft: &QaDraft) -> Result<(), QaError> {
    let invalid = |detail: &str| QaError::InvalidGold {
        format: draft.format,
        detail: detail.to_string(),
    };
    let n = draft.options.len();
    match (draft.format, &draft.gold) {
        (AnswerFormat::YesNo, Gold::Text(t)) if t == "Yes" || t == "No" => Ok(()),
        (AnswerFormat::YesNo, _) => Err(invalid("expected \"Yes\" or \"No\"")),
        (AnswerFormat::SingleChoice, Gold::Index(i)) if *i < n => Ok(()),
        (AnswerFormat::SingleChoice, Gold::Index(i)) => Err(invalid(&format!("index {i} with {n} options"))),
        (AnswerFormat::SingleChoice, _) => Err(invalid("expected one option index")),
        (AnswerFormat::MultipleChoice, Gold::Indices(set)) if set.is_empty() => Err(invalid("empty index set")),
        (AnswerFormat::MultipleChoice, Gold::Indices(set)) => match set.iter().find(|&&i| i >= n) {
            Some(i) => Err(invalid(&format!("index {i} with {n} options"))),
            None => Ok(()),
        },
        (AnswerFormat::MultipleChoice, Gold::Index(i)) if *i < n => Ok(()),
        (AnswerFormat::MultipleChoice, _) => Err(invalid("expected a non-empty set of option indices")),
        (AnswerFormat::OpenEnded, Gold::Text(t)) if !t.trim().is_empty() => Ok(()),
        (AnswerFormat::OpenEnded, _) => Err(invalid("expected non-empty text")),
    }
}

/// Checks every invariant of `draft` against `ctx`.
pub fn validate_draft(ctx: &Context, draft: &QaDraft) -> Result<(), QaError> {
    if draft.context_id != ctx.id() {
        return Err(QaError::WrongContext {
            draft: draft.context_id.clone(),
            context: ctx.id().to_string(),
        });
    }
    if draft.question.trim().is_empty() {
        return Err(QaError::EmptyQuestion);
    }
    if draft.format.is_choice() && draft.options.len() < 2 {
        return Err(QaError::MissingOptions(draft.format));
    }
    if !draft.format.is_choice() && !draft.options.is_empty() {
        return Err(QaError::InvalidGold {
            format: draft.format,
            detail: "options are only for choice formats".into(),
        });
    }
    check_gold(draft)?;
    resolve_references(ctx, &draft.question)?;
    for option in &draft.options {
        resolve_references(ctx, option)?;
    }
    if let Gold::Text(text) = &draft.gold {
        resolve_references(ctx, text)?;
    }
    Ok(())
}

pub fn create_qa(ctx: &Context, draft: QaDraft) -> Result<QaPair, QaError> {
    validate_draft(ctx, &draft)?;
    Ok(QaPair {
        id: QaPair::id_for(&draft),
        draft,
    })
}

/// Creates a revision of `previous`; the old pair keeps its id and bytes.
pub fn revise_qa(ctx: &Context, previous: &QaPair, mut draft: QaDraft) -> Result<QaPair, QaError> {
    draft.supersedes = Some(previous.id.clone());
    create_qa(ctx, draft)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rendering {
    Structured,
    Formatted,
}

impl std::str::FromStr for Rendering {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "structured" => Ok(Rendering::Structured),
            "formatted" => Ok(Rendering::Formatted),
            other => Err(format!("unknown rendering '{other}'; expected structured|formatted")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub context_rendering: Rendering,
    pub prompt_text: String,
    pub qa_ref: String,
    pub template_version: String,
}

pub const DEFAULT_PROMPT_TEMPLATE: &str = PROMPT_V1;

/// Removes the `@` markers in front of resolved place names.
fn strip_markers(ctx: &Context, text: &str) -> String {
    match resolve_references(ctx, text) {
        Ok(_) => text.replace('@', ""),
        Err(_) => text.to_string(),
    }
}

pub fn build_prompt(ctx: &Context, qa: &QaPair, rendering: Rendering) -> PromptBundle {
    let template = Template::bundled(DEFAULT_PROMPT_TEMPLATE).expect("bundled template parses");
    let context = match rendering {
        Rendering::Structured => render_structured(ctx),
        Rendering::Formatted => render_formatted(ctx),
    };
    let options = qa
        .options
        .iter()
        .enumerate()
        .map(|(i, o)| format!("{}. {}", i + 1, strip_markers(ctx, o)))
        .collect();
    let instruction = match qa.format {
        AnswerFormat::YesNo => "Answer Yes or No.",
        AnswerFormat::SingleChoice => "Answer with the number of the one correct option.",
        AnswerFormat::MultipleChoice => "Answer with the numbers of all correct options, separated by commas.",
        AnswerFormat::OpenEnded => "Answer briefly.",
    };
    let slots = Slots::new()
        .set("context", context.trim_end().to_string())
        .set("question", strip_markers(ctx, &qa.question))
        .list("option", options)
        .set("instruction", instruction);
    PromptBundle {
        context_rendering: rendering,
        prompt_text: template.render("prompt", &slots).expect("prompt section exists"),
        qa_ref: qa.id.clone(),
        template_version: template.version().to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Correct,
    Incorrect,
    Unparseable,
}

/// Trim, collapse whitespace, casefold.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn strip_lead_in(text: &str) -> &str {
    let mut rest = text;
    for word in ["options", "option", "answers", "answer"] {
        if let Some(r) = rest.strip_prefix(word) {
            rest = r.trim_start();
            break;
        }
    }
    rest.trim_start_matches([':', '(', '#', ' '])
}

/// Leading option numbers: "3", "Option 3: ...", "1, 3 and 4".
fn leading_numbers(text: &str) -> Vec<usize> {
    let mut rest = strip_lead_in(text);
    let mut out = Vec::new();
    loop {
        let digits: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
        if digits.is_empty() {
            break;
        }
        match digits.parse() {
            Ok(n) => out.push(n),
            Err(_) => break,
        }
        rest = &rest[digits.len()..];
        let after_sep = rest.trim_start_matches([',', ' ', '&', '/']);
        let after_sep = after_sep.strip_prefix("and ").unwrap_or(after_sep);
        if !after_sep.starts_with(|c: char| c.is_ascii_digit()) {
            break;
        }
        rest = after_sep;
    }
    out
}

fn option_by_text(qa: &QaDraft, response: &str) -> Option<usize> {
    let wanted = response.trim_end_matches('.');
    qa.options.iter().position(|o| normalize_text(o) == wanted)
}

/// Extracts the chosen option indices (0-based) from a model response:
/// the whole response equal to one option's text, else leading 1-based
/// option numbers.
fn chosen_options(qa: &QaDraft, response: &str) -> Option<BTreeSet<usize>> {
    if let Some(i) = option_by_text(qa, response) {
        return Some(BTreeSet::from([i]));
    }
    let numbers = leading_numbers(response);
    if !numbers.is_empty() {
        let n = qa.options.len();
        return numbers
            .into_iter()
            .map(|k| (1..=n).contains(&k).then(|| k - 1))
            .collect();
    }
    None
}

fn leading_word(text: &str) -> &str {
    let end = text.find(|c: char| !c.is_alphabetic()).unwrap_or(text.len());
    &text[..end]
}

pub fn compare_answer(qa: &QaDraft, model_response: &str) -> Verdict {
    let response = normalize_text(model_response);
    if response.is_empty() {
        return Verdict::Unparseable;
    }
    let verdict = |ok: bool| if ok { Verdict::Correct } else { Verdict::Incorrect };
    match (qa.format, &qa.gold) {
        (AnswerFormat::YesNo, Gold::Text(gold)) => match leading_word(&response) {
            w @ ("yes" | "no") => verdict(w == gold.to_lowercase()),
            _ => Verdict::Unparseable,
        },
        (AnswerFormat::SingleChoice, Gold::Index(gold)) => match chosen_options(qa, &response) {
            Some(set) if set.len() == 1 => verdict(set.contains(gold)),
            Some(_) => Verdict::Incorrect,
            None => Verdict::Unparseable,
        },
        (AnswerFormat::MultipleChoice, gold) => {
            let gold: BTreeSet<usize> = match gold {
                Gold::Indices(set) => set.clone(),
                Gold::Index(i) => BTreeSet::from([*i]),
                Gold::Text(_) => return Verdict::Unparseable,
            };
            match chosen_options(qa, &response) {
                Some(set) => verdict(set == gold),
                None => Verdict::Unparseable,
            }
        }
        (AnswerFormat::OpenEnded, Gold::Text(gold)) => verdict(response == normalize_text(gold)),
        _ => Verdict::Unparseable,
    }
}

/// External question generator: context in, draft out.
pub trait DraftHook {
    fn draft(&self, ctx: &Context) -> Result<QaDraft, String>;
}

/// Deterministic default: asks for the rating of the place in the last
/// PlaceDetails entry.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubHook;

impl DraftHook for StubHook {
    fn draft(&self, ctx: &Context) -> Result<QaDraft, String> {
        let last = ctx.entries().last().ok_or("context is empty")?;
        if last.tool != ToolKind::PlaceDetails {
            return Err(format!("last entry is {}, not PlaceDetails", last.tool));
        }
        let place = last.normalized.places.first().ok_or("details entry has no place")?;
        let rating = place
            .rating
            .ok_or_else(|| format!("{} has no rating", place.display_name))?;
        Ok(QaDraft {
            context_id: ctx.id().to_string(),
            question: format!("What is the rating of @{}?", place.display_name),
            format: AnswerFormat::OpenEnded,
            options: Vec::new(),
            gold: Gold::Text(format_rating(rating)),
            categories: vec!["rating".to_string()],
            supersedes: None,
        })
    }
}

/// Runs the hook. The draft still has to pass [`create_qa`].
pub fn generate_question_draft(ctx: &Context, hook: &dyn DraftHook) -> Result<QaDraft, QaError> {
    hook.draft(ctx).map_err(QaError::HookFailure)
}
