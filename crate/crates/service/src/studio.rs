//! Authoring state shared by the HTTP API and the CLI session file:
//! sessions, contexts under construction and QA pairs.

use std::collections::BTreeMap;
use std::path::Path;

use geoqa_core::context::{Context, EntryDraft};
use geoqa_core::dataset::{export_json, import_json, DatasetDocument, DatasetError};
use geoqa_core::gateway::GatewayMode;
use geoqa_core::qa::{create_qa, revise_qa, QaDraft, QaError, QaPair};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StudioError {
    #[error("unknown context '{0}'")]
    UnknownContext(String),
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("unknown QA pair '{0}'")]
    UnknownQa(String),
    #[error(transparent)]
    Qa(#[from] QaError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("session file {path}: {detail}")]
    SessionFile { path: String, detail: String },
}

impl StudioError {
    pub fn code(&self) -> &'static str {
        match self {
            StudioError::UnknownContext(_) => "UnknownContext",
            StudioError::UnknownSession(_) => "UnknownSession",
            StudioError::UnknownQa(_) => "UnknownQa",
            StudioError::Qa(e) => e.code(),
            StudioError::Dataset(e) => e.code(),
            StudioError::SessionFile { .. } => "SessionFile",
        }
    }

    pub fn is_not_found(&self) -> bool {
        matches!(
            self,
            StudioError::UnknownContext(_) | StudioError::UnknownSession(_) | StudioError::UnknownQa(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub active_context_id: Option<String>,
    pub mode: GatewayMode,
    /// Set by any change since the last export.
    pub dirty: bool,
}

/// Where a new entry goes: an explicit context, the session's active one,
/// or a fresh context.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Target {
    #[serde(default)]
    pub context_id: Option<String>,
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(default)]
    pub title: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Studio {
    sessions: BTreeMap<String, Session>,
    contexts: BTreeMap<String, Context>,
    qa_pairs: Vec<QaPair>,
    next_session: u64,
    next_context: u64,
}

impl Studio {
    pub fn load(path: &Path) -> Result<Studio, StudioError> {
        if !path.exists() {
            return Ok(Studio::default());
        }
        let err = |detail: String| StudioError::SessionFile {
            path: path.display().to_string(),
            detail,
        };
        let bytes = std::fs::read(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_slice(&bytes).map_err(|e| err(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), StudioError> {
        let err = |detail: String| StudioError::SessionFile {
            path: path.display().to_string(),
            detail,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| err(e.to_string()))?;
        }
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, geoqa_core::canonical::to_string_pretty(self)).map_err(|e| err(e.to_string()))?;
        std::fs::rename(&tmp, path).map_err(|e| err(e.to_string()))
    }

    pub fn open_session(&mut self, mode: GatewayMode) -> Session {
        self.next_session += 1;
        let session = Session {
            id: format!("session-{:04}", self.next_session),
            active_context_id: None,
            mode,
            dirty: false,
        };
        self.sessions.insert(session.id.clone(), session.clone());
        session
    }

    pub fn session(&self, id: &str) -> Result<&Session, StudioError> {
        self.sessions.get(id).ok_or_else(|| StudioError::UnknownSession(id.to_string()))
    }

    /// Creates an empty context and, if given, makes it the session's active one.
    pub fn new_context(&mut self, title: &str, session_id: Option<&str>) -> Result<String, StudioError> {
        if let Some(s) = session_id {
            self.session(s)?;
        }
        let id = loop {
            self.next_context += 1;
            let id = format!("ctx-{:04}", self.next_context);
            if !self.contexts.contains_key(&id) {
                break id;
            }
        };
        self.contexts.insert(id.clone(), Context::new(&id, title));
        if let Some(s) = session_id.and_then(|s| self.sessions.get_mut(s)) {
            s.active_context_id = Some(id.clone());
            s.dirty = true;
        }
        Ok(id)
    }

    pub fn context(&self, id: &str) -> Result<&Context, StudioError> {
        self.contexts.get(id).ok_or_else(|| StudioError::UnknownContext(id.to_string()))
    }

    pub fn contexts(&self) -> impl Iterator<Item = &Context> {
        self.contexts.values()
    }

    /// Resolves `target` to an existing context id without changing anything.
    pub fn resolve(&self, target: &Target) -> Result<Option<String>, StudioError> {
        if let Some(id) = &target.context_id {
            self.context(id)?;
            return Ok(Some(id.clone()));
        }
        match &target.session_id {
            Some(s) => Ok(self.session(s)?.active_context_id.clone()),
            None => Ok(None),
        }
    }

    /// Makes the target context the session's active one.
    pub fn activate(&mut self, target: &Target) -> Result<(), StudioError> {
        let id = self.resolve(target)?;
        if let Some(s) = target.session_id.as_deref() {
            let session = self
                .sessions
                .get_mut(s)
                .ok_or_else(|| StudioError::UnknownSession(s.to_string()))?;
            session.active_context_id = id;
        }
        Ok(())
    }

    /// Appends `draft` to the target context and returns its id and the new
    /// entry's index.
    pub fn append(&mut self, target: &Target, draft: EntryDraft) -> Result<(String, usize), StudioError> {
        let id = match self.resolve(target)? {
            Some(id) => id,
            None => {
                let title = target.title.clone().unwrap_or_else(|| "Untitled context".to_string());
                self.new_context(&title, target.session_id.as_deref())?
            }
        };
        let ctx = self.contexts.get_mut(&id).expect("resolved context exists");
        *ctx = ctx.appended(draft);
        let index = ctx.len() - 1;
        self.touch(&id);
        Ok((id, index))
    }

    fn touch(&mut self, context_id: &str) {
        for s in self.sessions.values_mut() {
            if s.active_context_id.as_deref() == Some(context_id) {
                s.dirty = true;
            }
        }
    }

    /// Validates and stores a QA pair. A draft with `supersedes` becomes a
    /// revision of that pair; storing an identical draft twice is a no-op.
    pub fn add_qa(&mut self, draft: QaDraft) -> Result<QaPair, StudioError> {
        let ctx = self.context(&draft.context_id)?;
        let pair = match draft.supersedes.clone() {
            Some(previous) => {
                let previous = self.qa(&previous)?;
                revise_qa(ctx, previous, draft)?
            }
            None => create_qa(ctx, draft)?,
        };
        if self.qa(&pair.id).is_err() {
            self.touch(&pair.context_id.clone());
            self.qa_pairs.push(pair.clone());
        }
        Ok(pair)
    }

    pub fn qa(&self, id: &str) -> Result<&QaPair, StudioError> {
        self.qa_pairs
            .iter()
            .find(|q| q.id == id)
            .ok_or_else(|| StudioError::UnknownQa(id.to_string()))
    }

    pub fn qa_pairs(&self) -> &[QaPair] {
        &self.qa_pairs
    }

    /// Non-empty contexts (all, or those listed) in id order with their QA pairs.
    pub fn dataset(&self, only: &[String]) -> Result<DatasetDocument, StudioError> {
        for id in only {
            self.context(id)?;
        }
        let contexts: Vec<Context> = self
            .contexts
            .values()
            .filter(|c| !c.is_empty() && (only.is_empty() || only.iter().any(|id| id == c.id())))
            .cloned()
            .collect();
        let pairs = self
            .qa_pairs
            .iter()
            .filter(|q| contexts.iter().any(|c| c.id() == q.context_id))
            .cloned()
            .collect();
        Ok(DatasetDocument::assemble(contexts, pairs))
    }

    /// Canonical dataset bytes; clears every session's dirty flag.
    pub fn export(&mut self, only: &[String]) -> Result<Vec<u8>, StudioError> {
        let bytes = export_json(&self.dataset(only)?)?;
        for s in self.sessions.values_mut() {
            s.dirty = false;
        }
        Ok(bytes)
    }

    /// Merges a dataset file: contexts replace same-id contexts, QA pairs
    /// are added unless already present. Returns (contexts, new QA pairs).
    pub fn import(&mut self, bytes: &[u8]) -> Result<(usize, usize), StudioError> {
        let doc = import_json(bytes)?;
        let contexts = doc.contexts.len();
        for c in doc.contexts {
            self.contexts.insert(c.context.id().to_string(), c.context);
        }
        let mut added = 0;
        for qa in doc.qa_pairs {
            if self.qa(&qa.id).is_err() {
                self.qa_pairs.push(qa);
                added += 1;
            }
        }
        Ok((contexts, added))
    }
}
