//! Scripted annotation sessions: tool runs followed by QA authoring,
//! replayed into a dataset.
//!
//! ```json
//! {"scenarios": [{
//!   "id": "ctx-louvre", "title": "Louvre details",
//!   "steps": [{"provider": "google", "query": {"tool": "TextSearch", "parameters": {"query": "Louvre Museum"}}}],
//!   "qa": [{"question": "Where is @Louvre Museum?", "format": "OpenEnded", "gold": "Rue de Rivoli, Paris"}]
//! }]}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adapters::UnifiedQuery;
use crate::context::Context;
use crate::dataset::DatasetDocument;
use crate::model::ProviderId;
use crate::pipeline::{PipelineError, Workbench};
use crate::qa::{create_qa, AnswerFormat, Gold, QaDraft, QaError, QaPair};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenarios from {path}: {detail}")]
    Load { path: String, detail: String },
    #[error("scenario {scenario} step {step}: {source}")]
    Step {
        scenario: String,
        step: usize,
        #[source]
        source: PipelineError,
    },
    #[error("scenario {scenario} question {index}: {source}")]
    Qa {
        scenario: String,
        index: usize,
        #[source]
        source: QaError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub provider: ProviderId,
    pub query: UnifiedQuery,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioQa {
    pub question: String,
    pub format: AnswerFormat,
    #[serde(default)]
    pub options: Vec<String>,
    pub gold: Gold,
    #[serde(default)]
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub title: String,
    pub steps: Vec<Step>,
    #[serde(default)]
    pub qa: Vec<ScenarioQa>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub scenarios: Vec<Scenario>,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<ScenarioFile, ScenarioError> {
        let load_err = |detail: String| ScenarioError::Load {
            path: path.display().to_string(),
            detail,
        };
        let bytes = std::fs::read(path).map_err(|e| load_err(e.to_string()))?;
        serde_json::from_slice(&bytes).map_err(|e| load_err(e.to_string()))
    }
}

/// Runs every step into a fresh context, then authors its QA pairs.
pub fn run_scenario(wb: &Workbench, scenario: &Scenario) -> Result<(Context, Vec<QaPair>), ScenarioError> {
    let mut ctx = Context::new(&scenario.id, &scenario.title);
    for (i, step) in scenario.steps.iter().enumerate() {
        let outcome = wb
            .run_tool(step.provider, &step.query)
            .map_err(|source| ScenarioError::Step {
                scenario: scenario.id.clone(),
                step: i,
                source,
            })?;
        ctx = ctx.appended(outcome.draft);
    }
    let mut pairs = Vec::new();
    for (i, qa) in scenario.qa.iter().enumerate() {
        let draft = QaDraft {
            context_id: scenario.id.clone(),
            question: qa.question.clone(),
            format: qa.format,
            options: qa.options.clone(),
            gold: qa.gold.clone(),
            categories: qa.categories.clone(),
            supersedes: None,
        };
        let pair = create_qa(&ctx, draft).map_err(|source| ScenarioError::Qa {
            scenario: scenario.id.clone(),
            index: i,
            source,
        })?;
        pairs.push(pair);
    }
    Ok((ctx, pairs))
}

/// Runs all scenarios (in parallel under the `parallel` feature) and
/// assembles one dataset in scenario order.
pub fn build_dataset(wb: &Workbench, scenarios: &[Scenario]) -> Result<DatasetDocument, ScenarioError> {
    let results = crate::par::map(scenarios, |s| run_scenario(wb, s));
    let mut contexts = Vec::with_capacity(results.len());
    let mut pairs = Vec::new();
    for result in results {
        let (ctx, qa) = result?;
        contexts.push(ctx);
        pairs.extend(qa);
    }
    Ok(DatasetDocument::assemble(contexts, pairs))
}
