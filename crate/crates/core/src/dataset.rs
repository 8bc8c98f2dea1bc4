//! Canonical JSON export and schema-checked import of whole datasets.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use jsonschema::JSONSchema;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::cache::{canonical_key, CacheKey};
use crate::context::{render_formatted_with, Context, ContextEntry, DEFAULT_FORMATTED_TEMPLATE};
use crate::model::{validate_place, validate_route, ProviderId, ToolKind};
use crate::qa::{validate_draft, QaPair, DEFAULT_PROMPT_TEMPLATE};
use crate::template::Template;

pub const SCHEMA_VERSION: u64 = 1;

/// The published JSON Schema every exported file validates against.
pub const DATASET_SCHEMA: &str = include_str!("../../../schema/dataset.schema.json");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DatasetError {
    #[error("schema violation at '{pointer}': {detail}")]
    SchemaViolation { pointer: String, detail: String },
    #[error("unsupported schema_version {0}; this build reads version {SCHEMA_VERSION}")]
    UnsupportedVersion(u64),
    #[error("QA pair {qa_id} references missing context {context_id}")]
    DanglingReference { qa_id: String, context_id: String },
}

impl DatasetError {
    pub fn code(&self) -> &'static str {
        match self {
            DatasetError::SchemaViolation { .. } => "SchemaViolation",
            DatasetError::UnsupportedVersion(_) => "UnsupportedVersion",
            DatasetError::DanglingReference { .. } => "DanglingReference",
        }
    }
}

fn violation(pointer: impl Into<String>, detail: impl Into<String>) -> DatasetError {
    DatasetError::SchemaViolation {
        pointer: pointer.into(),
        detail: detail.into(),
    }
}

/// Per-entry traceability record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub sequence_no: u64,
    pub provider: ProviderId,
    pub tool: ToolKind,
    pub fetched_at: DateTime<Utc>,
    pub cache_key: CacheKey,
}

impl Provenance {
    pub fn of(entry: &ContextEntry) -> Provenance {
        Provenance {
            sequence_no: entry.sequence_no,
            provider: entry.provider,
            tool: entry.tool,
            fetched_at: entry.fetched_at,
            cache_key: entry.cache_key.clone(),
        }
    }
}

/// A context as exported: structured layer, frozen formatted rendering and
/// provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetContext {
    pub context: Context,
    pub formatted: String,
    pub provenance: Vec<Provenance>,
}

impl DatasetContext {
    pub fn freeze(context: Context, template: &Template) -> DatasetContext {
        let formatted = render_formatted_with(&context, template);
        let provenance = context.entries().iter().map(|e| Provenance::of(e)).collect();
        DatasetContext {
            context,
            formatted,
            provenance,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetContextRepr {
    id: String,
    title: String,
    entries: Vec<ContextEntry>,
    formatted: String,
    provenance: Vec<Provenance>,
}

impl Serialize for DatasetContext {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        DatasetContextRepr {
            id: self.context.id().to_string(),
            title: self.context.title().to_string(),
            entries: self.context.entries().iter().map(|e| e.as_ref().clone()).collect(),
            formatted: self.formatted.clone(),
            provenance: self.provenance.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for DatasetContext {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = DatasetContextRepr::deserialize(d)?;
        let context = Context::from_entries(repr.id, repr.title, repr.entries).map_err(serde::de::Error::custom)?;
        Ok(DatasetContext {
            context,
            formatted: repr.formatted,
            provenance: repr.provenance,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDocument {
    pub schema_version: u64,
    pub created_at: DateTime<Utc>,
    pub template_versions: BTreeMap<String, String>,
    pub contexts: Vec<DatasetContext>,
    pub qa_pairs: Vec<QaPair>,
}

impl DatasetDocument {
    /// Freezes `contexts` with the default templates. `created_at` is the
    /// latest fetch time across all entries (the epoch when there are none),
    /// so identical inputs always give identical documents.
    pub fn assemble(contexts: Vec<Context>, qa_pairs: Vec<QaPair>) -> DatasetDocument {
        let template = Template::bundled(DEFAULT_FORMATTED_TEMPLATE).expect("bundled template parses");
        let created_at = contexts
            .iter()
            .flat_map(|c| c.entries().iter().map(|e| e.fetched_at))
            .max()
            .unwrap_or(DateTime::<Utc>::UNIX_EPOCH);
        let contexts = crate::par::map(&contexts, |c| DatasetContext::freeze(c.clone(), &template));
        DatasetDocument {
            schema_version: SCHEMA_VERSION,
            created_at,
            template_versions: BTreeMap::from([
                ("formatted".to_string(), DEFAULT_FORMATTED_TEMPLATE.to_string()),
                ("prompt".to_string(), DEFAULT_PROMPT_TEMPLATE.to_string()),
            ]),
            contexts,
            qa_pairs,
        }
    }

    pub fn empty() -> DatasetDocument {
        Self::assemble(Vec::new(), Vec::new())
    }

    pub fn context(&self, id: &str) -> Option<&DatasetContext> {
        self.contexts.iter().find(|c| c.context.id() == id)
    }

    fn check_references(&self) -> Result<(), DatasetError> {
        let mut ids = BTreeSet::new();
        for (i, c) in self.contexts.iter().enumerate() {
            if !ids.insert(c.context.id()) {
                return Err(violation(format!("/contexts/{i}/id"), "duplicate context id"));
            }
            let expected: Vec<Provenance> = c.context.entries().iter().map(|e| Provenance::of(e)).collect();
            if c.provenance != expected {
                return Err(violation(
                    format!("/contexts/{i}/provenance"),
                    "provenance does not match the entries",
                ));
            }
        }
        let mut qa_ids = BTreeSet::new();
        for (i, qa) in self.qa_pairs.iter().enumerate() {
            if !qa_ids.insert(qa.id.as_str()) {
                return Err(violation(format!("/qa_pairs/{i}/id"), "duplicate QA pair id"));
            }
        }
        Ok(())
    }

    fn dangling(&self) -> Option<(usize, &QaPair)> {
        self.qa_pairs
            .iter()
            .enumerate()
            .find(|(_, qa)| self.context(&qa.context_id).is_none())
    }
}

/// Canonical, newline-terminated UTF-8 bytes.
pub fn export_json(d: &DatasetDocument) -> Result<Vec<u8>, DatasetError> {
    if let Some((_, qa)) = d.dangling() {
        return Err(DatasetError::DanglingReference {
            qa_id: qa.id.clone(),
            context_id: qa.context_id.clone(),
        });
    }
    d.check_references()?;
    let mut text = crate::canonical::to_string(d);
    text.push('\n');
    Ok(text.into_bytes())
}

fn compiled_schema() -> &'static JSONSchema {
    static SCHEMA: OnceLock<JSONSchema> = OnceLock::new();
    SCHEMA.get_or_init(|| {
        let doc: Value = serde_json::from_str(DATASET_SCHEMA).expect("bundled schema is JSON");
        JSONSchema::compile(&doc).expect("bundled schema compiles")
    })
}

/// Validates a parsed document against the published schema; returns the
/// first violation in document order.
pub fn check_schema(doc: &Value) -> Result<(), DatasetError> {
    let result = compiled_schema().validate(doc);
    match result {
        Ok(()) => Ok(()),
        Err(errors) => {
            let mut found: Vec<(String, String)> =
                errors.map(|e| (e.instance_path.to_string(), e.to_string())).collect();
            found.sort();
            let (pointer, detail) = found.into_iter().next().expect("validation failed with an error");
            Err(violation(pointer, detail))
        }
    }
}

pub fn import_json(bytes: &[u8]) -> Result<DatasetDocument, DatasetError> {
    let doc: Value =
        serde_json::from_slice(bytes).map_err(|e| violation("", format!("not valid JSON: {e}")))?;
    match doc.get("schema_version").and_then(Value::as_u64) {
        Some(v) if v > SCHEMA_VERSION => return Err(DatasetError::UnsupportedVersion(v)),
        _ => {}
    }
    check_schema(&doc)?;
    let d: DatasetDocument = serde_json::from_value(doc).map_err(|e| violation("", e.to_string()))?;
    if let Some((i, _)) = d.dangling() {
        return Err(violation(format!("/qa_pairs/{i}/context_id"), "context does not exist"));
    }
    d.check_references()?;
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetViolation {
    pub pointer: String,
    pub message: String,
}

fn context_violations(i: usize, c: &DatasetContext, template: Option<&Template>) -> Vec<DatasetViolation> {
    let mut out = Vec::new();
    let mut push = |pointer: String, message: String| out.push(DatasetViolation { pointer, message });
    for (e, entry) in c.context.entries().iter().enumerate() {
        let base = format!("/contexts/{i}/entries/{e}");
        for (p, place) in entry.normalized.places.iter().enumerate() {
            for v in validate_place(place) {
                push(format!("{base}/normalized/places/{p}/{}", v.field), v.message);
            }
        }
        for (r, route) in entry.normalized.routes.iter().enumerate() {
            for v in validate_route(route) {
                let field = v.field.replace(['.', '['], "/").replace(']', "");
                push(format!("{base}/normalized/routes/{r}/{field}"), v.message);
            }
        }
        match canonical_key(&entry.raw.request_template, entry.provider, entry.tool) {
            Ok(key) if key == entry.cache_key => {}
            Ok(_) => push(format!("{base}/cache_key"), "does not match the request template".into()),
            Err(e) => push(format!("{base}/raw/request_template"), e.to_string()),
        }
        if entry.fetched_at != entry.raw.fetched_at {
            push(format!("{base}/fetched_at"), "differs from the raw exchange".into());
        }
    }
    if let Some(template) = template {
        if render_formatted_with(&c.context, template) != c.formatted {
            push(
                format!("/contexts/{i}/formatted"),
                format!("differs from the {} rendering", template.version()),
            );
        }
    }
    out
}

/// Every module-level invariant over the whole dataset: place and route
/// validity, cache-key traceability, frozen renderings, QA typing and
/// '@' resolution. An empty list means the dataset is valid.
pub fn validate_dataset(d: &DatasetDocument) -> Vec<DatasetViolation> {
    let mut out = Vec::new();
    if d.schema_version != SCHEMA_VERSION {
        out.push(DatasetViolation {
            pointer: "/schema_version".into(),
            message: format!("unsupported version {}", d.schema_version),
        });
    }
    let template = d
        .template_versions
        .get("formatted")
        .and_then(|v| Template::bundled(v).ok());
    if template.is_none() {
        out.push(DatasetViolation {
            pointer: "/template_versions/formatted".into(),
            message: "unknown formatted template version".into(),
        });
    }
    let indexed: Vec<(usize, &DatasetContext)> = d.contexts.iter().enumerate().collect();
    for found in crate::par::map(&indexed, |&(i, c)| context_violations(i, c, template.as_ref())) {
        out.extend(found);
    }
    if let Err(DatasetError::SchemaViolation { pointer, detail }) = d.check_references() {
        out.push(DatasetViolation { pointer, message: detail });
    }
    let indexed: Vec<(usize, &QaPair)> = d.qa_pairs.iter().enumerate().collect();
    let qa_found = crate::par::map(&indexed, |&(i, qa)| match d.context(&qa.context_id) {
        None => Some(DatasetViolation {
            pointer: format!("/qa_pairs/{i}/context_id"),
            message: "context does not exist".into(),
        }),
        Some(c) => validate_draft(&c.context, &qa.draft).err().map(|e| DatasetViolation {
            pointer: format!("/qa_pairs/{i}"),
            message: format!("{}: {e}", e.code()),
        }),
    });
    out.extend(qa_found.into_iter().flatten());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dataset_round_trips() {
        let d = DatasetDocument::empty();
        let bytes = export_json(&d).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(
            text,
            "{\"contexts\":[],\"created_at\":\"1970-01-01T00:00:00Z\",\"qa_pairs\":[],\"schema_version\":1,\"template_versions\":{\"formatted\":\"formatted-v1\",\"prompt\":\"prompt-v1\"}}\n"
        );
        assert_eq!(import_json(&bytes).unwrap(), d);
        assert!(validate_dataset(&d).is_empty());
    }

    #[test]
    fn rejects_truncated_and_future_files() {
        let bytes = export_json(&DatasetDocument::empty()).unwrap();
        assert!(matches!(
            import_json(&bytes[..bytes.len() / 2]),
            Err(DatasetError::SchemaViolation { pointer, .. }) if pointer.is_empty()
        ));
        let future = String::from_utf8(bytes).unwrap().replace("\"schema_version\":1", "\"schema_version\":2");
        assert_eq!(import_json(future.as_bytes()), Err(DatasetError::UnsupportedVersion(2)));
    }

    #[test]
    fn schema_errors_carry_pointers() {
        let text = r#"{"contexts":[],"created_at":"1970-01-01T00:00:00Z","qa_pairs":[{"id":"q","context_id":"c","question":"Q?","format":"Sometimes","gold":"Yes"}],"schema_version":1,"template_versions":{}}"#;
        assert!(matches!(
            import_json(text.as_bytes()),
            Err(DatasetError::SchemaViolation { pointer, .. }) if pointer == "/qa_pairs/0/format"
        ));
        let dangling = text.replace("Sometimes", "YesNo");
        assert_eq!(
            import_json(dangling.as_bytes()),
            Err(violation("/qa_pairs/0/context_id", "context does not exist"))
        );
    }

    #[test]
    fn bundled_schema_compiles() {
        let _ = compiled_schema();
    }
}
