use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::CacheError;
use crate::adapters::RequestTemplate;
use crate::model::{ProviderId, ToolKind};

/// Hex SHA-256 identity of a request in placeholder form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Accepts only 64 lowercase hex characters.
    pub fn parse(s: &str) -> Option<CacheKey> {
        (s.len() == 64 && s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)))
            .then(|| CacheKey(s.to_string()))
    }
}

impl fmt::Display for CacheKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Digest of (provider, tool, method, url, sorted query params, canonical body).
///
/// Fails if a credential parameter holds anything but a placeholder: keys are
/// only ever computed over secret-free templates.
pub fn canonical_key(
    template: &RequestTemplate,
    provider: ProviderId,
    tool: ToolKind,
) -> Result<CacheKey, CacheError> {
    if !template.is_placeholder_form() {
        return Err(CacheError::ResolvedTemplate);
    }
    let identity = json!({
        "provider": provider,
        "tool": tool,
        "method": template.method,
        "url": template.url,
        "query_params": template.query_params,
        "body": template.body,
    });
    let canonical = crate::canonical::value_to_string(&identity);
    Ok(CacheKey(hex::encode(Sha256::digest(canonical.as_bytes()))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template(params: &[(&str, &str)]) -> RequestTemplate {
        params
            .iter()
            .fold(RequestTemplate::get("https://example.test/x"), |t, (k, v)| t.param(k, v))
    }

    #[test]
    fn parameter_order_does_not_matter() {
        let a = template(&[("a", "1"), ("b", "2")]);
        let b = template(&[("b", "2"), ("a", "1")]);
        assert_eq!(
            canonical_key(&a, ProviderId::TomTom, ToolKind::TextSearch).unwrap(),
            canonical_key(&b, ProviderId::TomTom, ToolKind::TextSearch).unwrap()
        );
    }

    #[test]
    fn provider_and_tool_are_part_of_identity() {
        let t = template(&[("a", "1")]);
        let k = canonical_key(&t, ProviderId::TomTom, ToolKind::TextSearch).unwrap();
        assert_ne!(k, canonical_key(&t, ProviderId::Google, ToolKind::TextSearch).unwrap());
        assert_ne!(k, canonical_key(&t, ProviderId::TomTom, ToolKind::PlaceDetails).unwrap());
        assert!(CacheKey::parse(k.as_str()).is_some());
    }

    #[test]
    fn resolved_templates_are_rejected() {
        let placeholder = template(&[("key", "key:TOMTOM_API_KEY")]);
        assert!(canonical_key(&placeholder, ProviderId::TomTom, ToolKind::TextSearch).is_ok());
        let resolved = template(&[("key", "s3cr3t")]);
        assert!(matches!(
            canonical_key(&resolved, ProviderId::TomTom, ToolKind::TextSearch),
            Err(CacheError::ResolvedTemplate)
        ));
    }
}
