//! Path-tracking accessors over provider JSON, so mapping failures report
//! where in the document they happened (`results[0].poi.name`).

use serde_json::Value;

use super::{malformed, AdapterError};
use crate::model::LatLng;

#[derive(Clone)]
pub(crate) struct Node<'a> {
    value: &'a Value,
    path: String,
}

impl<'a> Node<'a> {
    pub fn root(value: &'a Value) -> Self {
        Node {
            value,
            path: String::new(),
        }
    }

    pub fn path(&self) -> &str {
        if self.path.is_empty() {
            "$"
        } else {
            &self.path
        }
    }

    fn key_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    pub fn field(&self, key: &str) -> Result<Node<'a>, AdapterError> {
        self.opt(key)
            .ok_or_else(|| malformed(&self.key_path(key), "missing field"))
    }

    /// Missing and `null` are both treated as absent.
    pub fn opt(&self, key: &str) -> Option<Node<'a>> {
        match self.value.get(key) {
            None | Some(Value::Null) => None,
            Some(value) => Some(Node {
                value,
                path: self.key_path(key),
            }),
        }
    }

    pub fn items(&self) -> Result<Vec<Node<'a>>, AdapterError> {
        let array = self
            .value
            .as_array()
            .ok_or_else(|| malformed(self.path(), "expected an array"))?;
        Ok(array
            .iter()
            .enumerate()
            .map(|(i, value)| Node {
                value,
                path: format!("{}[{i}]", self.path),
            })
            .collect())
    }

    /// Items of an optional array field; absent means empty.
    pub fn opt_items(&self, key: &str) -> Result<Vec<Node<'a>>, AdapterError> {
        match self.opt(key) {
            None => Ok(Vec::new()),
            Some(node) => node.items(),
        }
    }

    pub fn str(&self) -> Result<&'a str, AdapterError> {
        self.value
            .as_str()
            .ok_or_else(|| malformed(self.path(), "expected a string"))
    }

    pub fn non_empty_str(&self) -> Result<&'a str, AdapterError> {
        let s = self.str()?;
        if s.trim().is_empty() {
            return Err(malformed(self.path(), "empty string"));
        }
        Ok(s)
    }

    /// Number, or a string holding a number (Nominatim serialises coordinates as strings).
    pub fn f64(&self) -> Result<f64, AdapterError> {
        match self.value {
            Value::Number(n) => n.as_f64(),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        }
        .ok_or_else(|| malformed(self.path(), "expected a number"))
    }

    pub fn u64(&self) -> Result<u64, AdapterError> {
        let n = self.f64()?;
        if n < 0.0 || !n.is_finite() {
            return Err(malformed(self.path(), "expected a non-negative number"));
        }
        Ok(n.round() as u64)
    }

    pub fn bool(&self) -> Result<bool, AdapterError> {
        self.value
            .as_bool()
            .ok_or_else(|| malformed(self.path(), "expected a boolean"))
    }

    pub fn id_string(&self) -> Result<String, AdapterError> {
        match self.value {
            Value::String(s) if !s.is_empty() => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(malformed(self.path(), "expected an identifier")),
        }
    }

    pub fn latlng(&self, lat_key: &str, lng_key: &str) -> Result<LatLng, AdapterError> {
        let lat = self.field(lat_key)?.f64()?;
        let lng = self.field(lng_key)?.f64()?;
        LatLng::new(lat, lng).map_err(|e| malformed(self.path(), e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn reports_nested_paths() {
        let doc = json!({"results": [{"poi": {}}]});
        let root = Node::root(&doc);
        let first = &root.field("results").unwrap().items().unwrap()[0];
        let err = first.field("poi").unwrap().field("name").err().unwrap();
        assert_eq!(
            err,
            AdapterError::MalformedProviderResponse {
                path: "results[0].poi.name".into(),
                detail: "missing field".into()
            }
        );
    }

    #[test]
    fn root_arrays_and_string_numbers() {
        let doc = json!([{"lat": "48.5", "lon": "2.25"}]);
        let items = Node::root(&doc).items().unwrap();
        let p = items[0].latlng("lat", "lon").unwrap();
        assert_eq!((p.latitude(), p.longitude()), (48.5, 2.25));
        let err = items[0].field("name").err().unwrap();
        assert!(matches!(err, AdapterError::MalformedProviderResponse { path, .. } if path == "[0].name"));
    }
}
