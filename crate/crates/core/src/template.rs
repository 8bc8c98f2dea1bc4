//! Versioned plain-text templates with named slots.
//!
//! A template file holds sections introduced by `[name]` lines; `#` lines
//! before the first section are comments. Inside a section, `{slot}` is
//! replaced by its value and `{slot|text}` falls back to `text`. A line that
//! references a slot with no value and no fallback is dropped, and a line
//! referencing a list slot is emitted once per item.

use std::collections::BTreeMap;

use thiserror::Error;

pub const FORMATTED_V1: &str = "formatted-v1";
pub const PROMPT_V1: &str = "prompt-v1";

const FORMATTED_V1_TEXT: &str = include_str!("../../../templates/formatted-v1.txt");
const PROMPT_V1_TEXT: &str = include_str!("../../../templates/prompt-v1.txt");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("unknown template version {0}")]
    UnknownVersion(String),
    #[error("template line {line}: {detail}")]
    Syntax { line: usize, detail: String },
    #[error("template has no section [{0}]")]
    MissingSection(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SlotValue {
    One(String),
    Many(Vec<String>),
}

/// Slot values for one section render.
#[derive(Debug, Clone, Default)]
pub struct Slots {
    values: BTreeMap<&'static str, SlotValue>,
}

impl Slots {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(mut self, name: &'static str, value: impl Into<String>) -> Self {
        self.values.insert(name, SlotValue::One(value.into()));
        self
    }

    pub fn set_opt(self, name: &'static str, value: Option<String>) -> Self {
        match value {
            Some(v) => self.set(name, v),
            None => self,
        }
    }

    pub fn list(mut self, name: &'static str, items: Vec<String>) -> Self {
        self.values.insert(name, SlotValue::Many(items));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Slot { name: String, fallback: Option<String> },
}

type Line = Vec<Piece>;

#[derive(Debug, Clone)]
pub struct Template {
    version: String,
    sections: BTreeMap<String, Vec<Line>>,
}

fn parse_line(text: &str, line_no: usize) -> Result<Line, TemplateError> {
    let mut pieces = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            pieces.push(Piece::Text(rest[..open].to_string()));
        }
        let close = rest[open..].find('}').ok_or_else(|| TemplateError::Syntax {
            line: line_no,
            detail: "unclosed slot".into(),
        })? + open;
        let inner = &rest[open + 1..close];
        let (name, fallback) = match inner.split_once('|') {
            Some((n, f)) => (n, Some(f.to_string())),
            None => (inner, None),
        };
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_lowercase() || c == '_') {
            return Err(TemplateError::Syntax {
                line: line_no,
                detail: format!("bad slot name '{name}'"),
            });
        }
        pieces.push(Piece::Slot {
            name: name.to_string(),
            fallback,
        });
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        pieces.push(Piece::Text(rest.to_string()));
    }
    Ok(pieces)
}

impl Template {
    pub fn parse(version: &str, text: &str) -> Result<Template, TemplateError> {
        let mut sections: BTreeMap<String, Vec<Line>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            if let Some(name) = raw.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                sections.insert(name.to_string(), Vec::new());
                current = Some(name.to_string());
                continue;
            }
            match &current {
                None if raw.starts_with('#') || raw.trim().is_empty() => {}
                None => {
                    return Err(TemplateError::Syntax {
                        line: line_no,
                        detail: "text before the first section".into(),
                    })
                }
                Some(name) => {
                    let line = parse_line(raw, line_no)?;
                    sections.get_mut(name).expect("section exists").push(line);
                }
            }
        }
        for lines in sections.values_mut() {
            while lines.last().is_some_and(|l| l.is_empty()) {
                lines.pop();
            }
        }
        Ok(Template {
            version: version.to_string(),
            sections,
        })
    }

    /// Loads a bundled template by version id.
    pub fn bundled(version: &str) -> Result<Template, TemplateError> {
        let text = match version {
            FORMATTED_V1 => FORMATTED_V1_TEXT,
            PROMPT_V1 => PROMPT_V1_TEXT,
            other => return Err(TemplateError::UnknownVersion(other.to_string())),
        };
        Template::parse(version, text)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Renders one section; every emitted line ends with a newline.
    pub fn render(&self, section: &str, slots: &Slots) -> Result<String, TemplateError> {
        let lines = self
            .sections
            .get(section)
            .ok_or_else(|| TemplateError::MissingSection(section.to_string()))?;
        let mut out = String::new();
        for line in lines {
            render_line(line, slots, &mut out);
        }
        Ok(out)
    }
}

fn render_line(line: &Line, slots: &Slots, out: &mut String) {
    let mut repeat: Option<&Vec<String>> = None;
    for piece in line {
        if let Piece::Slot { name, fallback } = piece {
            match slots.values.get(name.as_str()) {
                Some(SlotValue::Many(items)) => repeat = Some(items),
                Some(SlotValue::One(_)) => {}
                None if fallback.is_some() => {}
                None => return,
            }
        }
    }
    let emit = |item: Option<&str>, out: &mut String| {
        for piece in line {
            match piece {
                Piece::Text(t) => out.push_str(t),
                Piece::Slot { name, fallback } => match slots.values.get(name.as_str()) {
                    Some(SlotValue::One(v)) => out.push_str(v),
                    Some(SlotValue::Many(_)) => out.push_str(item.unwrap_or_default()),
                    None => out.push_str(fallback.as_deref().unwrap_or_default()),
                },
            }
        }
        out.push('\n');
    };
    match repeat {
        Some(items) => items.iter().for_each(|item| emit(Some(item), out)),
        None => emit(None, out),
    }
}
