use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("InvalidPath({raw:?}): {reason}")]
pub struct InvalidPath {
    pub raw: String,
    pub reason: String,
}

/// A single segment of a normalized route path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Segment {
    Literal(String),
    Param(String),
}

impl Segment {
    pub fn is_literal(&self) -> bool {
        matches!(self, Self::Literal(_))
    }
}

fn is_param_name(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn classify(segment: &str) -> Option<Segment> {
    if let Some(name) = segment.strip_prefix('{').and_then(|s| s.strip_suffix('}')) {
        return is_param_name(name).then(|| Segment::Param(name.to_string()));
    }
    segment
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
        .then(|| Segment::Literal(segment.to_string()))
}

/// Normalizes a route path: leading `/`, no trailing `/` (except the root),
/// no empty segments. Segments are taken literally and must be made of
/// `[A-Za-z0-9._-]`, or be a whole `{ident}` parameter.
pub fn normalize_path(raw: &str) -> Result<String, InvalidPath> {
    split_path(raw).map(|segments| join_segments(&segments))
}

/// Splits and validates a path into segments (the root path has none).
pub fn split_path(raw: &str) -> Result<Vec<Segment>, InvalidPath> {
    if raw.is_empty() {
        return Err(InvalidPath {
            raw: raw.to_string(),
            reason: "path is empty".into(),
        });
    }
    raw.split('/')
        .filter(|s| !s.is_empty())
        .map(|s| {
            classify(s).ok_or_else(|| InvalidPath {
                raw: raw.to_string(),
                reason: format!("segment {s:?} has characters outside [A-Za-z0-9._-]"),
            })
        })
        .collect()
}

pub fn join_segments(segments: &[Segment]) -> String {
    if segments.is_empty() {
        return "/".to_string();
    }
    let mut out = String::new();
    for seg in segments {
        out.push('/');
        match seg {
            Segment::Literal(s) => out.push_str(s),
            Segment::Param(p) => {
                out.push('{');
                out.push_str(p);
                out.push('}');
            }
        }
    }
    out
}
