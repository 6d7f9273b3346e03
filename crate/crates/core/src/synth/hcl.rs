use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use super::SynthError;

/// Rendering groups, in output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ResourceGroup {
    Provider,
    Iam,
    Lambda,
    ApiGateway,
    S3,
    CloudWatch,
}

impl ResourceGroup {
    pub const ALL: [ResourceGroup; 6] = [
        Self::Provider,
        Self::Iam,
        Self::Lambda,
        Self::ApiGateway,
        Self::S3,
        Self::CloudWatch,
    ];
}

/// What kind of top-level HCL block a [`TfResource`] renders as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BlockKind {
    /// `terraform { ... }`
    Settings,
    /// `provider "<name>" { ... }`
    Provider,
    /// `resource "<type>" "<name>" { ... }`
    Resource,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum HclValue {
    /// Quoted string. May contain `${type.name.attr}` interpolations.
    Str(String),
    Number(i64),
    Bool(bool),
    /// `<<MARKER` heredoc; the body is emitted verbatim.
    Heredoc {
        marker: String,
        body: String,
    },
    /// Nested block: `key { ... }`.
    Block(Vec<(String, HclValue)>),
    /// Object value: `key = { "k" = v ... }`.
    Map(Vec<(String, HclValue)>),
}

impl HclValue {
    pub fn str(s: impl Into<String>) -> Self {
        Self::Str(s.into())
    }

    /// `"${type.name.attr}"`
    pub fn reference(resource_type: &str, name: &str, attr: &str) -> Self {
        Self::Str(format!("${{{resource_type}.{name}.{attr}}}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TfResource {
    pub kind: BlockKind,
    pub resource_type: String,
    pub name: String,
    pub group: ResourceGroup,
    pub attributes: Vec<(String, HclValue)>,
}

impl TfResource {
    pub fn resource(group: ResourceGroup, resource_type: &str, name: &str) -> Self {
        Self {
            kind: BlockKind::Resource,
            resource_type: resource_type.to_string(),
            name: name.to_string(),
            group,
            attributes: Vec::new(),
        }
    }

    pub fn attr(mut self, key: &str, value: HclValue) -> Self {
        self.attributes.push((key.to_string(), value));
        self
    }

    pub fn key(&self) -> (String, String) {
        (self.resource_type.clone(), self.name.clone())
    }

    pub fn address(&self) -> String {
        format!("{}.{}", self.resource_type, self.name)
    }
}

pub type ResourceKey = (String, String);

/// A set of resources keyed by `(type, name)`. Edges are implied by the
/// interpolation references inside attribute values.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResourceGraph {
    resources: BTreeMap<ResourceKey, TfResource>,
}

impl ResourceGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, resource: TfResource) -> Result<(), SynthError> {
        if !is_valid_name(&resource.name) {
            return Err(SynthError::InvalidName(resource.name));
        }
        let key = resource.key();
        if self.resources.contains_key(&key) {
            return Err(SynthError::DuplicateResource(resource.address()));
        }
        self.resources.insert(key, resource);
        Ok(())
    }

    pub fn get(&self, resource_type: &str, name: &str) -> Option<&TfResource> {
        self.resources.get(&(resource_type.to_string(), name.to_string()))
    }

    pub fn contains(&self, key: &ResourceKey) -> bool {
        self.resources.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.resources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resources.is_empty()
    }

    /// Resources in `(type, name)` order.
    pub fn iter(&self) -> impl Iterator<Item = &TfResource> {
        self.resources.values()
    }

    /// Edges `A -> B` where `A` references `B`, restricted to resources
    /// present in the graph.
    pub fn edges(&self) -> Result<BTreeMap<ResourceKey, BTreeSet<ResourceKey>>, SynthError> {
        self.resources
            .iter()
            .map(|(key, r)| {
                let deps = detect_dependencies(r)?
                    .into_iter()
                    .filter(|d| self.resources.contains_key(d))
                    .collect();
                Ok((key.clone(), deps))
            })
            .collect()
    }

    /// References that point at resources missing from the graph.
    pub fn dangling_references(&self) -> Result<Vec<(String, ResourceKey)>, SynthError> {
        let mut out = Vec::new();
        for r in self.iter() {
            for dep in detect_dependencies(r)? {
                if !self.resources.contains_key(&dep) {
                    out.push((r.address(), dep));
                }
            }
        }
        Ok(out)
    }
}

impl FromIterator<TfResource> for ResourceGraph {
    /// Collects resources, keeping the last one on duplicate keys.
    fn from_iter<I: IntoIterator<Item = TfResource>>(iter: I) -> Self {
        Self {
            resources: iter.into_iter().map(|r| (r.key(), r)).collect(),
        }
    }
}

pub fn is_valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

fn is_word(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn scan_interpolations(text: &str, out: &mut BTreeSet<ResourceKey>) -> Result<(), SynthError> {
    let mut rest = text;
    while let Some(start) = rest.find("${") {
        let after = &rest[start + 2..];
        let end = after
            .find('}')
            .ok_or_else(|| SynthError::MalformedInterpolation(rest[start..].to_string()))?;
        let expr = &after[..end];
        let parts: Vec<&str> = expr.split('.').collect();
        if parts.len() < 3 || !parts.iter().all(|p| is_word(p)) {
            return Err(SynthError::MalformedInterpolation(format!("${{{expr}}}")));
        }
        out.insert((parts[0].to_string(), parts[1].to_string()));
        rest = &after[end + 1..];
    }
    Ok(())
}

fn collect_refs(value: &HclValue, out: &mut BTreeSet<ResourceKey>) -> Result<(), SynthError> {
    match value {
        HclValue::Str(s) => scan_interpolations(s, out),
        HclValue::Heredoc { body, .. } => scan_interpolations(body, out),
        HclValue::Number(_) | HclValue::Bool(_) => Ok(()),
        HclValue::Block(items) | HclValue::Map(items) => items.iter().try_for_each(|(_, v)| collect_refs(v, out)),
    }
}

/// Every `(type, name)` referenced through `${type.name.attr}` anywhere in the
/// resource's attributes, nested values included.
pub fn detect_dependencies(resource: &TfResource) -> Result<BTreeSet<ResourceKey>, SynthError> {
    let mut out = BTreeSet::new();
    for (_, value) in &resource.attributes {
        collect_refs(value, &mut out)?;
    }
    Ok(out)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn write_body(out: &mut String, items: &[(String, HclValue)], indent: usize, quote_keys: bool) {
    let pad = " ".repeat(indent);
    let display_key = |k: &str| if quote_keys { quote(k) } else { k.to_string() };
    let width = items
        .iter()
        .filter(|(_, v)| !matches!(v, HclValue::Block(_)))
        .map(|(k, _)| display_key(k).len())
        .max()
        .unwrap_or(0);

    for (key, value) in items {
        let key = display_key(key);
        match value {
            HclValue::Block(inner) => {
                let _ = writeln!(out, "{pad}{key} {{");
                write_body(out, inner, indent + 2, false);
                let _ = writeln!(out, "{pad}}}");
            }
            HclValue::Map(inner) => {
                let _ = writeln!(out, "{pad}{key:<width$} = {{");
                write_body(out, inner, indent + 2, true);
                let _ = writeln!(out, "{pad}}}");
            }
            HclValue::Heredoc { marker, body } => {
                let _ = writeln!(out, "{pad}{key:<width$} = <<{marker}");
                out.push_str(body);
                if !body.ends_with('\n') {
                    out.push('\n');
                }
                let _ = writeln!(out, "{marker}");
            }
            HclValue::Str(s) => {
                let _ = writeln!(out, "{pad}{key:<width$} = {}", quote(s));
            }
            HclValue::Number(n) => {
                let _ = writeln!(out, "{pad}{key:<width$} = {n}");
            }
            HclValue::Bool(b) => {
                let _ = writeln!(out, "{pad}{key:<width$} = {b}");
            }
        }
    }
}

/// Renders ordered resources as HCL: two-space indentation, `=` aligned per
/// block, one blank line between blocks and a `# ---- <group> ----` line
/// before each group.
pub fn render_hcl(ordered: &[TfResource]) -> String {
    let mut out = String::new();
    let mut current: Option<ResourceGroup> = None;
    for r in ordered {
        if !out.is_empty() {
            out.push('\n');
        }
        if current != Some(r.group) {
            let _ = writeln!(out, "# ---- {:?} ----", r.group);
            current = Some(r.group);
        }
        match r.kind {
            BlockKind::Settings => out.push_str("terraform {\n"),
            BlockKind::Provider => {
                let _ = writeln!(out, "provider {} {{", quote(&r.name));
            }
            BlockKind::Resource => {
                let _ = writeln!(out, "resource {} {} {{", quote(&r.resource_type), quote(&r.name));
            }
        }
        write_body(&mut out, &r.attributes, 2, false);
        out.push_str("}\n");
    }
    out
}
