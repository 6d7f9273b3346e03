//! Least-privilege policy derivation.
//!
//! A handler needs every permission granted to a declaration it can reach
//! through identifier references. Reachability is lexical (names mentioned in
//! bodies and initializers), so it over-approximates real usage: a policy may
//! grant more than a handler actually uses, but never less.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write as _};

use serde::Serialize;
use thiserror::Error;

use crate::dsl::SourceFile;
use crate::schema::{AccessMode, CloudService, EntityRef, PermissionGrant, Schema};

const DYNAMODB_READ: [&str; 4] = [
    "dynamodb:GetItem",
    "dynamodb:Query",
    "dynamodb:Scan",
    "dynamodb:BatchGetItem",
];
const DYNAMODB_WRITE: [&str; 4] = [
    "dynamodb:PutItem",
    "dynamodb:UpdateItem",
    "dynamodb:DeleteItem",
    "dynamodb:BatchWriteItem",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PermissionError {
    #[error("UnknownDeclaration({0})")]
    UnknownDeclaration(String),
}

/// Provider actions implied by an access mode on a service.
pub fn actions_for(service: CloudService, mode: AccessMode) -> BTreeSet<String> {
    let (read, write): (&[&str], &[&str]) = match service {
        CloudService::DynamoDB => (&DYNAMODB_READ, &DYNAMODB_WRITE),
    };
    let mut out = BTreeSet::new();
    if matches!(mode, AccessMode::Read | AccessMode::ReadWrite) {
        out.extend(read.iter().map(|s| s.to_string()));
    }
    if matches!(mode, AccessMode::Write | AccessMode::ReadWrite) {
        out.extend(write.iter().map(|s| s.to_string()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PolicyStatement {
    pub service: CloudService,
    pub actions: BTreeSet<String>,
    /// Resource name (for DynamoDB, the table name).
    pub resource_pattern: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PolicyDocument {
    pub statements: Vec<PolicyStatement>,
}

impl PolicyDocument {
    /// Builds a document from arbitrary statements, merging those that share
    /// `(service, resource_pattern)`.
    pub fn from_statements(statements: impl IntoIterator<Item = PolicyStatement>) -> Self {
        let mut merged: BTreeMap<(CloudService, String), BTreeSet<String>> = BTreeMap::new();
        for st in statements {
            merged
                .entry((st.service, st.resource_pattern))
                .or_default()
                .extend(st.actions);
        }
        Self {
            statements: merged
                .into_iter()
                .filter(|(_, actions)| !actions.is_empty())
                .map(|((service, resource_pattern), actions)| PolicyStatement {
                    service,
                    actions,
                    resource_pattern,
                })
                .collect(),
        }
    }

    fn from_grants<'a>(grants: impl IntoIterator<Item = &'a PermissionGrant>) -> Self {
        Self::from_statements(grants.into_iter().map(|g| PolicyStatement {
            service: g.service,
            actions: actions_for(g.service, g.mode),
            resource_pattern: g.resource_name.clone(),
        }))
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }
}

impl fmt::Display for PolicyDocument {
    /// Plain-text rendering used for `policy.txt`:
    ///
    /// ```text
    /// statement DynamoDB "id"
    ///   dynamodb:BatchGetItem
    ///   ...
    /// ```
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for (i, st) in self.statements.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            writeln!(out, "statement {:?} {:?}", st.service, st.resource_pattern)?;
            for action in &st.actions {
                writeln!(out, "  {action}")?;
            }
        }
        f.write_str(&out)
    }
}

/// Declarations reachable from `root` by following body references, `root`
/// included. References are resolved by name across all files.
pub fn reference_closure(root: &str, files: &[SourceFile]) -> Result<BTreeSet<String>, PermissionError> {
    let mut refs: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for decl in files.iter().flat_map(|f| &f.declarations) {
        refs.entry(decl.name.as_str())
            .or_default()
            .extend(decl.body_refs.iter().map(String::as_str));
    }
    if !refs.contains_key(root) {
        return Err(PermissionError::UnknownDeclaration(root.to_string()));
    }

    let mut seen = BTreeSet::from([root.to_string()]);
    let mut queue = VecDeque::from([root]);
    while let Some(name) = queue.pop_front() {
        for &next in &refs[name] {
            if refs.contains_key(next) && seen.insert(next.to_string()) {
                queue.push_back(next);
            }
        }
    }
    Ok(seen)
}

/// Policy for a single handler.
pub fn derive_handler_policy(schema: &Schema, handler: &EntityRef) -> Result<PolicyDocument, PermissionError> {
    let closure = reference_closure(&handler.name, &schema.declarations)?;
    Ok(PolicyDocument::from_grants(
        schema.grants.iter().filter(|g| closure.contains(&g.entity.name)),
    ))
}

/// Merged policy for the dispatcher function serving every route.
pub fn derive_policy(schema: &Schema) -> Result<PolicyDocument, PermissionError> {
    schema
        .dynamic_routes
        .iter()
        .map(|r| derive_handler_policy(schema, &r.handler))
        .try_fold(PolicyDocument::default(), |acc, p| Ok(merge_policies(&acc, &p?)))
}

pub fn merge_policies(a: &PolicyDocument, b: &PolicyDocument) -> PolicyDocument {
    PolicyDocument::from_statements(a.statements.iter().chain(&b.statements).cloned())
}
