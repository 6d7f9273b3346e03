//! Terraform synthesis: schema to resource graph, ordering, and HCL output.
//!
//! Generated code uses the classic `"${type.name.attr}"` interpolation form.
//! That keeps dependency detection purely lexical: a resource depends on
//! exactly the resources its attribute strings interpolate.

mod aws;
mod hcl;
mod order;

use thiserror::Error;

use crate::permissions::PermissionError;
use crate::schema::Schema;

pub use aws::{sanitize_name, synthesize, ProviderConfig};
pub use hcl::{
    detect_dependencies, is_valid_name, render_hcl, BlockKind, HclValue, ResourceGraph, ResourceGroup, ResourceKey,
    TfResource,
};
pub use order::order_resources;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("UnsupportedProvider({0}): only \"aws\" is implemented")]
    UnsupportedProvider(String),
    #[error("MalformedInterpolation({0})")]
    MalformedInterpolation(String),
    #[error("CyclicDependency({})", .0.join(" -> "))]
    CyclicDependency(Vec<String>),
    #[error("duplicate resource {0}")]
    DuplicateResource(String),
    #[error("resource name {0:?} does not match [a-z0-9_]+")]
    InvalidName(String),
    #[error("{0}")]
    InvalidPath(String),
    #[error(transparent)]
    Permission(#[from] PermissionError),
}

/// Synthesizes, orders and renders in one step.
pub fn generate_hcl(schema: &Schema, provider: &ProviderConfig) -> Result<String, SynthError> {
    let graph = synthesize(schema, provider)?;
    Ok(render_hcl(&order_resources(&graph)?))
}
