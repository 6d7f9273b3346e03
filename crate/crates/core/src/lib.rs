//! Turns annotated `.kls` declarations into a serverless schema, a
//! least-privilege policy, deterministic Terraform HCL, and a local dispatcher
//! that serves the same schema.

pub mod dsl;
pub mod permissions;
pub mod runtime;
pub mod schema;
pub mod synth;
