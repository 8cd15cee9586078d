//! Specification and config documents.

mod config;
mod model;
mod parse;
mod serialize;
mod validate;

pub use config::{parse_config, Config, InstanceParams, OptionParams, QueryParams};
pub use model::*;
pub use parse::{parse_spec, parse_spec_named, DEFAULT_MAX_SOLUTION};
pub use serialize::serialize_spec;
pub use validate::{validate_spec, variable_cycle, Diagnostic, Severity};
