//! The per-instance record of randomized choices.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::error::{Error, Result};

/// One selected instance of a derived symbol or dynamic condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceParams {
    /// The `_sym` binding as plain data.
    pub params: Json,
    /// Pool positions, `[dim][source][item]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<Vec<Vec<usize>>>>,
}

/// One option of a selection query, in label order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionParams {
    /// Index into the query's option templates.
    pub template: usize,
    /// The `_opt` binding as plain data.
    pub params: Json,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<Vec<Vec<usize>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryParams {
    pub options: Vec<OptionParams>,
}

/// Every randomized choice of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub spec_id: String,
    pub variable_values: BTreeMap<String, Json>,
    #[serde(default)]
    pub symbol_params: BTreeMap<String, Vec<InstanceParams>>,
    #[serde(default)]
    pub condition_params: BTreeMap<String, Vec<InstanceParams>>,
    #[serde(default)]
    pub query_params: BTreeMap<String, QueryParams>,
    /// Seed of the first-phase solve; recorded only for two-phase specs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rng_seed: Option<u64>,
    /// Post-generation variables frozen from the first-phase solution.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub post_values: BTreeMap<String, Json>,
}

impl Config {
    pub fn new(spec_id: &str) -> Self {
        Config {
            spec_id: spec_id.to_string(),
            variable_values: BTreeMap::new(),
            symbol_params: BTreeMap::new(),
            condition_params: BTreeMap::new(),
            query_params: BTreeMap::new(),
            rng_seed: None,
            post_values: BTreeMap::new(),
        }
    }

    /// Sorted-key JSON value.
    pub fn to_json(&self) -> Json {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Compact canonical text: sorted keys, no whitespace.
    pub fn to_canonical_string(&self) -> String {
        self.to_json().to_string()
    }

    /// Indented canonical text for config files.
    pub fn to_pretty_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("config serializes")
    }

    pub fn from_json(v: Json) -> Result<Config> {
        serde_json::from_value(v).map_err(|e| Error::Schema(format!("config: {e}")))
    }
}

/// Parse a config document.
pub fn parse_config(text: &str) -> Result<Config> {
    serde_json::from_str(text).map_err(|e| Error::Schema(format!("config: {e}")))
}
