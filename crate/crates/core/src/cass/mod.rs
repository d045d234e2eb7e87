//! Context-aware semantics structures (CASS).
//!
//! A CASS is one tree per function definition plus an optional global
//! attributes table (GAT). Trees are derived from a concrete syntax tree under
//! a five-axis [`CassConfig`].

mod build;
mod config;
mod scope;

use serde::{Deserialize, Serialize};

pub use build::{build_cass, build_cass_with, node_label, BuildOptions, LabelContext, NodeLabel};
pub use config::{
    config_id, enumerate_configs, parse_config_id, CassConfig, CompoundStmt, ConfigError, GlobalFuncs,
    GlobalVars, NodePrefix, AXES,
};
pub use scope::{classify_identifiers, IdentClass, IdentInfo, ScopeInfo};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Internal,
    Leaf,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CassNode {
    pub kind: NodeKind,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
    /// Kept in the tree but excluded from every feature.
    #[serde(default)]
    pub suppressed: bool,
    /// Local-variable binding for `#VAR` leaves; groups uses of one variable.
    #[serde(default, rename = "var", skip_serializing_if = "Option::is_none")]
    pub binding: Option<u32>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<CassNode>,
}

impl CassNode {
    /// Label with its prefix, if any.
    pub fn full_label(&self) -> String {
        match &self.prefix {
            Some(p) => format!("{p}{}", self.label),
            None => self.label.clone(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.kind == NodeKind::Leaf
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a CassNode)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    pub fn count_nodes(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassTree {
    #[serde(rename = "function")]
    pub function_name: String,
    /// `None` for an empty tree.
    pub root: Option<CassNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatEntry {
    #[serde(rename = "fn")]
    pub function_name: String,
    #[serde(rename = "in")]
    pub input_cardinality: u32,
    #[serde(rename = "out")]
    pub output_cardinality: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cass {
    pub config: CassConfig,
    pub trees: Vec<CassTree>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gat: Option<Vec<GatEntry>>,
}

impl Cass {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cass serializes")
    }
}
