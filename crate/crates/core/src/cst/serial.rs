//! JSON form of concrete syntax trees.
//!
//! ```text
//! node = {"kind":"internal","rule":<string>,"span":[s,e],"children":[node,...]}
//!      | {"kind":"leaf","token":<string>,"span":[s,e]}
//! ```
//!
//! Dumps are canonical: keys sorted, no whitespace, children in tree order.

use serde_json::{json, Map, Value};

use super::{CstNode, Span};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeFormatError {
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("{message} at {path}")]
    Schema { path: String, message: String },
}

fn schema(path: &str, message: impl Into<String>) -> TreeFormatError {
    TreeFormatError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

fn to_value(node: &CstNode) -> Value {
    let span = node.span();
    match node {
        CstNode::Leaf { token, .. } => json!({
            "kind": "leaf",
            "token": token,
            "span": [span.start, span.end],
        }),
        CstNode::Internal { rule, children, .. } => json!({
            "kind": "internal",
            "rule": rule,
            "span": [span.start, span.end],
            "children": children.iter().map(to_value).collect::<Vec<_>>(),
        }),
    }
}

/// Serializes a tree to canonical JSON bytes.
pub fn dump_tree(tree: &CstNode) -> Vec<u8> {
    // serde_json's default map is ordered by key
    serde_json::to_vec(&to_value(tree)).expect("tree values always serialize")
}

/// Reads a tree previously written by [`dump_tree`] or by an external parser.
pub fn load_tree(serialized: &[u8]) -> Result<CstNode, TreeFormatError> {
    let value: Value =
        serde_json::from_slice(serialized).map_err(|e| TreeFormatError::Json(e.to_string()))?;
    let tree = from_value(&value, "$")?;
    tree.validate().map_err(|msg| {
        let (path, message) = msg.split_once(": ").unwrap_or(("$", msg.as_str()));
        schema(path, message)
    })?;
    Ok(tree)
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str, path: &str) -> Result<&'a Value, TreeFormatError> {
    obj.get(name)
        .ok_or_else(|| schema(path, format!("missing field: {name}")))
}

fn string_field(obj: &Map<String, Value>, name: &str, path: &str) -> Result<String, TreeFormatError> {
    field(obj, name, path)?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| schema(path, format!("field {name} must be a string")))
}

fn span_field(obj: &Map<String, Value>, path: &str) -> Result<Span, TreeFormatError> {
    let bad = || schema(path, "field span must be [start, end] with non-negative integers");
    let arr = field(obj, "span", path)?.as_array().ok_or_else(bad)?;
    if arr.len() != 2 {
        return Err(bad());
    }
    let start = arr[0].as_u64().ok_or_else(bad)? as usize;
    let end = arr[1].as_u64().ok_or_else(bad)? as usize;
    Ok(Span::new(start, end))
}

fn from_value(value: &Value, path: &str) -> Result<CstNode, TreeFormatError> {
    let obj = value
        .as_object()
        .ok_or_else(|| schema(path, "node must be an object"))?;
    let kind = string_field(obj, "kind", path)?;
    match kind.as_str() {
        "leaf" => {
            if obj.contains_key("children") {
                return Err(schema(path, "leaf with children"));
            }
            let token = string_field(obj, "token", path)?;
            if token.is_empty() {
                return Err(schema(path, "leaf with empty token"));
            }
            let span = span_field(obj, path)?;
            Ok(CstNode::Leaf { token, span })
        }
        "internal" => {
            let rule = string_field(obj, "rule", path)?;
            let span = span_field(obj, path)?;
            let raw = field(obj, "children", path)?
                .as_array()
                .ok_or_else(|| schema(path, "field children must be an array"))?;
            if raw.is_empty() {
                return Err(schema(path, "internal node without children"));
            }
            let children = raw
                .iter()
                .enumerate()
                .map(|(i, c)| from_value(c, &format!("{path}.children[{i}]")))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(CstNode::Internal { rule, span, children })
        }
        other => Err(schema(path, format!("unknown kind {other:?} (expected \"leaf\" or \"internal\")"))),
    }
}
