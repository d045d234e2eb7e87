//! CASS construction from a concrete syntax tree.
//!
//! Internal label: the node's keyword/operator/punctuation children verbatim,
//! every other child replaced by `$`, concatenated in order. Identifier and
//! literal leaves become CASS leaves. An internal node whose label would be a
//! bare `$` is replaced by its only child.

use super::config::{CompoundStmt, GlobalFuncs, GlobalVars, NodePrefix};
use super::scope::{classify_identifiers, IdentClass, ScopeInfo};
use super::{Cass, CassConfig, CassNode, CassTree, GatEntry, NodeKind};
use crate::cst::{is_identifier, is_literal, CstNode};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildOptions {
    /// Keep literal tokens verbatim instead of abstracting them to `#LIT`.
    pub keep_literals: bool,
}

/// Where a node sits relative to its parent.
#[derive(Debug, Clone, Copy, Default)]
pub struct LabelContext<'a> {
    pub parent_rule: Option<&'a str>,
    pub child_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeLabel {
    pub label: String,
    pub prefix: Option<String>,
    pub suppressed: bool,
}

const COMPOUND_RULES: &[&str] = &["compound_statement"];
const PAREN_RULES: &[&str] = &["paren_expr", "parenthesized_expression"];
const ARGUMENT_RULES: &[&str] = &["argument_list"];
const CONDITION_RULES: &[&str] = &["condition_clause"];
const CONDITION_OWNERS: &[&str] = &["if_statement", "while_statement", "do_statement", "switch_statement"];

/// A leaf that is folded into its parent's label rather than becoming a node.
fn is_terminal(node: &CstNode) -> bool {
    matches!(node, CstNode::Leaf { token, .. } if !is_identifier(token) && !is_literal(token))
}

fn paren_prefix(rule: &str, ctx: LabelContext<'_>) -> Option<&'static str> {
    if ARGUMENT_RULES.contains(&rule) {
        Some("args:")
    } else if CONDITION_RULES.contains(&rule) {
        Some("cond:")
    } else if PAREN_RULES.contains(&rule) {
        if ctx.parent_rule.is_some_and(|p| CONDITION_OWNERS.contains(&p)) {
            Some("cond:")
        } else {
            Some("expr:")
        }
    } else {
        None
    }
}

/// Label, prefix and suppression of one CST node under `cfg`.
pub fn node_label(
    node: &CstNode,
    ctx: LabelContext<'_>,
    cfg: &CassConfig,
    scope: &ScopeInfo,
    opts: &BuildOptions,
) -> NodeLabel {
    match node {
        CstNode::Leaf { token, span } => {
            let mut out = NodeLabel {
                label: token.clone(),
                prefix: None,
                suppressed: false,
            };
            if is_literal(token) {
                if !opts.keep_literals {
                    out.label = "#LIT".into();
                }
            } else if is_identifier(token) {
                let class = scope.get(*span).map_or(IdentClass::GlobalVar, |i| i.class);
                match class {
                    IdentClass::LocalVar => out.label = "#VAR".into(),
                    IdentClass::GlobalVar => match cfg.global_vars {
                        GlobalVars::Keep => {}
                        GlobalVars::Drop => out.suppressed = true,
                        GlobalVars::Gvar => out.label = "#GVAR".into(),
                        GlobalVars::Var => out.label = "#VAR".into(),
                    },
                    IdentClass::GlobalFunc => match cfg.global_funcs {
                        GlobalFuncs::Keep => {}
                        GlobalFuncs::Drop => out.suppressed = true,
                        GlobalFuncs::ExFunc => out.label = "#EXFUNC".into(),
                    },
                    IdentClass::Unknown => {}
                }
            }
            out
        }
        CstNode::Internal { rule, children, .. } => {
            let mut label: String = children
                .iter()
                .map(|c| match c {
                    CstNode::Leaf { token, .. } if is_terminal(c) => token.as_str(),
                    _ => "$",
                })
                .collect();
            let mut suppressed = false;
            if COMPOUND_RULES.contains(&rule.as_str()) {
                match cfg.compound_stmt {
                    CompoundStmt::Keep => {}
                    CompoundStmt::Drop => suppressed = true,
                    CompoundStmt::Uniform => label = "{#}".into(),
                }
            }
            let prefix = match cfg.node_prefix {
                NodePrefix::None => None,
                NodePrefix::AllInternal => Some(format!("{rule}:")),
                NodePrefix::Parentheses => paren_prefix(rule, ctx).map(str::to_string),
            };
            NodeLabel { label, prefix, suppressed }
        }
    }
}

struct Builder<'a> {
    cfg: &'a CassConfig,
    scope: &'a ScopeInfo,
    opts: &'a BuildOptions,
}

impl Builder<'_> {
    /// `None` for terminals, which live in the parent's label.
    fn node(&self, cst: &CstNode, ctx: LabelContext<'_>) -> Option<CassNode> {
        if is_terminal(cst) {
            return None;
        }
        let NodeLabel { label, prefix, suppressed } = node_label(cst, ctx, self.cfg, self.scope, self.opts);
        match cst {
            CstNode::Leaf { span, .. } => {
                let binding = self
                    .scope
                    .get(*span)
                    .filter(|i| i.class == IdentClass::LocalVar)
                    .and_then(|i| i.binding);
                Some(CassNode {
                    kind: NodeKind::Leaf,
                    label,
                    prefix,
                    suppressed,
                    binding,
                    children: Vec::new(),
                })
            }
            CstNode::Internal { rule, children, .. } => {
                let built: Vec<CassNode> = children
                    .iter()
                    .enumerate()
                    .filter_map(|(i, c)| {
                        self.node(c, LabelContext { parent_rule: Some(rule), child_index: i })
                    })
                    .collect();
                if built.len() == 1 && children.len() == 1 && label == "$" {
                    return built.into_iter().next();
                }
                Some(CassNode {
                    kind: NodeKind::Internal,
                    label,
                    prefix,
                    suppressed,
                    binding: None,
                    children: built,
                })
            }
        }
    }
}

fn function_parts(func: &CstNode) -> Option<(&[CstNode], &CstNode, &CstNode)> {
    let children = func.children();
    let k = children.iter().position(|c| c.is_rule("parameter_list"))?;
    if k == 0 {
        return None;
    }
    Some((&children[..k - 1], &children[k - 1], &children[k]))
}

fn gat_entry(func: &CstNode) -> GatEntry {
    let (name, inputs, outputs) = match function_parts(func) {
        Some((ret, name, params)) => {
            let inputs = params
                .children()
                .iter()
                .filter(|c| c.is_rule("parameter_declaration"))
                .count() as u32;
            let pointer = ret.iter().any(|c| c.token() == Some("*"));
            let void = ret.iter().any(|c| c.token() == Some("void"));
            let outputs = u32::from(pointer || !void);
            (name.token().unwrap_or_default().to_string(), inputs, outputs)
        }
        None => (String::new(), 0, 1),
    };
    GatEntry {
        function_name: name,
        input_cardinality: inputs,
        output_cardinality: outputs,
    }
}

pub fn build_cass(cst: &CstNode, cfg: &CassConfig) -> Cass {
    build_cass_with(cst, cfg, &BuildOptions::default())
}

/// Builds one CASS tree per function definition. A unit without functions
/// yields a single tree over the whole top-level item list.
pub fn build_cass_with(cst: &CstNode, cfg: &CassConfig, opts: &BuildOptions) -> Cass {
    let scope = classify_identifiers(cst);
    let builder = Builder { cfg, scope: &scope, opts };

    let functions: Vec<&CstNode> = if cst.is_rule("function_definition") {
        vec![cst]
    } else {
        cst.children().iter().filter(|c| c.is_rule("function_definition")).collect()
    };

    let trees: Vec<CassTree> = if functions.is_empty() {
        vec![CassTree {
            function_name: String::new(),
            root: builder.node(cst, LabelContext::default()),
        }]
    } else {
        functions
            .iter()
            .map(|f| CassTree {
                function_name: function_parts(f)
                    .and_then(|(_, name, _)| name.token())
                    .unwrap_or_default()
                    .to_string(),
                root: builder.node(f, LabelContext::default()),
            })
            .collect()
    };

    let gat = cfg
        .fn_io_cardinality
        .then(|| functions.iter().map(|f| gat_entry(f)).collect());

    Cass {
        config: *cfg,
        trees,
        gat,
    }
}
