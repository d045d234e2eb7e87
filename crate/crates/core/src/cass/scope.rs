//! Lexical classification of identifier occurrences.
//!
//! Decision table for a use of name `x`:
//!
//! | bound in an enclosing local scope | in call position | declared at file scope | class        |
//! |-----------------------------------|------------------|-----------------------|--------------|
//! | yes                               | any              | any                   | `LocalVar`   |
//! | no                                | yes              | any                   | `GlobalFunc` |
//! | no                                | no               | as variable           | `GlobalVar`  |
//! | no                                | no               | as function           | `GlobalFunc` |
//! | no                                | no               | no                    | `GlobalVar`  |
//!
//! Type names, struct tags and member names are `Unknown`.

use std::collections::{HashMap, HashSet};

use crate::cst::{is_identifier, CstNode, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IdentClass {
    LocalVar,
    GlobalVar,
    GlobalFunc,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentInfo {
    pub class: IdentClass,
    /// Declaration this local occurrence refers to, numbered in declaration order.
    pub binding: Option<u32>,
}

/// Classification of every identifier leaf of a translation unit, keyed by span.
#[derive(Debug, Clone, Default)]
pub struct ScopeInfo {
    by_span: HashMap<Span, IdentInfo>,
    occurrences: Vec<(String, Span, IdentInfo)>,
}

impl ScopeInfo {
    pub fn get(&self, span: Span) -> Option<&IdentInfo> {
        self.by_span.get(&span)
    }

    /// `(token, span, info)` for each identifier leaf in source order.
    pub fn occurrences(&self) -> &[(String, Span, IdentInfo)] {
        &self.occurrences
    }

    /// Classes of all occurrences of `name`, in source order.
    pub fn classes_of(&self, name: &str) -> Vec<IdentClass> {
        self.occurrences
            .iter()
            .filter(|(t, _, _)| t == name)
            .map(|(_, _, i)| i.class)
            .collect()
    }

    fn record(&mut self, token: &str, span: Span, info: IdentInfo) {
        if self.by_span.insert(span, info).is_none() {
            self.occurrences.push((token.to_string(), span, info));
        }
    }
}

/// Classifies every identifier occurrence of a translation-unit tree.
pub fn classify_identifiers(cst: &CstNode) -> ScopeInfo {
    let mut w = Walker::default();
    w.walk(cst);
    let mut info = w.info;
    info.occurrences.sort_by_key(|(_, span, _)| *span);
    info
}

#[derive(Default)]
struct Walker {
    scopes: Vec<HashMap<String, u32>>,
    global_vars: HashSet<String>,
    functions: HashSet<String>,
    next_binding: u32,
    info: ScopeInfo,
}

fn ident_leaf(node: &CstNode) -> Option<(&str, Span)> {
    match node {
        CstNode::Leaf { token, span } if is_identifier(token) => Some((token, *span)),
        _ => None,
    }
}

impl Walker {
    fn unknown(&mut self, node: &CstNode) {
        if let Some((tok, span)) = ident_leaf(node) {
            self.info.record(tok, span, IdentInfo { class: IdentClass::Unknown, binding: None });
        }
    }

    fn declare(&mut self, name: &str, span: Span) {
        let info = match self.scopes.last_mut() {
            Some(scope) => {
                let b = self.next_binding;
                self.next_binding += 1;
                scope.insert(name.to_string(), b);
                IdentInfo { class: IdentClass::LocalVar, binding: Some(b) }
            }
            None => {
                self.global_vars.insert(name.to_string());
                IdentInfo { class: IdentClass::GlobalVar, binding: None }
            }
        };
        self.info.record(name, span, info);
    }

    fn declare_function(&mut self, name: &str, span: Span) {
        self.functions.insert(name.to_string());
        self.info.record(name, span, IdentInfo { class: IdentClass::GlobalFunc, binding: None });
    }

    fn resolve(&mut self, name: &str, span: Span, call: bool) {
        let local = self.scopes.iter().rev().find_map(|s| s.get(name).copied());
        let info = match local {
            Some(b) => IdentInfo { class: IdentClass::LocalVar, binding: Some(b) },
            None => {
                let class = if call || (!self.global_vars.contains(name) && self.functions.contains(name)) {
                    IdentClass::GlobalFunc
                } else {
                    IdentClass::GlobalVar
                };
                IdentInfo { class, binding: None }
            }
        };
        self.info.record(name, span, info);
    }

    fn walk_children(&mut self, node: &CstNode) {
        for c in node.children() {
            self.walk(c);
        }
    }

    fn walk(&mut self, node: &CstNode) {
        let rule = match node {
            CstNode::Leaf { .. } => {
                if let Some((tok, span)) = ident_leaf(node) {
                    self.resolve(tok, span, false);
                }
                return;
            }
            CstNode::Internal { rule, .. } => rule.as_str(),
        };
        let children = node.children();
        match rule {
            "function_definition" => {
                let Some(k) = children.iter().position(|c| c.is_rule("parameter_list")) else {
                    return self.walk_children(node);
                };
                if k == 0 {
                    return self.walk_children(node);
                }
                self.type_prefix(&children[..k - 1]);
                if let Some((name, span)) = ident_leaf(&children[k - 1]) {
                    self.declare_function(name, span);
                }
                self.scopes.push(HashMap::new());
                self.parameters(&children[k]);
                for c in &children[k + 1..] {
                    self.walk(c);
                }
                self.scopes.pop();
            }
            "declaration" => self.declaration(children),
            "parameter_list" => {
                self.scopes.push(HashMap::new());
                self.parameters(node);
                self.scopes.pop();
            }
            "compound_statement" | "for_statement" => {
                self.scopes.push(HashMap::new());
                self.walk_children(node);
                self.scopes.pop();
            }
            "call_expression" => {
                match children.first().and_then(ident_leaf) {
                    Some((name, span)) => self.resolve(name, span, true),
                    None => {
                        if let Some(c) = children.first() {
                            self.walk(c)
                        }
                    }
                }
                for c in children.iter().skip(1) {
                    self.walk(c);
                }
            }
            "field_expression" => {
                if let Some(obj) = children.first() {
                    self.walk(obj);
                }
                for c in children.iter().skip(1) {
                    self.unknown(c);
                }
            }
            "type_descriptor" => children.iter().for_each(|c| self.unknown(c)),
            _ => self.walk_children(node),
        }
    }

    /// Type specifier leaves: type names and struct tags are not variables.
    fn type_prefix(&mut self, nodes: &[CstNode]) {
        for n in nodes {
            self.unknown(n);
        }
    }

    /// Splits `type decl (, decl)*` into the type prefix and declarators.
    fn declaration(&mut self, children: &[CstNode]) {
        let is_sep = |c: &CstNode| matches!(c.token(), Some("," | ";"));
        let first_end = children.iter().position(is_sep).unwrap_or(children.len());
        let first = &children[..first_end];
        let (types, decl) = split_type_prefix(first);
        self.type_prefix(types);
        if let Some(d) = decl {
            self.declarator(d);
        }
        for c in &children[first_end..] {
            if !is_sep(c) {
                self.declarator(c);
            }
        }
    }

    fn parameters(&mut self, list: &CstNode) {
        for p in list.children() {
            if p.is_rule("parameter_declaration") {
                let (types, decl) = split_type_prefix(p.children());
                self.type_prefix(types);
                if let Some(d) = decl {
                    self.declarator(d);
                }
            }
        }
    }

    fn declarator(&mut self, node: &CstNode) {
        if let Some((name, span)) = ident_leaf(node) {
            return self.declare(name, span);
        }
        let children = node.children();
        match node.rule() {
            Some("pointer_declarator") => {
                if let Some(inner) = children.last() {
                    self.declarator(inner);
                }
            }
            Some("array_declarator") => {
                if let Some(inner) = children.first() {
                    self.declarator(inner);
                }
                for c in children.iter().skip(1) {
                    self.walk(c);
                }
            }
            Some("init_declarator") => {
                if let Some(inner) = children.first() {
                    self.declarator(inner);
                }
                for c in children.iter().skip(1) {
                    self.walk(c);
                }
            }
            Some("function_declarator") => {
                if let Some((name, span)) = children.first().and_then(ident_leaf) {
                    self.declare_function(name, span);
                }
                for c in children.iter().skip(1) {
                    self.walk(c);
                }
            }
            _ => self.walk(node),
        }
    }
}

/// Separates leading type-specifier leaves from the declarator that ends a
/// declaration segment. The element right after `struct`/`union`/`enum` is a
/// tag, never a declarator.
fn split_type_prefix(seg: &[CstNode]) -> (&[CstNode], Option<&CstNode>) {
    let Some((last, rest)) = seg.split_last() else {
        return (seg, None);
    };
    if rest.is_empty() {
        return (seg, None);
    }
    let after_tag_kw = matches!(rest.last().and_then(CstNode::token), Some("struct" | "union" | "enum"));
    let declarator_like = !last.is_leaf() || ident_leaf(last).is_some();
    if after_tag_kw || !declarator_like {
        (seg, None)
    } else {
        (rest, Some(last))
    }
}
