//! Concrete syntax trees for C-like source.
//!
//! Trees come from two places: the built-in recursive-descent parser for a C
//! subset ([`parse_source`]), or a JSON dump produced by any external parser
//! ([`load_tree`]). Downstream code only relies on tree shape, rule names and
//! leaf tokens, so both routes feed the same pipeline.

mod lexer;
mod parser;
mod serial;

use std::fmt;

pub use lexer::{is_identifier, is_keyword, is_literal, LexError, Token, TokenKind};
pub use parser::{parse_source, parse_str};
pub use serial::{dump_tree, load_tree, TreeFormatError};

/// Half-open byte range `[start, end)` into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    CSubset,
    External,
}

/// One input program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceFile {
    pub path: String,
    pub contents: String,
    pub dialect: Dialect,
}

impl SourceFile {
    pub fn c_subset(path: impl Into<String>, contents: impl Into<String>) -> Self {
        SourceFile {
            path: path.into(),
            contents: contents.into(),
            dialect: Dialect::CSubset,
        }
    }
}

/// A node of a concrete syntax tree.
///
/// Leaves carry the verbatim token; internal nodes carry the grammar rule
/// name and at least one child.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CstNode {
    Leaf {
        token: String,
        span: Span,
    },
    Internal {
        rule: String,
        span: Span,
        children: Vec<CstNode>,
    },
}

impl CstNode {
    pub fn leaf(token: impl Into<String>, span: Span) -> Self {
        CstNode::Leaf {
            token: token.into(),
            span,
        }
    }

    /// Builds an internal node whose span runs from the first to the last child.
    pub fn internal(rule: impl Into<String>, children: Vec<CstNode>) -> Self {
        debug_assert!(!children.is_empty());
        let span = Span::new(
            children.first().map_or(0, |c| c.span().start),
            children.last().map_or(0, |c| c.span().end),
        );
        CstNode::Internal {
            rule: rule.into(),
            span,
            children,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            CstNode::Leaf { span, .. } | CstNode::Internal { span, .. } => *span,
        }
    }

    pub fn children(&self) -> &[CstNode] {
        match self {
            CstNode::Leaf { .. } => &[],
            CstNode::Internal { children, .. } => children,
        }
    }

    pub fn rule(&self) -> Option<&str> {
        match self {
            CstNode::Internal { rule, .. } => Some(rule),
            CstNode::Leaf { .. } => None,
        }
    }

    pub fn token(&self) -> Option<&str> {
        match self {
            CstNode::Leaf { token, .. } => Some(token),
            CstNode::Internal { .. } => None,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, CstNode::Leaf { .. })
    }

    pub fn is_rule(&self, name: &str) -> bool {
        self.rule() == Some(name)
    }

    /// Leaf tokens in source order.
    pub fn leaf_tokens(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_tokens(&mut out);
        out
    }

    fn collect_tokens<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            CstNode::Leaf { token, .. } => out.push(token),
            CstNode::Internal { children, .. } => {
                for c in children {
                    c.collect_tokens(out);
                }
            }
        }
    }

    /// Checks leaf/internal shape and span containment/ordering for the whole
    /// tree. Returns the path of the first offending node.
    pub fn validate(&self) -> Result<(), String> {
        self.validate_at("$")
    }

    fn validate_at(&self, path: &str) -> Result<(), String> {
        let span = self.span();
        if span.start > span.end {
            return Err(format!("{path}: span start after end"));
        }
        match self {
            CstNode::Leaf { token, .. } => {
                if token.is_empty() {
                    return Err(format!("{path}: empty leaf token"));
                }
            }
            CstNode::Internal { rule, children, .. } => {
                if rule.is_empty() {
                    return Err(format!("{path}: empty rule name"));
                }
                if children.is_empty() {
                    return Err(format!("{path}: internal node without children"));
                }
                let mut prev_end = span.start;
                for (i, child) in children.iter().enumerate() {
                    let cpath = format!("{path}.children[{i}]");
                    let cs = child.span();
                    if !span.contains(&cs) {
                        return Err(format!("{cpath}: span {cs} outside parent span {span}"));
                    }
                    if cs.start < prev_end {
                        return Err(format!("{cpath}: span {cs} overlaps previous sibling"));
                    }
                    prev_end = cs.end;
                    child.validate_at(&cpath)?;
                }
            }
        }
        Ok(())
    }
}

/// A located message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub span: Span,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseDiagnostics {
    pub errors: Vec<Diagnostic>,
    pub warnings: Vec<Diagnostic>,
}

impl fmt::Display for ParseDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.errors.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "error at {}: {}", d.span, d.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseDiagnostics {}
