//! Recursive-descent parser for the C subset.
//!
//! Binary operators use precedence climbing over the standard C table.
//! Every token becomes a leaf, so the leaf sequence of a tree is exactly the
//! token stream of the file.

use super::lexer::{tokenize, Token, TokenKind};
use super::{CstNode, Diagnostic, Dialect, ParseDiagnostics, SourceFile, Span};

/// Type keywords that name a base type.
const BASE_TYPES: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "bool",
    "_Bool",
];

const QUALIFIERS: &[&str] = &[
    "const", "volatile", "static", "extern", "register", "auto", "inline", "typedef", "restrict",
];

const ASSIGN_OPS: &[&str] = &["=", "+=", "-=", "*=", "/=", "%=", "&=", "^=", "|=", "<<=", ">>="];

fn binary_precedence(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 1,
        "&&" => 2,
        "|" => 3,
        "^" => 4,
        "&" => 5,
        "==" | "!=" => 6,
        "<" | ">" | "<=" | ">=" => 7,
        "<<" | ">>" => 8,
        "+" | "-" => 9,
        "*" | "/" | "%" => 10,
        _ => return None,
    })
}

type PResult<T> = Result<T, Diagnostic>;

/// Parses a C-subset source file into its concrete syntax tree.
pub fn parse_source(file: &SourceFile) -> Result<CstNode, ParseDiagnostics> {
    if file.dialect != Dialect::CSubset {
        return Err(single_error(
            Span::new(0, 0),
            "parse_source only handles the c-subset dialect; load external trees with load_tree",
        ));
    }
    parse_str(&file.contents)
}

/// Parses C-subset text.
pub fn parse_str(src: &str) -> Result<CstNode, ParseDiagnostics> {
    let tokens = tokenize(src).map_err(|e| single_error(e.span, &e.message))?;
    if tokens.is_empty() {
        return Err(single_error(Span::new(0, src.len()), "empty translation unit"));
    }
    let mut p = Parser {
        tokens,
        pos: 0,
        src_len: src.len(),
    };
    let mut items = Vec::new();
    while !p.at_end() {
        items.push(p.external_item().map_err(|d| ParseDiagnostics {
            errors: vec![d],
            warnings: Vec::new(),
        })?);
    }
    Ok(CstNode::Internal {
        rule: "translation_unit".into(),
        span: Span::new(0, src.len()),
        children: items,
    })
}

fn single_error(span: Span, message: &str) -> ParseDiagnostics {
    ParseDiagnostics {
        errors: vec![Diagnostic {
            span,
            message: message.to_string(),
        }],
        warnings: Vec::new(),
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    src_len: usize,
}

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek_at(&self, offset: usize) -> Option<&Token> {
        self.tokens.get(self.pos + offset)
    }

    fn peek_text(&self, offset: usize) -> Option<&str> {
        self.peek_at(offset).map(|t| t.text.as_str())
    }

    fn at(&self, text: &str) -> bool {
        self.peek_text(0) == Some(text)
    }

    fn at_kind(&self, offset: usize, kind: TokenKind) -> bool {
        self.peek_at(offset).is_some_and(|t| t.kind == kind)
    }

    fn bump(&mut self) -> CstNode {
        let t = &self.tokens[self.pos];
        self.pos += 1;
        CstNode::leaf(t.text.clone(), t.span)
    }

    fn error_here(&self, expected: &str) -> Diagnostic {
        match self.peek_at(0) {
            Some(t) => Diagnostic {
                span: t.span,
                message: format!("expected {expected}, found '{}'", t.text),
            },
            None => Diagnostic {
                span: Span::new(self.src_len, self.src_len),
                message: format!("expected {expected}, found end of file"),
            },
        }
    }

    fn expect(&mut self, text: &str) -> PResult<CstNode> {
        if self.at(text) {
            Ok(self.bump())
        } else {
            Err(self.error_here(&format!("'{text}'")))
        }
    }

    fn expect_identifier(&mut self) -> PResult<CstNode> {
        if self.at_kind(0, TokenKind::Identifier) {
            Ok(self.bump())
        } else {
            Err(self.error_here("identifier"))
        }
    }

    fn is_type_keyword(&self, offset: usize) -> bool {
        self.peek_text(offset).is_some_and(|t| {
            BASE_TYPES.contains(&t) || QUALIFIERS.contains(&t) || matches!(t, "struct" | "union" | "enum")
        })
    }

    /// Decides whether a declaration starts here.
    fn at_declaration(&self, top_level: bool) -> bool {
        if self.is_type_keyword(0) {
            return true;
        }
        if !self.at_kind(0, TokenKind::Identifier) {
            return false;
        }
        if self.at_kind(1, TokenKind::Identifier) {
            return true;
        }
        // `T *p;`, `T **p = ...`
        let mut k = 1;
        while self.peek_text(k) == Some("*") {
            k += 1;
        }
        if k == 1 || !self.at_kind(k, TokenKind::Identifier) {
            return false;
        }
        match self.peek_text(k + 1) {
            Some(";" | "=" | "," | "[") => true,
            Some("(") => top_level,
            _ => false,
        }
    }

    /// Type specifier tokens, pushed as leaves. At least one is required.
    fn type_tokens(&mut self, out: &mut Vec<CstNode>) -> PResult<()> {
        let mut has_base = false;
        let start_len = out.len();
        loop {
            let Some(text) = self.peek_text(0) else { break };
            if QUALIFIERS.contains(&text) {
                out.push(self.bump());
            } else if BASE_TYPES.contains(&text) {
                has_base = true;
                out.push(self.bump());
            } else if matches!(text, "struct" | "union" | "enum") {
                has_base = true;
                out.push(self.bump());
                out.push(self.expect_identifier()?);
            } else if !has_base
                && self.at_kind(0, TokenKind::Identifier)
                && (self.at_kind(1, TokenKind::Identifier) || self.peek_text(1) == Some("*") || self.peek_text(1) == Some(")"))
            {
                has_base = true;
                out.push(self.bump());
            } else {
                break;
            }
        }
        if out.len() == start_len {
            return Err(self.error_here("type specifier"));
        }
        Ok(())
    }

    fn external_item(&mut self) -> PResult<CstNode> {
        if !self.at_declaration(true) {
            return self.statement();
        }
        let start = self.pos;
        let mut children = Vec::new();
        self.type_tokens(&mut children)?;
        while self.at("*") {
            children.push(self.bump());
        }
        if self.at_kind(0, TokenKind::Identifier) && self.peek_text(1) == Some("(") {
            let name = self.bump();
            let params = self.parameter_list()?;
            if self.at("{") {
                children.push(name);
                children.push(params);
                children.push(self.compound()?);
                return Ok(CstNode::internal("function_definition", children));
            }
        }
        self.pos = start;
        self.declaration(true)
    }

    fn parameter_list(&mut self) -> PResult<CstNode> {
        let mut children = vec![self.expect("(")?];
        if self.at("void") && self.peek_text(1) == Some(")") {
            children.push(self.bump());
        } else if !self.at(")") {
            loop {
                if self.at("...") {
                    children.push(self.bump());
                    break;
                }
                let mut decl = Vec::new();
                self.type_tokens(&mut decl)?;
                if self.at("*") || self.at_kind(0, TokenKind::Identifier) {
                    decl.push(self.declarator()?);
                }
                children.push(CstNode::internal("parameter_declaration", decl));
                if self.at(",") {
                    children.push(self.bump());
                } else {
                    break;
                }
            }
        }
        children.push(self.expect(")")?);
        Ok(CstNode::internal("parameter_list", children))
    }

    fn declarator(&mut self) -> PResult<CstNode> {
        if self.at("*") {
            let star = self.bump();
            let mut quals = Vec::new();
            while self.at("const") || self.at("volatile") || self.at("restrict") {
                quals.push(self.bump());
            }
            let inner = self.declarator()?;
            let mut children = vec![star];
            children.extend(quals);
            children.push(inner);
            return Ok(CstNode::internal("pointer_declarator", children));
        }
        let mut node = self.expect_identifier()?;
        loop {
            if self.at("[") {
                let mut children = vec![node, self.bump()];
                if !self.at("]") {
                    children.push(self.expression()?);
                }
                children.push(self.expect("]")?);
                node = CstNode::internal("array_declarator", children);
            } else if self.at("(") {
                let params = self.parameter_list()?;
                node = CstNode::internal("function_declarator", vec![node, params]);
            } else {
                return Ok(node);
            }
        }
    }

    fn init_declarator(&mut self) -> PResult<CstNode> {
        let decl = self.declarator()?;
        if !self.at("=") {
            return Ok(decl);
        }
        let eq = self.bump();
        let init = self.initializer()?;
        Ok(CstNode::internal("init_declarator", vec![decl, eq, init]))
    }

    fn initializer(&mut self) -> PResult<CstNode> {
        if !self.at("{") {
            return self.assignment();
        }
        let mut children = vec![self.bump()];
        while !self.at("}") {
            children.push(self.initializer()?);
            if self.at(",") {
                children.push(self.bump());
            } else {
                break;
            }
        }
        children.push(self.expect("}")?);
        Ok(CstNode::internal("initializer_list", children))
    }

    /// `type declarator (, declarator)* ;`; the `;` is omitted for a
    /// for-loop initializer, where the loop owns it.
    fn declaration_body(&mut self) -> PResult<Vec<CstNode>> {
        let mut children = Vec::new();
        self.type_tokens(&mut children)?;
        if !self.at(";") {
            loop {
                children.push(self.init_declarator()?);
                if self.at(",") {
                    children.push(self.bump());
                } else {
                    break;
                }
            }
        }
        Ok(children)
    }

    fn declaration(&mut self, _top_level: bool) -> PResult<CstNode> {
        let mut children = self.declaration_body()?;
        children.push(self.expect(";")?);
        Ok(CstNode::internal("declaration", children))
    }

    fn compound(&mut self) -> PResult<CstNode> {
        let mut children = vec![self.expect("{")?];
        while !self.at("}") {
            if self.at_end() {
                return Err(self.error_here("'}'"));
            }
            children.push(self.statement()?);
        }
        children.push(self.bump());
        Ok(CstNode::internal("compound_statement", children))
    }

    fn paren_expr(&mut self) -> PResult<CstNode> {
        let open = self.expect("(")?;
        let inner = self.expression()?;
        let close = self.expect(")")?;
        Ok(CstNode::internal("paren_expr", vec![open, inner, close]))
    }

    fn statement(&mut self) -> PResult<CstNode> {
        let Some(text) = self.peek_text(0) else {
            return Err(self.error_here("statement"));
        };
        match text {
            "{" => self.compound(),
            ";" => Ok(CstNode::internal("expression_statement", vec![self.bump()])),
            "if" => {
                let mut children = vec![self.bump(), self.paren_expr()?, self.statement()?];
                if self.at("else") {
                    children.push(self.bump());
                    children.push(self.statement()?);
                }
                Ok(CstNode::internal("if_statement", children))
            }
            "while" => {
                let children = vec![self.bump(), self.paren_expr()?, self.statement()?];
                Ok(CstNode::internal("while_statement", children))
            }
            "do" => {
                let kw = self.bump();
                let body = self.statement()?;
                let children = vec![kw, body, self.expect("while")?, self.paren_expr()?, self.expect(";")?];
                Ok(CstNode::internal("do_statement", children))
            }
            "for" => self.for_statement(),
            "switch" => {
                let children = vec![self.bump(), self.paren_expr()?, self.statement()?];
                Ok(CstNode::internal("switch_statement", children))
            }
            "case" => {
                let children = vec![self.bump(), self.conditional()?, self.expect(":")?];
                Ok(CstNode::internal("case_statement", children))
            }
            "default" => {
                let children = vec![self.bump(), self.expect(":")?];
                Ok(CstNode::internal("case_statement", children))
            }
            "return" => {
                let mut children = vec![self.bump()];
                if !self.at(";") {
                    children.push(self.expression()?);
                }
                children.push(self.expect(";")?);
                Ok(CstNode::internal("return_statement", children))
            }
            "break" | "continue" => {
                let rule = if text == "break" { "break_statement" } else { "continue_statement" };
                let children = vec![self.bump(), self.expect(";")?];
                Ok(CstNode::internal(rule, children))
            }
            _ if self.at_declaration(false) => self.declaration(false),
            _ => {
                let expr = self.expression()?;
                let semi = self.expect(";")?;
                Ok(CstNode::internal("expression_statement", vec![expr, semi]))
            }
        }
    }

    fn for_statement(&mut self) -> PResult<CstNode> {
        let mut children = vec![self.bump(), self.expect("(")?];
        if !self.at(";") {
            if self.at_declaration(false) {
                children.push(CstNode::internal("declaration", self.declaration_body()?));
            } else {
                children.push(self.expression()?);
            }
        }
        children.push(self.expect(";")?);
        if !self.at(";") {
            children.push(self.expression()?);
        }
        children.push(self.expect(";")?);
        if !self.at(")") {
            children.push(self.expression()?);
        }
        children.push(self.expect(")")?);
        children.push(self.statement()?);
        Ok(CstNode::internal("for_statement", children))
    }

    // ---- expressions ----

    fn expression(&mut self) -> PResult<CstNode> {
        let mut lhs = self.assignment()?;
        while self.at(",") {
            let comma = self.bump();
            let rhs = self.assignment()?;
            lhs = CstNode::internal("comma_expression", vec![lhs, comma, rhs]);
        }
        Ok(lhs)
    }

    fn assignment(&mut self) -> PResult<CstNode> {
        let lhs = self.conditional()?;
        if self.peek_text(0).is_some_and(|t| ASSIGN_OPS.contains(&t)) {
            let op = self.bump();
            let rhs = self.assignment()?;
            return Ok(CstNode::internal("assignment_expression", vec![lhs, op, rhs]));
        }
        Ok(lhs)
    }

    fn conditional(&mut self) -> PResult<CstNode> {
        let cond = self.binary(1)?;
        if !self.at("?") {
            return Ok(cond);
        }
        let q = self.bump();
        let then = self.expression()?;
        let colon = self.expect(":")?;
        let otherwise = self.conditional()?;
        Ok(CstNode::internal("conditional_expression", vec![cond, q, then, colon, otherwise]))
    }

    fn binary(&mut self, min_prec: u8) -> PResult<CstNode> {
        let mut lhs = self.unary()?;
        while let Some(prec) = self.peek_text(0).and_then(binary_precedence) {
            if prec < min_prec {
                break;
            }
            let op = self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = CstNode::internal("binary_expression", vec![lhs, op, rhs]);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<CstNode> {
        let Some(text) = self.peek_text(0) else {
            return Err(self.error_here("expression"));
        };
        match text {
            "++" | "--" => {
                let op = self.bump();
                let operand = self.unary()?;
                Ok(CstNode::internal("update_expression", vec![op, operand]))
            }
            "!" | "~" | "-" | "+" | "*" | "&" => {
                let op = self.bump();
                let operand = self.unary()?;
                Ok(CstNode::internal("unary_expression", vec![op, operand]))
            }
            "sizeof" => {
                let kw = self.bump();
                if self.at("(") && self.is_type_keyword(1) {
                    let open = self.bump();
                    let ty = self.type_descriptor()?;
                    let close = self.expect(")")?;
                    return Ok(CstNode::internal("sizeof_expression", vec![kw, open, ty, close]));
                }
                let operand = self.unary()?;
                Ok(CstNode::internal("sizeof_expression", vec![kw, operand]))
            }
            "(" if self.is_type_keyword(1) => {
                let open = self.bump();
                let ty = self.type_descriptor()?;
                let close = self.expect(")")?;
                let operand = self.unary()?;
                Ok(CstNode::internal("cast_expression", vec![open, ty, close, operand]))
            }
            _ => self.postfix(),
        }
    }

    fn type_descriptor(&mut self) -> PResult<CstNode> {
        let mut children = Vec::new();
        self.type_tokens(&mut children)?;
        while self.at("*") {
            children.push(self.bump());
        }
        Ok(CstNode::internal("type_descriptor", children))
    }

    fn postfix(&mut self) -> PResult<CstNode> {
        let mut expr = self.primary()?;
        loop {
            match self.peek_text(0) {
                Some("(") => {
                    let args = self.argument_list()?;
                    expr = CstNode::internal("call_expression", vec![expr, args]);
                }
                Some("[") => {
                    let open = self.bump();
                    let index = self.expression()?;
                    let close = self.expect("]")?;
                    expr = CstNode::internal("subscript_expression", vec![expr, open, index, close]);
                }
                Some("." | "->") => {
                    let op = self.bump();
                    let field = self.expect_identifier()?;
                    expr = CstNode::internal("field_expression", vec![expr, op, field]);
                }
                Some("++" | "--") => {
                    let op = self.bump();
                    expr = CstNode::internal("update_expression", vec![expr, op]);
                }
                _ => return Ok(expr),
            }
        }
    }

    fn argument_list(&mut self) -> PResult<CstNode> {
        let mut children = vec![self.expect("(")?];
        if !self.at(")") {
            loop {
                children.push(self.assignment()?);
                if self.at(",") {
                    children.push(self.bump());
                } else {
                    break;
                }
            }
        }
        children.push(self.expect(")")?);
        Ok(CstNode::internal("argument_list", children))
    }

    fn primary(&mut self) -> PResult<CstNode> {
        let Some(tok) = self.peek_at(0) else {
            return Err(self.error_here("expression"));
        };
        match tok.kind {
            TokenKind::Identifier | TokenKind::Number | TokenKind::Char => Ok(self.bump()),
            TokenKind::Str => {
                let first = self.bump();
                if !self.at_kind(0, TokenKind::Str) {
                    return Ok(first);
                }
                let mut parts = vec![first];
                while self.at_kind(0, TokenKind::Str) {
                    parts.push(self.bump());
                }
                Ok(CstNode::internal("concatenated_string", parts))
            }
            TokenKind::Punct if tok.text == "(" => self.paren_expr(),
            _ => Err(self.error_here("expression")),
        }
    }
}
