use super::Span;

const KEYWORDS: &[&str] = &[
    "auto", "bool", "break", "case", "char", "const", "continue", "default", "do", "double",
    "else", "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while", "_Bool",
];

/// Identifier-shaped words that denote constant values.
const LITERAL_WORDS: &[&str] = &["true", "false", "NULL", "nullptr"];

// Longest first so that maximal munch falls out of a linear scan.
const PUNCTUATORS: &[&str] = &[
    ">>=", "<<=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "^=", "|=", "::", "+", "-", "*", "/", "%", "<", ">", "=", "!",
    "~", "&", "|", "^", "?", ":", ";", ",", ".", "(", ")", "[", "]", "{", "}",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

/// True for identifier-shaped tokens that are neither keywords nor literal words.
pub fn is_identifier(token: &str) -> bool {
    let mut chars = token.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !is_keyword(token)
        && !LITERAL_WORDS.contains(&token)
}

/// True for numeric, character and string literal tokens (including
/// `L"..."`-style prefixed strings) and the literal words `true`, `false`,
/// `NULL`, `nullptr`.
pub fn is_literal(token: &str) -> bool {
    if LITERAL_WORDS.contains(&token) {
        return true;
    }
    let bytes = token.as_bytes();
    match bytes.first() {
        Some(b) if b.is_ascii_digit() => true,
        Some(b'.') => bytes.get(1).is_some_and(|b| b.is_ascii_digit()),
        Some(b'"') | Some(b'\'') => true,
        Some(_) => {
            let quote = token.find(['"', '\'']);
            matches!(quote, Some(q) if q > 0 && q <= 2 && token[..q].chars().all(|c| matches!(c, 'L' | 'u' | 'U' | '8')))
        }
        None => false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Identifier,
    Keyword,
    Number,
    Char,
    Str,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message} at {span}")]
pub struct LexError {
    pub span: Span,
    pub message: String,
}

/// Splits source text into tokens. Comments and preprocessor lines are
/// dropped; spans refer to the original text.
pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    Lexer { src, pos: 0, line_start: true }.run()
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line_start: bool,
}

impl Lexer<'_> {
    fn peek_byte(&self, offset: usize) -> Option<u8> {
        self.src.as_bytes().get(self.pos + offset).copied()
    }

    fn err(&self, start: usize, message: &str) -> LexError {
        LexError {
            span: Span::new(start, self.pos),
            message: message.to_string(),
        }
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        let mut tokens = Vec::new();
        while let Some(b) = self.peek_byte(0) {
            let start = self.pos;
            match b {
                b'\n' => {
                    self.pos += 1;
                    self.line_start = true;
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                b'#' if self.line_start => self.skip_directive(),
                b'/' if self.peek_byte(1) == Some(b'/') => {
                    while let Some(c) = self.peek_byte(0) {
                        if c == b'\n' {
                            break;
                        }
                        self.pos += 1;
                    }
                }
                b'/' if self.peek_byte(1) == Some(b'*') => {
                    match self.src[self.pos + 2..].find("*/") {
                        Some(off) => self.pos += off + 4,
                        None => {
                            self.pos = self.src.len();
                            return Err(self.err(start, "unterminated comment"));
                        }
                    }
                }
                _ => {
                    self.line_start = false;
                    let kind = self.scan_token()?;
                    tokens.push(Token {
                        kind,
                        text: self.src[start..self.pos].to_string(),
                        span: Span::new(start, self.pos),
                    });
                }
            }
        }
        Ok(tokens)
    }

    fn skip_directive(&mut self) {
        while let Some(c) = self.peek_byte(0) {
            if c == b'\\' && self.peek_byte(1) == Some(b'\n') {
                self.pos += 2;
                continue;
            }
            if c == b'\n' {
                break;
            }
            self.pos += 1;
        }
    }

    fn scan_token(&mut self) -> Result<TokenKind, LexError> {
        let start = self.pos;
        let b = self.peek_byte(0).unwrap_or(0);

        // Prefixed string/char literals: L"..", u8"..", U'..'
        if matches!(b, b'L' | b'u' | b'U') {
            let mut k = 1;
            if b == b'u' && self.peek_byte(1) == Some(b'8') {
                k = 2;
            }
            if let Some(q @ (b'"' | b'\'')) = self.peek_byte(k) {
                self.pos += k;
                return self.scan_quoted(q, start);
            }
        }

        if b.is_ascii_alphabetic() || b == b'_' {
            while self
                .peek_byte(0)
                .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
            {
                self.pos += 1;
            }
            let word = &self.src[start..self.pos];
            return Ok(if is_keyword(word) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            });
        }

        if b.is_ascii_digit() || (b == b'.' && self.peek_byte(1).is_some_and(|c| c.is_ascii_digit())) {
            self.pos += 1;
            while let Some(c) = self.peek_byte(0) {
                let exponent_sign = matches!(c, b'+' | b'-')
                    && matches!(self.src.as_bytes()[self.pos - 1], b'e' | b'E' | b'p' | b'P');
                if exponent_sign || c.is_ascii_alphanumeric() || c == b'_' || c == b'.' {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            return Ok(TokenKind::Number);
        }

        if b == b'"' || b == b'\'' {
            return self.scan_quoted(b, start);
        }

        let rest = &self.src[self.pos..];
        for p in PUNCTUATORS {
            if rest.starts_with(p) {
                self.pos += p.len();
                return Ok(TokenKind::Punct);
            }
        }
        let ch_len = rest.chars().next().map_or(1, char::len_utf8);
        self.pos += ch_len;
        Err(self.err(start, &format!("unexpected character {:?}", &rest[..ch_len])))
    }

    fn scan_quoted(&mut self, quote: u8, start: usize) -> Result<TokenKind, LexError> {
        self.pos += 1;
        loop {
            match self.peek_byte(0) {
                None | Some(b'\n') => {
                    let what = if quote == b'"' { "string" } else { "character" };
                    return Err(self.err(start, &format!("unterminated {what} literal")));
                }
                Some(b'\\') => self.pos += 2.min(self.src.len() - self.pos),
                Some(c) if c == quote => {
                    self.pos += 1;
                    break;
                }
                Some(_) => self.pos += 1,
            }
        }
        Ok(if quote == b'"' { TokenKind::Str } else { TokenKind::Char })
    }
}
