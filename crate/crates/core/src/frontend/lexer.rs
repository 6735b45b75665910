//! Lossless Java lexer.
//!
//! Every byte of the input ends up in exactly one token, including whitespace
//! and comments, so concatenating token texts reproduces the file.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Identifier,
    Keyword,
    Operator,
    Separator,
    IntLiteral,
    FloatLiteral,
    StringLiteral,
    CharLiteral,
    BoolLiteral,
    NullLiteral,
    Comment,
    Whitespace,
}

impl TokenKind {
    /// Whitespace and comments are kept for round-tripping but never modeled.
    pub fn is_trivia(self) -> bool {
        matches!(self, TokenKind::Whitespace | TokenKind::Comment)
    }

    pub fn is_literal(self) -> bool {
        matches!(
            self,
            TokenKind::IntLiteral
                | TokenKind::FloatLiteral
                | TokenKind::StringLiteral
                | TokenKind::CharLiteral
                | TokenKind::BoolLiteral
                | TokenKind::NullLiteral
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            TokenKind::Identifier => "identifier",
            TokenKind::Keyword => "keyword",
            TokenKind::Operator => "operator",
            TokenKind::Separator => "separator",
            TokenKind::IntLiteral => "int_literal",
            TokenKind::FloatLiteral => "float_literal",
            TokenKind::StringLiteral => "string_literal",
            TokenKind::CharLiteral => "char_literal",
            TokenKind::BoolLiteral => "bool_literal",
            TokenKind::NullLiteral => "null_literal",
            TokenKind::Comment => "comment",
            TokenKind::Whitespace => "whitespace",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line of the first character.
    pub line: u32,
    /// 1-based column (in characters) of the first character.
    pub col: u32,
    /// Byte offset into the source.
    pub offset: usize,
}

impl Token {
    pub fn end(&self) -> usize {
        self.offset + self.text.len()
    }

    pub fn is(&self, text: &str) -> bool {
        self.text == text
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexError {
    #[error("unterminated string literal at {line}:{col}")]
    UnterminatedString { line: u32, col: u32 },
    #[error("unterminated character literal at {line}:{col}")]
    UnterminatedChar { line: u32, col: u32 },
    #[error("unterminated block comment at {line}:{col}")]
    UnterminatedComment { line: u32, col: u32 },
    #[error("unexpected character {ch:?} at {line}:{col}")]
    UnexpectedChar { ch: char, line: u32, col: u32 },
}

pub const KEYWORDS: &[&str] = &[
    "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char", "class", "const",
    "continue", "default", "do", "double", "else", "enum", "extends", "final", "finally",
    "float", "for", "goto", "if", "implements", "import", "instanceof", "int", "interface",
    "long", "native", "new", "package", "private", "protected", "public", "return", "short",
    "static", "strictfp", "super", "switch", "synchronized", "this", "throw", "throws",
    "transient", "try", "void", "volatile", "while",
];

pub const PRIMITIVE_TYPES: &[&str] =
    &["boolean", "byte", "char", "short", "int", "long", "float", "double"];

// Longest first within each leading character is enforced by trying longer lengths first.
const OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "...", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=",
    ">=", "+=", "-=", "*=", "/=", "&=", "|=", "^=", "%=", "<<", ">>", "=", ">", "<", "!", "~",
    "?", ":", "+", "-", "*", "/", "&", "|", "^", "%", "(", ")", "{", "}", "[", "]", ";", ",",
    ".", "@",
];

fn is_separator(op: &str) -> bool {
    matches!(op, "(" | ")" | "{" | "}" | "[" | "]" | ";" | "," | "." | "..." | "@" | "::")
}

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn bump_while(&mut self, f: impl Fn(char) -> bool) {
        while let Some(c) = self.peek() {
            if !f(c) {
                break;
            }
            self.bump();
        }
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_' || c == '$'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '$'
}

/// Splits Java source into tokens. Fails only on lexically broken input
/// (unterminated literals or comments, stray characters).
pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor { src, pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    while let Some(c) = cur.peek() {
        let (start, line, col) = (cur.pos, cur.line, cur.col);
        let kind = if c.is_whitespace() {
            cur.bump_while(char::is_whitespace);
            TokenKind::Whitespace
        } else if cur.rest().starts_with("//") {
            cur.bump_while(|c| c != '\n' && c != '\r');
            TokenKind::Comment
        } else if cur.rest().starts_with("/*") {
            match cur.rest()[2..].find("*/") {
                Some(i) => {
                    let end = cur.pos + 2 + i + 2;
                    while cur.pos < end {
                        cur.bump();
                    }
                }
                None => return Err(LexError::UnterminatedComment { line, col }),
            }
            TokenKind::Comment
        } else if is_ident_start(c) {
            cur.bump_while(is_ident_continue);
            match &src[start..cur.pos] {
                "true" | "false" => TokenKind::BoolLiteral,
                "null" => TokenKind::NullLiteral,
                w if is_keyword(w) => TokenKind::Keyword,
                _ => TokenKind::Identifier,
            }
        } else if c.is_ascii_digit() || (c == '.' && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
            lex_number(&mut cur)
        } else if c == '"' {
            lex_string(&mut cur, line, col)?;
            TokenKind::StringLiteral
        } else if c == '\'' {
            lex_char(&mut cur, line, col)?;
            TokenKind::CharLiteral
        } else {
            let rest = cur.rest();
            let op = OPERATORS
                .iter()
                .filter(|op| rest.starts_with(**op))
                .max_by_key(|op| op.len())
                .ok_or(LexError::UnexpectedChar { ch: c, line, col })?;
            for _ in 0..op.len() {
                cur.bump();
            }
            if is_separator(op) {
                TokenKind::Separator
            } else {
                TokenKind::Operator
            }
        };
        out.push(Token { kind, text: src[start..cur.pos].to_string(), line, col, offset: start });
    }
    Ok(out)
}

fn lex_number(cur: &mut Cursor) -> TokenKind {
    let mut float = false;
    let rest = cur.rest();
    if rest.starts_with("0x") || rest.starts_with("0X") {
        cur.bump();
        cur.bump();
        cur.bump_while(|c| c.is_ascii_hexdigit() || c == '_');
        if cur.peek() == Some('.') {
            float = true;
            cur.bump();
            cur.bump_while(|c| c.is_ascii_hexdigit() || c == '_');
        }
        if matches!(cur.peek(), Some('p' | 'P')) {
            float = true;
            cur.bump();
            if matches!(cur.peek(), Some('+' | '-')) {
                cur.bump();
            }
            cur.bump_while(|c| c.is_ascii_digit() || c == '_');
        }
    } else if rest.starts_with("0b") || rest.starts_with("0B") {
        cur.bump();
        cur.bump();
        cur.bump_while(|c| c == '0' || c == '1' || c == '_');
    } else {
        cur.bump_while(|c| c.is_ascii_digit() || c == '_');
        // `1.` is a float, but `1..` is never produced by Java code and `1.foo` is not numeric.
        if cur.peek() == Some('.')
            && cur.peek_at(1).is_none_or(|c| c.is_ascii_digit() || !(is_ident_start(c) || c == '.'))
        {
            float = true;
            cur.bump();
            cur.bump_while(|c| c.is_ascii_digit() || c == '_');
        } else if cur.peek() == Some('.') && matches!(cur.peek_at(1), Some('e' | 'E' | 'f' | 'F' | 'd' | 'D')) {
            float = true;
            cur.bump();
        }
        if matches!(cur.peek(), Some('e' | 'E')) {
            let sign = matches!(cur.peek_at(1), Some('+' | '-'));
            let digit_at = if sign { 2 } else { 1 };
            if cur.peek_at(digit_at).is_some_and(|c| c.is_ascii_digit()) {
                float = true;
                cur.bump();
                if sign {
                    cur.bump();
                }
                cur.bump_while(|c| c.is_ascii_digit() || c == '_');
            }
        }
    }
    match cur.peek() {
        Some('l' | 'L') => {
            cur.bump();
        }
        Some('f' | 'F' | 'd' | 'D') => {
            cur.bump();
            float = true;
        }
        _ => {}
    }
    if float {
        TokenKind::FloatLiteral
    } else {
        TokenKind::IntLiteral
    }
}

fn lex_string(cur: &mut Cursor, line: u32, col: u32) -> Result<(), LexError> {
    if cur.rest().starts_with("\"\"\"") {
        for _ in 0..3 {
            cur.bump();
        }
        loop {
            if cur.rest().starts_with("\"\"\"") {
                for _ in 0..3 {
                    cur.bump();
                }
                return Ok(());
            }
            match cur.bump() {
                Some('\\') => {
                    cur.bump();
                }
                Some(_) => {}
                None => return Err(LexError::UnterminatedString { line, col }),
            }
        }
    }
    cur.bump();
    loop {
        match cur.bump() {
            Some('"') => return Ok(()),
            Some('\\') => {
                if matches!(cur.peek(), None | Some('\n')) {
                    return Err(LexError::UnterminatedString { line, col });
                }
                cur.bump();
            }
            Some('\n') | None => return Err(LexError::UnterminatedString { line, col }),
            Some(_) => {}
        }
    }
}

fn lex_char(cur: &mut Cursor, line: u32, col: u32) -> Result<(), LexError> {
    cur.bump();
    loop {
        match cur.bump() {
            Some('\'') => return Ok(()),
            Some('\\') => {
                if matches!(cur.peek(), None | Some('\n')) {
                    return Err(LexError::UnterminatedChar { line, col });
                }
                cur.bump();
            }
            Some('\n') | None => return Err(LexError::UnterminatedChar { line, col }),
            Some(_) => {}
        }
    }
}

/// Indices of the tokens that are neither whitespace nor comments.
pub fn significant(tokens: &[Token]) -> Vec<usize> {
    tokens.iter().enumerate().filter(|(_, t)| !t.kind.is_trivia()).map(|(i, _)| i).collect()
}
