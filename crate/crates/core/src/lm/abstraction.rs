use crate::frontend::{Token, TokenKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AbstractionOptions {
    /// Keep the literal `0` alongside `1`, `2` and `3`.
    pub keep_zero: bool,
}

fn is_single_char_string(text: &str) -> bool {
    let Some(inner) = text.strip_prefix('"').and_then(|s| s.strip_suffix('"')) else {
        return false;
    };
    if inner.starts_with("\"\"") {
        return false;
    }
    let mut chars = inner.chars();
    match chars.next() {
        None => false,
        Some('\\') => match chars.next() {
            Some('u') => {
                let rest: String = chars.collect();
                let digits = rest.trim_start_matches('u');
                digits.len() == 4 && digits.chars().all(|c| c.is_ascii_hexdigit())
            }
            Some(c) if c.is_digit(8) => chars.all(|c| c.is_digit(8)) && inner.len() <= 4,
            Some(_) => chars.next().is_none(),
            None => false,
        },
        Some(_) => chars.next().is_none(),
    }
}

/// Category placeholder for identifiers and most literals.
pub fn abstract_token(token: &Token, opts: AbstractionOptions) -> &str {
    let text = token.text.as_str();
    match token.kind {
        TokenKind::Identifier => "<id>",
        TokenKind::IntLiteral => match text {
            "1" | "2" | "3" => text,
            "0" if opts.keep_zero => text,
            _ => "<int>",
        },
        TokenKind::FloatLiteral => "<float>",
        TokenKind::StringLiteral if text == "\"\"" || is_single_char_string(text) => text,
        TokenKind::StringLiteral => "<str>",
        _ => text,
    }
}

/// Texts of the significant tokens.
pub fn concrete_stream(tokens: &[Token]) -> Vec<String> {
    tokens.iter().filter(|t| !t.kind.is_trivia()).map(|t| t.text.clone()).collect()
}

/// Abstracted texts of the significant tokens.
pub fn abstract_stream(tokens: &[Token], opts: AbstractionOptions) -> Vec<String> {
    tokens.iter().filter(|t| !t.kind.is_trivia()).map(|t| abstract_token(t, opts).to_string()).collect()
}
