//! Java frontend: lossless lexing, expression trees, and the per-file
//! structure (expression sites, method scopes) the transforms work on.

pub mod expr;
pub mod lexer;
pub mod scan;

pub use expr::{parse_expression, parse_str, ExprNode, ExprTree, NodeId, NodeKind, TypeTag};
pub use lexer::{tokenize, LexError, Token, TokenKind};
pub use scan::{ExprSite, MethodScope, SiteContext, VarDecl};

use std::fmt::Write as _;

/// A tokenized and scanned source file.
#[derive(Debug, Clone)]
pub struct ParsedFile {
    pub text: String,
    pub tokens: Vec<Token>,
    pub sites: Vec<ExprSite>,
    pub methods: Vec<MethodScope>,
    /// False when brackets do not balance; such files contribute no method scopes.
    pub balanced: bool,
}

impl ParsedFile {
    /// Source text of `lines` (1-based, inclusive).
    pub fn line_text(&self, line: u32) -> &str {
        self.text.lines().nth(line.saturating_sub(1) as usize).unwrap_or("")
    }

    /// Indices of tokens lying on lines `[first, last]`.
    pub fn tokens_on_lines(&self, first: u32, last: u32) -> std::ops::Range<usize> {
        let start = self.tokens.partition_point(|t| t.line < first);
        let end = self.tokens.partition_point(|t| t.line <= last);
        start..end
    }
}

/// Lexes and scans `text`.
pub fn analyze(text: &str) -> Result<ParsedFile, LexError> {
    let tokens = tokenize(text)?;
    let structure = scan::scan(&tokens);
    Ok(ParsedFile {
        text: text.to_string(),
        tokens,
        sites: structure.sites,
        methods: structure.methods,
        balanced: structure.balanced,
    })
}

/// Human-readable dump of tokens, sites, and scopes.
pub fn dump(file: &ParsedFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "tokens {}", file.tokens.len());
    for (i, t) in file.tokens.iter().enumerate().filter(|(_, t)| !t.kind.is_trivia()) {
        let _ = writeln!(out, "  {i:5} {}:{} {} {:?}", t.line, t.col, t.kind.name(), t.text);
    }
    let _ = writeln!(out, "sites {}", file.sites.len());
    for site in &file.sites {
        let _ = writeln!(
            out,
            "  [{}..{}) lines {}-{} {}{} {}",
            site.start,
            site.end,
            site.line_span.0,
            site.line_span.1,
            site.context.name(),
            if site.opaque { " opaque" } else { "" },
            site.tree.text(site.tree.root, &file.tokens).replace('\n', " "),
        );
        if !site.opaque {
            for line in site.tree.dump(&file.tokens).lines() {
                let _ = writeln!(out, "      {line}");
            }
        }
    }
    let _ = writeln!(out, "methods {}", file.methods.len());
    for m in &file.methods {
        let _ = writeln!(
            out,
            "  {} span [{}..{}) lambda={} nested_class={}",
            m.name, m.body_span.0, m.body_span.1, m.contains_lambda, m.contains_nested_class
        );
        for d in &m.locals {
            let _ = writeln!(
                out,
                "    {} {} decl@{} scope<{} count={} uses={:?}{}",
                d.declared_type,
                d.name,
                d.decl_token,
                d.scope_end,
                d.decl_count_in_method,
                d.positions,
                if d.is_param { " param" } else { "" }
            );
        }
    }
    out
}
