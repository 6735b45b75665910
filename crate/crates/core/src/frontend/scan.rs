//! File-level structure: locates expression regions, method bodies, local
//! declarations and statement units, then resolves identifier uses to
//! declarations with the innermost-scope rule.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::expr::{parse_expression, ExprNode, ExprTree, NodeKind, TypeTag};
use super::lexer::{Token, TokenKind, PRIMITIVE_TYPES};

/// Syntactic position of a statement-level expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteContext {
    Expression,
    Declaration,
    Field,
    Return,
    Throw,
    Yield,
    If,
    While,
    Switch,
    Synchronized,
    ForInit,
    ForCond,
    ForUpdate,
    ForEach,
    Assert,
    Resource,
}

impl SiteContext {
    pub fn name(self) -> &'static str {
        match self {
            SiteContext::Expression => "expression_statement",
            SiteContext::Declaration => "declaration",
            SiteContext::Field => "field",
            SiteContext::Return => "return",
            SiteContext::Throw => "throw",
            SiteContext::Yield => "yield",
            SiteContext::If => "if",
            SiteContext::While => "while",
            SiteContext::Switch => "switch",
            SiteContext::Synchronized => "synchronized",
            SiteContext::ForInit => "for_init",
            SiteContext::ForCond => "for_cond",
            SiteContext::ForUpdate => "for_update",
            SiteContext::ForEach => "for_each",
            SiteContext::Assert => "assert",
            SiteContext::Resource => "resource",
        }
    }
}

/// A statement-level expression. Regions the parser cannot handle are kept as
/// a single opaque `Other` node so they still render verbatim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExprSite {
    pub tree: ExprTree,
    /// Token range `[start, end)`.
    pub start: usize,
    pub end: usize,
    pub line_span: (u32, u32),
    pub context: SiteContext,
    pub method: Option<usize>,
    pub opaque: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    pub declared_type: String,
    /// Token index of the declared name.
    pub decl_token: usize,
    /// Token index one past the end of the declaration's scope.
    pub scope_end: usize,
    pub is_param: bool,
    pub decl_count_in_method: usize,
    /// Token indices of every resolved occurrence, declaration included.
    pub positions: Vec<usize>,
}

impl VarDecl {
    pub fn type_tag(&self) -> TypeTag {
        TypeTag::from_declared(&self.declared_type)
    }

    /// Primitive types, `String`, and single-identifier class types.
    pub fn has_shuffleable_type(&self) -> bool {
        let t = self.declared_type.as_str();
        PRIMITIVE_TYPES.contains(&t)
            || t == "String"
            || (t.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_' || c == '$')
                && t.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '$'))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodScope {
    pub name: String,
    /// Token index of the method name.
    pub name_token: usize,
    /// Token range `[start, end)` from the parameter list's `(` through the closing `}`.
    pub body_span: (usize, usize),
    pub locals: Vec<VarDecl>,
    pub contains_lambda: bool,
    pub contains_nested_class: bool,
    /// Every identifier occurrence treated as a variable reference, with the
    /// declaration it resolves to (index into `locals`).
    pub refs: Vec<(usize, Option<usize>)>,
    /// Statement units `[start, end)` inside the method.
    pub units: Vec<(usize, usize)>,
}

impl MethodScope {
    pub fn resolve(&self, token: usize, name: &str) -> Option<usize> {
        resolve_in(&self.locals, token, name)
    }
}

fn resolve_in(decls: &[VarDecl], token: usize, name: &str) -> Option<usize> {
    decls
        .iter()
        .enumerate()
        .filter(|(_, d)| d.name == name && d.decl_token <= token && token < d.scope_end)
        .max_by_key(|(_, d)| d.decl_token)
        .map(|(i, _)| i)
}

#[derive(Debug, Clone)]
pub struct FileStructure {
    pub sites: Vec<ExprSite>,
    pub methods: Vec<MethodScope>,
    pub balanced: bool,
}

struct Scanner<'a> {
    tokens: &'a [Token],
    sig: Vec<usize>,
    pos_of: Vec<usize>,
    matching: HashMap<usize, usize>,
    sites: Vec<ExprSite>,
    methods: Vec<MethodScope>,
    case_label_tokens: HashSet<usize>,
}

/// Scans a tokenized file.
pub fn scan(tokens: &[Token]) -> FileStructure {
    let sig: Vec<usize> = tokens.iter().enumerate().filter(|(_, t)| !t.kind.is_trivia()).map(|(i, _)| i).collect();
    let mut pos_of = vec![usize::MAX; tokens.len()];
    for (j, &i) in sig.iter().enumerate() {
        pos_of[i] = j;
    }
    let (matching, balanced) = match_brackets(tokens, &sig);
    let mut s = Scanner {
        tokens,
        sig,
        pos_of,
        matching,
        sites: Vec::new(),
        methods: Vec::new(),
        case_label_tokens: HashSet::new(),
    };
    let n = s.sig.len();
    s.members(0, n, None, false);
    if balanced {
        s.resolve_methods();
    } else {
        s.methods.clear();
        for site in &mut s.sites {
            site.method = None;
        }
    }
    s.type_sites();
    s.sites.sort_by_key(|site| site.start);
    FileStructure { sites: s.sites, methods: s.methods, balanced }
}

fn match_brackets(tokens: &[Token], sig: &[usize]) -> (HashMap<usize, usize>, bool) {
    let mut matching = HashMap::new();
    let mut stack: Vec<(usize, &str)> = Vec::new();
    let mut balanced = true;
    for (j, &i) in sig.iter().enumerate() {
        let t = tokens[i].text.as_str();
        match t {
            "(" | "[" | "{" => stack.push((j, t)),
            ")" | "]" | "}" => {
                let want = match t {
                    ")" => "(",
                    "]" => "[",
                    _ => "{",
                };
                match stack.last() {
                    Some(&(open, o)) if o == want => {
                        stack.pop();
                        matching.insert(open, j);
                        matching.insert(j, open);
                    }
                    _ => balanced = false,
                }
            }
            _ => {}
        }
    }
    if !stack.is_empty() {
        balanced = false;
    }
    (matching, balanced)
}

impl<'a> Scanner<'a> {
    fn tok(&self, j: usize) -> Option<&'a Token> {
        self.sig.get(j).map(|&i| &self.tokens[i])
    }

    fn txt(&self, j: usize) -> &'a str {
        self.tok(j).map_or("", |t| t.text.as_str())
    }

    fn is_ident(&self, j: usize) -> bool {
        self.tok(j).is_some_and(|t| t.kind == TokenKind::Identifier)
    }

    /// Position of the bracket matching the one at `j`, or `fallback` if unmatched.
    fn close_of(&self, j: usize, fallback: usize) -> usize {
        self.matching.get(&j).copied().unwrap_or(fallback)
    }

    /// Finds the first `stop` token at bracket depth zero in `[j, b)`.
    fn find_top(&self, mut j: usize, b: usize, stops: &[&str]) -> usize {
        while j < b {
            let t = self.txt(j);
            if stops.contains(&t) {
                return j;
            }
            if matches!(t, "(" | "[" | "{") {
                j = self.close_of(j, b - 1).min(b - 1) + 1;
                continue;
            }
            j += 1;
        }
        b
    }

    fn skip_annotation(&self, mut j: usize, b: usize) -> usize {
        j += 1; // '@'
        if self.is_ident(j) {
            j += 1;
        }
        while self.txt(j) == "." && self.is_ident(j + 1) {
            j += 2;
        }
        if j < b && self.txt(j) == "(" {
            j = self.close_of(j, b - 1) + 1;
        }
        j
    }

    /// Parses a type starting at `j`; returns the position after it and its text.
    fn parse_type(&self, mut j: usize, b: usize) -> Option<(usize, String)> {
        let mut text = String::new();
        while j < b && self.txt(j) == "@" {
            j = self.skip_annotation(j, b);
        }
        let first = self.tok(j)?;
        if !(first.kind == TokenKind::Identifier || PRIMITIVE_TYPES.contains(&first.text.as_str())) {
            return None;
        }
        text.push_str(&first.text);
        j += 1;
        loop {
            match self.txt(j) {
                "." if self.is_ident(j + 1) && j + 1 < b => {
                    text.push('.');
                    text.push_str(self.txt(j + 1));
                    j += 2;
                }
                "<" => {
                    let mut depth: i32 = 0;
                    loop {
                        if j >= b {
                            return None;
                        }
                        let t = self.tok(j)?;
                        match t.text.as_str() {
                            "<" => depth += 1,
                            ">" => depth -= 1,
                            ">>" => depth -= 2,
                            ">>>" => depth -= 3,
                            "?" | "," | "." | "&" | "[" | "]" | "extends" | "super" => {}
                            _ if t.kind == TokenKind::Identifier || PRIMITIVE_TYPES.contains(&t.text.as_str()) => {}
                            _ => return None,
                        }
                        text.push_str(&t.text);
                        j += 1;
                        if depth == 0 {
                            break;
                        }
                        if depth < 0 {
                            return None;
                        }
                    }
                }
                "[" if self.txt(j + 1) == "]" => {
                    text.push_str("[]");
                    j += 2;
                }
                "..." => {
                    text.push_str("...");
                    j += 1;
                }
                _ => return Some((j, text)),
            }
        }
    }

    fn skip_modifiers(&self, mut j: usize, b: usize) -> usize {
        while j < b {
            match self.txt(j) {
                "final" | "public" | "private" | "protected" | "static" | "abstract" | "native" | "synchronized"
                | "transient" | "volatile" | "strictfp" | "default" => j += 1,
                "@" if self.txt(j + 1) != "interface" => j = self.skip_annotation(j, b),
                _ => break,
            }
        }
        j
    }

    /// If `[a, b)` starts a local-variable-style declaration, returns the
    /// declared type and the position of the first declarator name.
    fn declaration_head(&self, a: usize, b: usize) -> Option<(String, usize)> {
        let j = self.skip_modifiers(a, b);
        let (k, ty) = self.parse_type(j, b)?;
        if k >= b || !self.is_ident(k) {
            return None;
        }
        let after = self.txt(k + 1);
        if k + 1 >= b || matches!(after, "=" | "," | ";" | ":" | "[" | ")") {
            Some((ty, k))
        } else {
            None
        }
    }

    /// Is position `j` (inside `[_, b)`) the start of another declarator?
    fn declarator_start(&self, j: usize, b: usize) -> bool {
        self.is_ident(j) && (j + 1 >= b || matches!(self.txt(j + 1), "=" | "," | ";" | "["))
    }

    /// Registers declarators in `[k, b)`; returns `(name, type, name_pos)` triples
    /// and pushes initializer regions as sites.
    fn declarators(&mut self, ty: &str, mut k: usize, b: usize, ctx: SiteContext, method: Option<usize>) -> Vec<(String, String, usize)> {
        let mut out = Vec::new();
        while k < b && self.is_ident(k) {
            let name_pos = k;
            let mut ty = ty.to_string();
            k += 1;
            while self.txt(k) == "[" && self.txt(k + 1) == "]" {
                ty.push_str("[]");
                k += 2;
            }
            out.push((self.txt(name_pos).to_string(), ty, name_pos));
            if k < b && self.txt(k) == "=" {
                let init_start = k + 1;
                let mut e = init_start;
                loop {
                    e = self.find_top(e, b, &[","]);
                    if e >= b || self.declarator_start(e + 1, b) {
                        break;
                    }
                    e += 1;
                }
                self.region(init_start, e, ctx, method);
                k = e;
            }
            if k < b && self.txt(k) == "," {
                k += 1;
            } else {
                break;
            }
        }
        out
    }

    fn add_locals(&mut self, method: Option<usize>, decls: Vec<(String, String, usize)>, scope_end_pos: usize, is_param: bool) {
        let Some(m) = method else { return };
        let scope_end = self.sig.get(scope_end_pos).copied().unwrap_or(self.tokens.len());
        for (name, ty, pos) in decls {
            self.methods[m].locals.push(VarDecl {
                name,
                declared_type: ty,
                decl_token: self.sig[pos],
                scope_end,
                is_param,
                decl_count_in_method: 0,
                positions: Vec::new(),
            });
        }
    }

    fn add_unit(&mut self, method: Option<usize>, a: usize, b: usize) {
        if let Some(m) = method {
            if a < b && b <= self.sig.len() {
                let start = self.sig[a];
                let end = self.sig[b - 1] + 1;
                self.methods[m].units.push((start, end));
            }
        }
    }

    /// Parses `[a, b)` as an expression and records it as a site.
    fn region(&mut self, a: usize, b: usize, ctx: SiteContext, method: Option<usize>) {
        if a >= b {
            return;
        }
        let start = self.sig[a];
        let end = self.sig[b - 1] + 1;
        let line_span = (self.tokens[start].line, self.tokens[end - 1].line);
        match parse_expression(self.tokens, start, end) {
            Ok(parsed) => {
                self.sites.push(ExprSite { tree: parsed.tree, start, end, line_span, context: ctx, method, opaque: false });
                for block in parsed.nested {
                    let open = self.pos_of[block.open];
                    let close = self.pos_of[block.close];
                    if block.class_body {
                        if let Some(m) = method {
                            self.methods[m].contains_nested_class = true;
                        }
                        self.members(open + 1, close, None, false);
                    } else {
                        self.block(open + 1, close, method);
                    }
                }
            }
            Err(_) => {
                let tree = ExprTree {
                    nodes: vec![ExprNode {
                        kind: NodeKind::Other,
                        op: None,
                        children: vec![],
                        start,
                        end,
                        type_tag: TypeTag::Unknown,
                    }],
                    root: 0,
                };
                self.sites.push(ExprSite { tree, start, end, line_span, context: ctx, method, opaque: true });
                if let Some(m) = method {
                    // Nested bodies we could not parse may still hide lambdas or classes.
                    let has_brace = (a..b).any(|j| self.txt(j) == "{");
                    if has_brace {
                        self.methods[m].contains_nested_class = true;
                    }
                }
            }
        }
    }

    fn type_keyword_at(&self, a: usize, b: usize) -> Option<usize> {
        (a..b).find(|&j| {
            matches!(self.txt(j), "class" | "interface" | "enum")
                || (self.txt(j) == "record" && self.is_ident(j + 1) && self.txt(j + 2) != "=")
        })
    }

    /// Class bodies and the compilation unit.
    fn members(&mut self, a: usize, b: usize, _outer: Option<usize>, is_enum: bool) {
        let mut j = a;
        if is_enum {
            // Skip enum constants, scanning any constant bodies.
            while j < b && self.txt(j) != ";" {
                match self.txt(j) {
                    "(" | "[" => j = self.close_of(j, b - 1) + 1,
                    "{" => {
                        let close = self.close_of(j, b - 1);
                        self.members(j + 1, close, None, false);
                        j = close + 1;
                    }
                    _ => j += 1,
                }
            }
            j += 1;
        }
        while j < b {
            match self.txt(j) {
                ";" => j += 1,
                "package" | "import" => j = self.find_top(j, b, &[";"]) + 1,
                "@" if self.txt(j + 1) != "interface" => j = self.skip_annotation(j, b),
                "{" => {
                    let close = self.close_of(j, b - 1);
                    self.block(j + 1, close, None);
                    j = close + 1;
                }
                _ => j = self.member(j, b),
            }
        }
    }

    fn member(&mut self, j: usize, b: usize) -> usize {
        let stop = self.find_top(j, b, &[";", "{", "="]);
        if stop >= b {
            return b;
        }
        // Type declarations.
        if self.txt(stop) == "{" {
            if let Some(kw) = self.type_keyword_at(j, stop) {
                let close = self.close_of(stop, b - 1);
                let is_enum = self.txt(kw) == "enum";
                self.members(stop + 1, close, None, is_enum);
                return close + 1;
            }
            // Methods and constructors: Ident ( params ) [throws ...] {
            if let Some(open) = (j..stop).find(|&k| self.txt(k) == "(") {
                if open > j && self.is_ident(open - 1) {
                    let close_paren = self.close_of(open, stop);
                    let body_close = self.close_of(stop, b - 1);
                    self.method(open - 1, open, close_paren, stop, body_close);
                    return body_close + 1;
                }
            }
            // Compact record constructor or initializer block.
            let body_close = self.close_of(stop, b - 1);
            if stop > j && self.is_ident(stop - 1) {
                self.method(stop - 1, stop, stop, stop, body_close);
            } else {
                self.block(stop + 1, body_close, None);
            }
            return body_close + 1;
        }
        // Fields (with or without initializers) and abstract methods.
        let end = self.find_top(j, b, &[";"]);
        if self.txt(stop) == ";" {
            if let Some(open) = (j..stop).find(|&k| self.txt(k) == "(") {
                if open > j && self.is_ident(open - 1) {
                    return end + 1;
                }
            }
        }
        if let Some((ty, k)) = self.declaration_head(j, end) {
            self.declarators(&ty, k, end, SiteContext::Field, None);
        }
        end + 1
    }

    fn method(&mut self, name_pos: usize, open: usize, close_paren: usize, body_open: usize, body_close: usize) {
        let id = self.methods.len();
        let span_start = self.sig[open];
        let span_end = self.sig.get(body_close).map_or(self.tokens.len(), |&i| i + 1);
        let contains_lambda = (open..=body_close.min(self.sig.len() - 1)).any(|j| matches!(self.txt(j), "->" | "::"));
        self.methods.push(MethodScope {
            name: self.txt(name_pos).to_string(),
            name_token: self.sig[name_pos],
            body_span: (span_start, span_end),
            locals: Vec::new(),
            contains_lambda,
            contains_nested_class: false,
            refs: Vec::new(),
            units: Vec::new(),
        });
        if close_paren > open {
            let params = self.parameters(open + 1, close_paren);
            self.add_locals(Some(id), params, body_close, true);
            self.add_unit(Some(id), open, close_paren + 1);
        }
        self.block(body_open + 1, body_close, Some(id));
    }

    fn parameters(&self, a: usize, b: usize) -> Vec<(String, String, usize)> {
        let mut out = Vec::new();
        let mut j = a;
        while j < b {
            // Split on commas outside angle brackets and parentheses.
            let mut depth: i32 = 0;
            let mut k = j;
            while k < b {
                match self.txt(k) {
                    "<" => depth += 1,
                    ">" => depth -= 1,
                    ">>" => depth -= 2,
                    ">>>" => depth -= 3,
                    "(" => {
                        k = self.close_of(k, b);
                    }
                    "," if depth <= 0 => break,
                    _ => {}
                }
                k += 1;
            }
            let p = self.skip_modifiers(j, k);
            if let Some((after, mut ty)) = self.parse_type(p, k) {
                if after < k && self.is_ident(after) {
                    let mut q = after + 1;
                    while self.txt(q) == "[" && self.txt(q + 1) == "]" && q < k {
                        ty.push_str("[]");
                        q += 2;
                    }
                    out.push((self.txt(after).to_string(), ty, after));
                }
            }
            j = k + 1;
        }
        out
    }

    /// End position (exclusive) of the statement starting at `j`.
    fn statement_end(&self, j: usize, b: usize) -> usize {
        if j >= b {
            return b;
        }
        match self.txt(j) {
            "{" => self.close_of(j, b - 1) + 1,
            "if" => {
                let close = self.close_of(j + 1, b - 1);
                let e = self.statement_end(close + 1, b);
                if self.txt(e) == "else" && e < b {
                    self.statement_end(e + 1, b)
                } else {
                    e
                }
            }
            "for" | "while" | "synchronized" | "switch" => {
                let close = self.close_of(j + 1, b - 1);
                self.statement_end(close + 1, b)
            }
            "do" => {
                let e = self.statement_end(j + 1, b);
                self.find_top(e, b, &[";"]) + 1
            }
            "try" => {
                let mut e = j + 1;
                if self.txt(e) == "(" {
                    e = self.close_of(e, b - 1) + 1;
                }
                e = self.statement_end(e, b);
                loop {
                    match self.txt(e) {
                        "catch" if e < b => {
                            let close = self.close_of(e + 1, b - 1);
                            e = self.statement_end(close + 1, b);
                        }
                        "finally" if e < b => e = self.statement_end(e + 1, b),
                        _ => return e,
                    }
                }
            }
            _ => (self.find_top(j, b, &[";"]) + 1).min(b),
        }
    }

    fn block(&mut self, a: usize, b: usize, method: Option<usize>) {
        let mut j = a;
        while j < b {
            j = self.statement(j, b, method).max(j + 1);
        }
    }

    fn statement(&mut self, j: usize, b: usize, method: Option<usize>) -> usize {
        let t = self.txt(j);
        match t {
            "{" => {
                let close = self.close_of(j, b - 1);
                self.block(j + 1, close, method);
                close + 1
            }
            ";" | "}" | "else" | "do" | "finally" => j + 1,
            "if" | "while" | "switch" | "synchronized" if self.txt(j + 1) == "(" => {
                let close = self.close_of(j + 1, b - 1);
                let ctx = match t {
                    "if" => SiteContext::If,
                    "while" => SiteContext::While,
                    "switch" => SiteContext::Switch,
                    _ => SiteContext::Synchronized,
                };
                self.region(j + 2, close, ctx, method);
                self.add_unit(method, j, close + 1);
                close + 1
            }
            "for" if self.txt(j + 1) == "(" => {
                let close = self.close_of(j + 1, b - 1);
                let body_end = self.statement_end(close + 1, b);
                self.for_header(j + 2, close, body_end, method);
                self.add_unit(method, j, close + 1);
                close + 1
            }
            "try" => {
                if self.txt(j + 1) == "(" {
                    let close = self.close_of(j + 1, b - 1);
                    let block_close = if self.txt(close + 1) == "{" { self.close_of(close + 1, b - 1) } else { close };
                    let mut k = j + 2;
                    while k < close {
                        let e = self.find_top(k, close, &[";"]);
                        match self.declaration_head(k, e) {
                            Some((ty, name)) => {
                                let decls = self.declarators(&ty, name, e, SiteContext::Resource, method);
                                self.add_locals(method, decls, block_close, false);
                            }
                            None => self.region(k, e, SiteContext::Resource, method),
                        }
                        k = e + 1;
                    }
                    self.add_unit(method, j, close + 1);
                    close + 1
                } else {
                    j + 1
                }
            }
            "catch" if self.txt(j + 1) == "(" => {
                let close = self.close_of(j + 1, b - 1);
                let block_close = if self.txt(close + 1) == "{" { self.close_of(close + 1, b - 1) } else { close };
                // catch (A | B e)
                let name = close - 1;
                if name > j + 2 && self.is_ident(name) {
                    let ty: String = (j + 2..name).map(|k| self.txt(k)).filter(|s| *s != "final").collect();
                    self.add_locals(method, vec![(self.txt(name).to_string(), ty, name)], block_close, false);
                }
                self.add_unit(method, j, close + 1);
                close + 1
            }
            "return" | "throw" => {
                let end = self.find_top(j + 1, b, &[";"]);
                let ctx = if t == "return" { SiteContext::Return } else { SiteContext::Throw };
                self.region(j + 1, end, ctx, method);
                self.add_unit(method, j, (end + 1).min(b));
                end + 1
            }
            "yield" if !matches!(self.txt(j + 1), "=" | "." | "(" | "[" | "++" | "--") => {
                let end = self.find_top(j + 1, b, &[";"]);
                self.region(j + 1, end, SiteContext::Yield, method);
                self.add_unit(method, j, (end + 1).min(b));
                end + 1
            }
            "assert" => {
                let end = self.find_top(j + 1, b, &[";"]);
                let colon = self.top_level_colon(j + 1, end);
                self.region(j + 1, colon, SiteContext::Assert, method);
                if colon < end {
                    self.region(colon + 1, end, SiteContext::Assert, method);
                }
                self.add_unit(method, j, (end + 1).min(b));
                end + 1
            }
            "case" => {
                let mut k = j + 1;
                let mut questions = 0usize;
                while k < b {
                    match self.txt(k) {
                        "?" => questions += 1,
                        ":" if questions == 0 => break,
                        ":" => questions -= 1,
                        "->" => break,
                        "(" | "[" | "{" => {
                            k = self.close_of(k, b - 1);
                        }
                        _ => {}
                    }
                    k += 1;
                }
                for p in j + 1..k {
                    self.case_label_tokens.insert(self.sig[p]);
                }
                k + 1
            }
            "default" if matches!(self.txt(j + 1), ":" | "->") => j + 2,
            "break" | "continue" => self.find_top(j + 1, b, &[";"]) + 1,
            _ if self.is_ident(j) && self.txt(j + 1) == ":" => j + 2,
            _ => {
                let stop = self.find_top(j, b, &[";", "{"]);
                if stop < b && self.txt(stop) == "{" {
                    if let Some(kw) = self.type_keyword_at(j, stop) {
                        let _ = kw;
                        let close = self.close_of(stop, b - 1);
                        if let Some(m) = method {
                            self.methods[m].contains_nested_class = true;
                        }
                        let is_enum = (j..stop).any(|k| self.txt(k) == "enum");
                        self.members(stop + 1, close, None, is_enum);
                        return close + 1;
                    }
                }
                let end = self.find_top(j, b, &[";"]);
                match self.declaration_head(j, end) {
                    Some((ty, name)) => {
                        let decls = self.declarators(&ty, name, end, SiteContext::Declaration, method);
                        self.add_locals(method, decls, b, false);
                    }
                    None => self.region(j, end, SiteContext::Expression, method),
                }
                self.add_unit(method, j, (end + 1).min(b));
                end + 1
            }
        }
    }

    fn top_level_colon(&self, a: usize, b: usize) -> usize {
        let mut questions = 0usize;
        let mut k = a;
        while k < b {
            match self.txt(k) {
                "?" => questions += 1,
                ":" if questions == 0 => return k,
                ":" => questions -= 1,
                "(" | "[" | "{" => k = self.close_of(k, b - 1),
                _ => {}
            }
            k += 1;
        }
        b
    }

    fn for_header(&mut self, a: usize, b: usize, body_end: usize, method: Option<usize>) {
        let first_semi = self.find_top(a, b, &[";"]);
        if first_semi >= b {
            // Enhanced for: `T x : expr`.
            let colon = self.top_level_colon(a, b);
            if let Some((ty, name)) = self.declaration_head(a, colon) {
                let decls = self.declarators(&ty, name, colon, SiteContext::ForEach, method);
                self.add_locals(method, decls, body_end, false);
            }
            if colon < b {
                self.region(colon + 1, b, SiteContext::ForEach, method);
            }
            return;
        }
        match self.declaration_head(a, first_semi) {
            Some((ty, name)) => {
                let decls = self.declarators(&ty, name, first_semi, SiteContext::ForInit, method);
                self.add_locals(method, decls, body_end, false);
            }
            None => self.expression_list(a, first_semi, SiteContext::ForInit, method),
        }
        let second = self.find_top(first_semi + 1, b, &[";"]);
        self.region(first_semi + 1, second, SiteContext::ForCond, method);
        if second < b {
            self.expression_list(second + 1, b, SiteContext::ForUpdate, method);
        }
    }

    fn expression_list(&mut self, a: usize, b: usize, ctx: SiteContext, method: Option<usize>) {
        let mut k = a;
        while k < b {
            let e = self.find_top(k, b, &[","]);
            self.region(k, e, ctx, method);
            k = e + 1;
        }
    }

    fn resolve_methods(&mut self) {
        for m in 0..self.methods.len() {
            let (start, end) = self.methods[m].body_span;
            let mut counts: HashMap<String, usize> = HashMap::new();
            for d in &self.methods[m].locals {
                *counts.entry(d.name.clone()).or_default() += 1;
            }
            let mut refs = Vec::new();
            for i in start..end.min(self.tokens.len()) {
                let tok = &self.tokens[i];
                if tok.kind != TokenKind::Identifier || self.case_label_tokens.contains(&i) {
                    continue;
                }
                let j = self.pos_of[i];
                if j > 0 && matches!(self.txt(j - 1), "." | "@" | "::") {
                    continue;
                }
                if self.txt(j + 1) == "(" {
                    continue;
                }
                let target = resolve_in(&self.methods[m].locals, i, &tok.text);
                refs.push((i, target));
            }
            let method = &mut self.methods[m];
            for d in &mut method.locals {
                d.decl_count_in_method = counts[&d.name];
                d.positions.clear();
            }
            for &(i, target) in &refs {
                if let Some(d) = target {
                    method.locals[d].positions.push(i);
                }
            }
            method.refs = refs;
        }
    }

    fn type_sites(&mut self) {
        let methods = &self.methods;
        let tokens = self.tokens;
        for site in &mut self.sites {
            if site.opaque {
                continue;
            }
            let scope = site.method.map(|m| &methods[m]);
            assign_types(&mut site.tree, tokens, scope);
        }
    }
}

/// Local, declaration-based typing. Anything not provable from the token
/// itself or an enclosing local declaration is `Unknown`.
pub fn assign_types(tree: &mut ExprTree, tokens: &[Token], scope: Option<&MethodScope>) {
    let order = tree.preorder();
    for &id in order.iter().rev() {
        let node = &tree.nodes[id];
        let child_types: Vec<TypeTag> = node.children.iter().map(|&c| tree.nodes[c].type_tag).collect();
        let tag = match node.kind {
            NodeKind::Literal => literal_type(&tokens[node.start]),
            NodeKind::Name => {
                let tok = &tokens[node.start];
                scope
                    .and_then(|m| m.resolve(node.start, &tok.text).map(|d| m.locals[d].type_tag()))
                    .unwrap_or(TypeTag::Unknown)
            }
            NodeKind::Paren => child_types[0],
            NodeKind::Unary => {
                let t = child_types[0];
                match node.op.as_deref() {
                    Some("!") if t == TypeTag::Boolean => TypeTag::Boolean,
                    Some("-" | "+") if t.is_numeric() => TypeTag::promote(t, TypeTag::Int),
                    Some("~") if t.is_integral() => TypeTag::promote(t, TypeTag::Int),
                    Some("++" | "--") if t.is_numeric() => t,
                    _ => TypeTag::Unknown,
                }
            }
            NodeKind::Cast => {
                // The cast type is the first significant token after `(`.
                let ty = tokens[node.start + 1..].iter().find(|t| !t.kind.is_trivia()).map(|t| t.text.as_str());
                let closes = tokens[node.start + 1..tree.nodes[node.children[0]].start]
                    .iter()
                    .filter(|t| !t.kind.is_trivia())
                    .count();
                if closes == 2 {
                    ty.map_or(TypeTag::Unknown, TypeTag::from_declared)
                } else {
                    TypeTag::Unknown
                }
            }
            NodeKind::Infix => infix_type(node.op.as_deref().unwrap_or(""), &child_types),
            _ => TypeTag::Unknown,
        };
        tree.nodes[id].type_tag = tag;
    }
}

pub fn literal_type(tok: &Token) -> TypeTag {
    let last = tok.text.chars().last().unwrap_or(' ');
    match tok.kind {
        TokenKind::IntLiteral if matches!(last, 'l' | 'L') => TypeTag::Long,
        TokenKind::IntLiteral => TypeTag::Int,
        TokenKind::FloatLiteral if matches!(last, 'f' | 'F') => TypeTag::Float,
        TokenKind::FloatLiteral => TypeTag::Double,
        TokenKind::StringLiteral => TypeTag::String,
        TokenKind::BoolLiteral => TypeTag::Boolean,
        _ => TypeTag::Unknown,
    }
}

fn infix_type(op: &str, children: &[TypeTag]) -> TypeTag {
    use super::expr::{is_assignment_op, is_relational_op};
    if is_assignment_op(op) {
        return children[0];
    }
    if is_relational_op(op) || op == "&&" || op == "||" {
        return TypeTag::Boolean;
    }
    let fold = |f: &dyn Fn(TypeTag, TypeTag) -> TypeTag| children[1..].iter().fold(children[0], |acc, &t| f(acc, t));
    match op {
        "+" if children.contains(&TypeTag::String) => {
            // Left-to-right: once a String appears the rest is concatenation, but an
            // unknown operand before it leaves the result unknown.
            let mut acc = children[0];
            for &t in &children[1..] {
                acc = if acc == TypeTag::String || t == TypeTag::String {
                    if acc == TypeTag::Unknown { TypeTag::Unknown } else { TypeTag::String }
                } else {
                    TypeTag::promote(acc, t)
                };
            }
            acc
        }
        "+" | "-" | "*" | "/" | "%" => fold(&TypeTag::promote),
        "<<" | ">>" | ">>>" => {
            if children.iter().all(|t| t.is_integral()) {
                TypeTag::promote(children[0], TypeTag::Int)
            } else {
                TypeTag::Unknown
            }
        }
        "&" | "|" | "^" => {
            if children.iter().all(|&t| t == TypeTag::Boolean) {
                TypeTag::Boolean
            } else if children.iter().all(|t| t.is_integral()) {
                fold(&TypeTag::promote)
            } else {
                TypeTag::Unknown
            }
        }
        _ => TypeTag::Unknown,
    }
}
