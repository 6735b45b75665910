//! Expression trees and a Pratt parser for the Java expression subset.
//!
//! Nodes refer to half-open token ranges of the file they came from, so a tree
//! can always be rendered back to its exact source slice. Infix chains of one
//! operator are flattened (`a + b + c` is one node with three operands).

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use super::lexer::{Token, TokenKind, PRIMITIVE_TYPES};

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Infix,
    Paren,
    Literal,
    Name,
    Call,
    Index,
    FieldAccess,
    Unary,
    Cast,
    Other,
}

impl NodeKind {
    pub fn name(self) -> &'static str {
        match self {
            NodeKind::Infix => "infix",
            NodeKind::Paren => "paren",
            NodeKind::Literal => "literal",
            NodeKind::Name => "name",
            NodeKind::Call => "call",
            NodeKind::Index => "index",
            NodeKind::FieldAccess => "field_access",
            NodeKind::Unary => "unary",
            NodeKind::Cast => "cast",
            NodeKind::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TypeTag {
    Int,
    Long,
    Float,
    Double,
    Boolean,
    String,
    #[default]
    Unknown,
}

impl TypeTag {
    pub fn is_numeric(self) -> bool {
        matches!(self, TypeTag::Int | TypeTag::Long | TypeTag::Float | TypeTag::Double)
    }

    pub fn is_integral(self) -> bool {
        matches!(self, TypeTag::Int | TypeTag::Long)
    }

    pub fn from_declared(ty: &str) -> TypeTag {
        match ty {
            "int" => TypeTag::Int,
            "long" => TypeTag::Long,
            "float" => TypeTag::Float,
            "double" => TypeTag::Double,
            "boolean" => TypeTag::Boolean,
            "String" => TypeTag::String,
            _ => TypeTag::Unknown,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TypeTag::Int => "int",
            TypeTag::Long => "long",
            TypeTag::Float => "float",
            TypeTag::Double => "double",
            TypeTag::Boolean => "boolean",
            TypeTag::String => "string",
            TypeTag::Unknown => "unknown",
        }
    }

    /// Binary numeric promotion.
    pub fn promote(a: TypeTag, b: TypeTag) -> TypeTag {
        use TypeTag::*;
        match (a, b) {
            (Double, x) | (x, Double) if x.is_numeric() => Double,
            (Float, x) | (x, Float) if x.is_numeric() => Float,
            (Long, x) | (x, Long) if x.is_numeric() => Long,
            (Int, Int) => Int,
            _ => Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExprNode {
    pub kind: NodeKind,
    pub op: Option<String>,
    pub children: Vec<NodeId>,
    /// First token index (into the file's token vector).
    pub start: usize,
    /// One past the last token index.
    pub end: usize,
    pub type_tag: TypeTag,
}

/// A block nested inside an expression (anonymous class body, lambda body,
/// switch expression) whose statements should be scanned separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NestedBlock {
    /// Token index of `{`.
    pub open: usize,
    /// Token index of the matching `}`.
    pub close: usize,
    pub class_body: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExprTree {
    pub nodes: Vec<ExprNode>,
    pub root: NodeId,
}

pub fn is_assignment_op(op: &str) -> bool {
    matches!(op, "=" | "+=" | "-=" | "*=" | "/=" | "%=" | "&=" | "|=" | "^=" | "<<=" | ">>=" | ">>>=")
}

pub fn is_relational_op(op: &str) -> bool {
    matches!(op, "==" | "!=" | "<" | "<=" | ">" | ">=")
}

/// Binding power of binary operators; higher binds tighter.
pub fn binary_precedence(op: &str) -> Option<u8> {
    Some(match op {
        o if is_assignment_op(o) => 1,
        "?" => 2,
        "||" => 3,
        "&&" => 4,
        "|" => 5,
        "^" => 6,
        "&" => 7,
        "==" | "!=" => 8,
        "<" | ">" | "<=" | ">=" | "instanceof" => 9,
        "<<" | ">>" | ">>>" => 10,
        "+" | "-" => 11,
        "*" | "/" | "%" => 12,
        _ => return None,
    })
}

fn flattens(op: &str) -> bool {
    !is_assignment_op(op) && !is_relational_op(op)
}

impl ExprTree {
    pub fn node(&self, id: NodeId) -> &ExprNode {
        &self.nodes[id]
    }

    pub fn root_node(&self) -> &ExprNode {
        &self.nodes[self.root]
    }

    /// Parent of every node (`None` for the root).
    pub fn parents(&self) -> Vec<Option<NodeId>> {
        let mut parents = vec![None; self.nodes.len()];
        for (id, n) in self.nodes.iter().enumerate() {
            for &c in &n.children {
                parents[c] = Some(id);
            }
        }
        parents
    }

    /// Node ids in pre-order.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.nodes[id].children.iter().rev());
        }
        out
    }

    pub fn descendants(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }

    /// Source text of a node taken straight from the token range.
    pub fn text(&self, id: NodeId, tokens: &[Token]) -> String {
        let n = &self.nodes[id];
        tokens[n.start..n.end].iter().map(|t| t.text.as_str()).collect()
    }

    /// Recursive rendering: the tokens between children interleaved with the
    /// children's own renderings. Equals [`ExprTree::text`] for well-formed trees.
    pub fn render(&self, id: NodeId, tokens: &[Token]) -> String {
        let mut out = String::new();
        self.render_into(id, tokens, &mut out);
        out
    }

    fn render_into(&self, id: NodeId, tokens: &[Token], out: &mut String) {
        let n = &self.nodes[id];
        let mut at = n.start;
        for &c in &n.children {
            let child = &self.nodes[c];
            for t in &tokens[at..child.start] {
                out.push_str(&t.text);
            }
            self.render_into(c, tokens, out);
            at = child.end;
        }
        for t in &tokens[at..n.end] {
            out.push_str(&t.text);
        }
    }

    /// Structural fingerprint used for tree-equivalence checks. Flattened infix
    /// chains are rendered left-nested so `(a + b) + c` and `a + b + c` agree
    /// once parentheses are erased.
    pub fn canonical(&self, tokens: &[Token], erase_parens: bool) -> String {
        let mut out = String::new();
        self.canonical_into(self.root, tokens, erase_parens, &mut out);
        out
    }

    pub fn canonical_of(&self, id: NodeId, tokens: &[Token], erase_parens: bool) -> String {
        let mut out = String::new();
        self.canonical_into(id, tokens, erase_parens, &mut out);
        out
    }

    fn canonical_into(&self, id: NodeId, tokens: &[Token], erase: bool, out: &mut String) {
        let n = &self.nodes[id];
        match n.kind {
            NodeKind::Paren if erase => self.canonical_into(n.children[0], tokens, erase, out),
            NodeKind::Infix => {
                let op = n.op.as_deref().unwrap_or("?");
                let k = n.children.len();
                for _ in 1..k {
                    let _ = write!(out, "({op} ");
                }
                self.canonical_into(n.children[0], tokens, erase, out);
                for &c in &n.children[1..] {
                    out.push(' ');
                    self.canonical_into(c, tokens, erase, out);
                    out.push(')');
                }
            }
            _ => {
                let _ = write!(out, "({}", n.kind.name());
                let mut at = n.start;
                for &c in &n.children {
                    push_significant(&tokens[at..self.nodes[c].start], out);
                    out.push(' ');
                    self.canonical_into(c, tokens, erase, out);
                    at = self.nodes[c].end;
                }
                push_significant(&tokens[at..n.end], out);
                out.push(')');
            }
        }
    }

    /// Indented debug dump, one node per line.
    pub fn dump(&self, tokens: &[Token]) -> String {
        let mut out = String::new();
        self.dump_into(self.root, tokens, 0, &mut out);
        out
    }

    fn dump_into(&self, id: NodeId, tokens: &[Token], depth: usize, out: &mut String) {
        let n = &self.nodes[id];
        let _ = write!(out, "{:indent$}{}", "", n.kind.name(), indent = depth * 2);
        if let Some(op) = &n.op {
            let _ = write!(out, " {op}");
        }
        let _ = write!(out, " : {}", n.type_tag.name());
        if n.children.is_empty() {
            let _ = write!(out, " `{}`", self.text(id, tokens).trim());
        }
        out.push('\n');
        for &c in &n.children {
            self.dump_into(c, tokens, depth + 1, out);
        }
    }
}

fn push_significant(tokens: &[Token], out: &mut String) {
    for t in tokens.iter().filter(|t| !t.kind.is_trivia()) {
        out.push(' ');
        out.push_str(&t.text);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseFailure {
    /// Token index where parsing stopped.
    pub at: usize,
    pub reason: &'static str,
}

type PResult<T> = Result<T, ParseFailure>;

/// Output of parsing one expression region.
#[derive(Debug, Clone)]
pub struct ParsedExpr {
    pub tree: ExprTree,
    pub nested: Vec<NestedBlock>,
}

/// Parses the significant tokens in `tokens[start..end]` as a single
/// expression. The whole range must be consumed.
pub fn parse_expression(tokens: &[Token], start: usize, end: usize) -> PResult<ParsedExpr> {
    let sig: Vec<usize> = (start..end).filter(|&i| !tokens[i].kind.is_trivia()).collect();
    if sig.is_empty() {
        return Err(ParseFailure { at: start, reason: "empty expression" });
    }
    let mut p = Parser { tokens, sig, pos: 0, nodes: Vec::new(), nested: Vec::new() };
    let root = p.expr(0)?;
    if p.pos != p.sig.len() {
        return Err(ParseFailure { at: p.sig[p.pos], reason: "trailing tokens" });
    }
    Ok(ParsedExpr { tree: ExprTree { nodes: p.nodes, root }, nested: p.nested })
}

/// Convenience wrapper: tokenizes `src` and parses all of it as one expression.
pub fn parse_str(src: &str) -> Option<(Vec<Token>, ExprTree)> {
    let tokens = super::lexer::tokenize(src).ok()?;
    let n = tokens.len();
    let parsed = parse_expression(&tokens, 0, n).ok()?;
    Some((tokens, parsed.tree))
}

struct Parser<'a> {
    tokens: &'a [Token],
    sig: Vec<usize>,
    pos: usize,
    nodes: Vec<ExprNode>,
    nested: Vec<NestedBlock>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.sig.get(self.pos).map(|&i| &self.tokens[i])
    }

    fn peek_at(&self, n: usize) -> Option<&'a Token> {
        self.sig.get(self.pos + n).map(|&i| &self.tokens[i])
    }

    fn peek_text(&self) -> Option<&'a str> {
        self.peek().map(|t| t.text.as_str())
    }

    fn tok_index(&self) -> usize {
        self.sig.get(self.pos).copied().unwrap_or_else(|| self.sig.last().map_or(0, |&i| i + 1))
    }

    /// Token index one past the previously consumed significant token.
    fn prev_end(&self) -> usize {
        self.sig[self.pos - 1] + 1
    }

    fn fail<T>(&self, reason: &'static str) -> PResult<T> {
        Err(ParseFailure { at: self.tok_index(), reason })
    }

    fn expect(&mut self, text: &str) -> PResult<()> {
        if self.peek_text() == Some(text) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail("unexpected token")
        }
    }

    fn push(&mut self, kind: NodeKind, op: Option<&str>, children: Vec<NodeId>, start: usize, end: usize) -> NodeId {
        self.nodes.push(ExprNode {
            kind,
            op: op.map(str::to_string),
            children,
            start,
            end,
            type_tag: TypeTag::Unknown,
        });
        self.nodes.len() - 1
    }

    fn expr(&mut self, min_bp: u8) -> PResult<NodeId> {
        let mut lhs = self.prefix()?;
        while let Some(tok) = self.peek() {
            let op = tok.text.as_str();
            if tok.kind != TokenKind::Operator && op != "instanceof" {
                break;
            }
            let Some(bp) = binary_precedence(op) else { break };
            if bp < min_bp {
                break;
            }
            let start = self.nodes[lhs].start;
            if op == "?" {
                self.pos += 1;
                let then = self.expr(1)?;
                self.expect(":")?;
                let otherwise = self.expr(2)?;
                let end = self.nodes[otherwise].end;
                lhs = self.push(NodeKind::Other, Some("?:"), vec![lhs, then, otherwise], start, end);
                continue;
            }
            if op == "instanceof" {
                self.pos += 1;
                if self.peek_text() == Some("final") {
                    self.pos += 1;
                }
                self.skip_type()?;
                // Pattern variable (`x instanceof Foo f`).
                if self.peek().is_some_and(|t| t.kind == TokenKind::Identifier) {
                    self.pos += 1;
                }
                let end = self.prev_end();
                lhs = self.push(NodeKind::Other, Some("instanceof"), vec![lhs], start, end);
                continue;
            }
            self.pos += 1;
            let op = op.to_string();
            if is_assignment_op(&op) {
                // Right associative.
                let rhs = self.expr(bp)?;
                let end = self.nodes[rhs].end;
                lhs = self.push(NodeKind::Infix, Some(&op), vec![lhs, rhs], start, end);
                continue;
            }
            let rhs = self.expr(bp + 1)?;
            let end = self.nodes[rhs].end;
            let extend = flattens(&op)
                && self.nodes[lhs].kind == NodeKind::Infix
                && self.nodes[lhs].op.as_deref() == Some(op.as_str());
            if extend {
                let node = &mut self.nodes[lhs];
                node.children.push(rhs);
                node.end = end;
            } else {
                lhs = self.push(NodeKind::Infix, Some(&op), vec![lhs, rhs], start, end);
            }
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> PResult<NodeId> {
        let Some(tok) = self.peek() else { return self.fail("unexpected end") };
        let start = self.sig[self.pos];
        match tok.text.as_str() {
            "+" | "-" | "!" | "~" | "++" | "--" if tok.kind == TokenKind::Operator => {
                let op = tok.text.clone();
                self.pos += 1;
                let operand = self.expr(13)?;
                let end = self.nodes[operand].end;
                Ok(self.push(NodeKind::Unary, Some(&op), vec![operand], start, end))
            }
            "(" => {
                if let Some(lambda) = self.try_lambda()? {
                    return Ok(lambda);
                }
                if let Some(cast) = self.try_cast()? {
                    return Ok(cast);
                }
                self.pos += 1;
                let inner = self.expr(0)?;
                self.expect(")")?;
                let end = self.prev_end();
                let paren = self.push(NodeKind::Paren, None, vec![inner], start, end);
                self.postfix(paren)
            }
            _ => {
                let primary = self.primary()?;
                self.postfix(primary)
            }
        }
    }

    fn primary(&mut self) -> PResult<NodeId> {
        let tok = self.peek().ok_or(ParseFailure { at: self.tok_index(), reason: "unexpected end" })?;
        let start = self.sig[self.pos];
        match tok.kind {
            k if k.is_literal() => {
                self.pos += 1;
                Ok(self.push(NodeKind::Literal, None, vec![], start, start + 1))
            }
            TokenKind::Identifier => {
                if self.peek_at(1).is_some_and(|t| t.text == "->") {
                    self.pos += 2;
                    return self.lambda_body(start);
                }
                self.pos += 1;
                Ok(self.push(NodeKind::Name, None, vec![], start, start + 1))
            }
            TokenKind::Keyword => match tok.text.as_str() {
                "this" | "super" => {
                    self.pos += 1;
                    Ok(self.push(NodeKind::Name, None, vec![], start, start + 1))
                }
                "new" => self.creation(),
                "switch" => self.switch_expression(),
                p if PRIMITIVE_TYPES.contains(&p) || p == "void" => {
                    // `int.class`, `int[].class`, `int[]::new`
                    self.pos += 1;
                    while self.peek_text() == Some("[") && self.peek_at(1).is_some_and(|t| t.text == "]") {
                        self.pos += 2;
                    }
                    if self.peek_text() == Some(".") && self.peek_at(1).is_some_and(|t| t.text == "class") {
                        self.pos += 2;
                        let end = self.prev_end();
                        return Ok(self.push(NodeKind::FieldAccess, None, vec![], start, end));
                    }
                    if self.peek_text() == Some("::") {
                        return self.method_ref(start, vec![]);
                    }
                    self.fail("primitive type in expression")
                }
                _ => self.fail("unsupported keyword"),
            },
            TokenKind::Separator if tok.text == "{" => self.array_initializer(),
            TokenKind::Separator if tok.text == "@" => self.fail("annotation in expression"),
            _ => self.fail("unexpected token"),
        }
    }

    fn postfix(&mut self, mut node: NodeId) -> PResult<NodeId> {
        while let Some(tok) = self.peek() {
            let start = self.nodes[node].start;
            match tok.text.as_str() {
                "." => {
                    self.pos += 1;
                    if self.peek_text() == Some("<") {
                        self.skip_angles()?;
                    }
                    let Some(name) = self.peek() else { return self.fail("dangling dot") };
                    let ok = name.kind == TokenKind::Identifier
                        || matches!(name.text.as_str(), "class" | "this" | "super" | "new");
                    if !ok {
                        return self.fail("bad member name");
                    }
                    if name.text == "new" {
                        // Qualified inner class creation: outer.new Inner()
                        let created = self.creation()?;
                        let end = self.nodes[created].end;
                        node = self.push(NodeKind::Other, Some("new"), vec![node, created], start, end);
                        continue;
                    }
                    self.pos += 1;
                    if self.peek_text() == Some("(") {
                        let mut children = vec![node];
                        children.extend(self.arguments()?);
                        let end = self.prev_end();
                        node = self.push(NodeKind::Call, None, children, start, end);
                    } else {
                        let end = self.prev_end();
                        node = self.push(NodeKind::FieldAccess, None, vec![node], start, end);
                    }
                }
                "(" if self.nodes[node].kind == NodeKind::Name => {
                    // Unqualified call: the name itself is the callee, not an operand.
                    let children = self.arguments()?;
                    let end = self.prev_end();
                    if node + 1 == self.nodes.len() {
                        self.nodes.pop();
                    }
                    node = self.push(NodeKind::Call, None, children, start, end);
                }
                "[" => {
                    if self.peek_at(1).is_some_and(|t| t.text == "]") {
                        // Array type in a method reference or class literal: `String[]::new`
                        return self.fail("array type in expression");
                    }
                    self.pos += 1;
                    let index = self.expr(0)?;
                    self.expect("]")?;
                    let end = self.prev_end();
                    node = self.push(NodeKind::Index, None, vec![node, index], start, end);
                }
                "++" | "--" => {
                    let op = tok.text.clone();
                    self.pos += 1;
                    let end = self.prev_end();
                    node = self.push(NodeKind::Unary, Some(&op), vec![node], start, end);
                }
                "::" => {
                    node = self.method_ref(start, vec![node])?;
                }
                _ => break,
            }
        }
        Ok(node)
    }

    fn method_ref(&mut self, start: usize, children: Vec<NodeId>) -> PResult<NodeId> {
        self.expect("::")?;
        if self.peek_text() == Some("<") {
            self.skip_angles()?;
        }
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier || t.text == "new" => self.pos += 1,
            _ => return self.fail("bad method reference"),
        }
        let end = self.prev_end();
        Ok(self.push(NodeKind::Other, Some("::"), children, start, end))
    }

    fn arguments(&mut self) -> PResult<Vec<NodeId>> {
        self.expect("(")?;
        let mut args = Vec::new();
        if self.peek_text() == Some(")") {
            self.pos += 1;
            return Ok(args);
        }
        loop {
            args.push(self.expr(0)?);
            match self.peek_text() {
                Some(",") => self.pos += 1,
                Some(")") => {
                    self.pos += 1;
                    return Ok(args);
                }
                _ => return self.fail("bad argument list"),
            }
        }
    }

    fn creation(&mut self) -> PResult<NodeId> {
        let start = self.sig[self.pos];
        self.expect("new")?;
        if self.peek_text() == Some("<") {
            self.skip_angles()?;
        }
        // Type name: primitive or dotted identifier with optional type arguments.
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier || PRIMITIVE_TYPES.contains(&t.text.as_str()) => {
                self.pos += 1
            }
            _ => return self.fail("bad type in creation"),
        }
        loop {
            while self.peek_text() == Some("@") {
                self.skip_annotation()?;
            }
            match self.peek_text() {
                Some("<") => self.skip_angles()?,
                Some(".") if self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Identifier) => self.pos += 2,
                _ => break,
            }
        }
        match self.peek_text() {
            Some("(") => {
                let args = self.arguments()?;
                if self.peek_text() == Some("{") {
                    let open = self.sig[self.pos];
                    let close = self.skip_braces()?;
                    self.nested.push(NestedBlock { open, close, class_body: true });
                    let end = self.prev_end();
                    return Ok(self.push(NodeKind::Other, Some("new"), args, start, end));
                }
                let end = self.prev_end();
                Ok(self.push(NodeKind::Call, Some("new"), args, start, end))
            }
            Some("[") => {
                let mut dims = Vec::new();
                while self.peek_text() == Some("[") {
                    self.pos += 1;
                    if self.peek_text() == Some("]") {
                        self.pos += 1;
                        continue;
                    }
                    dims.push(self.expr(0)?);
                    self.expect("]")?;
                }
                if self.peek_text() == Some("{") {
                    let init = self.array_initializer()?;
                    dims.push(init);
                }
                let end = self.prev_end();
                Ok(self.push(NodeKind::Other, Some("new[]"), dims, start, end))
            }
            _ => self.fail("bad creation"),
        }
    }

    fn array_initializer(&mut self) -> PResult<NodeId> {
        let start = self.sig[self.pos];
        self.expect("{")?;
        let mut items = Vec::new();
        loop {
            if self.peek_text() == Some("}") {
                self.pos += 1;
                break;
            }
            items.push(self.expr(0)?);
            match self.peek_text() {
                Some(",") => self.pos += 1,
                Some("}") => {}
                _ => return self.fail("bad array initializer"),
            }
        }
        let end = self.prev_end();
        Ok(self.push(NodeKind::Other, Some("{}"), items, start, end))
    }

    fn switch_expression(&mut self) -> PResult<NodeId> {
        let start = self.sig[self.pos];
        self.expect("switch")?;
        self.expect("(")?;
        let selector = self.expr(0)?;
        self.expect(")")?;
        let open = self.sig[self.pos];
        let close = self.skip_braces()?;
        self.nested.push(NestedBlock { open, close, class_body: false });
        let end = self.prev_end();
        Ok(self.push(NodeKind::Other, Some("switch"), vec![selector], start, end))
    }

    /// Consumes a balanced `{ ... }` and returns the token index of `}`.
    fn skip_braces(&mut self) -> PResult<usize> {
        self.expect("{")?;
        let mut depth = 1usize;
        while let Some(t) = self.peek() {
            self.pos += 1;
            match t.text.as_str() {
                "{" => depth += 1,
                "}" => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(self.sig[self.pos - 1]);
                    }
                }
                _ => {}
            }
        }
        self.fail("unbalanced braces")
    }

    /// Consumes a balanced `< ... >` type-argument list, counting `>>` and
    /// `>>>` as several closers.
    fn skip_angles(&mut self) -> PResult<()> {
        self.expect("<")?;
        let mut depth: i32 = 1;
        while let Some(t) = self.peek() {
            match t.text.as_str() {
                "<" => depth += 1,
                ">" => depth -= 1,
                ">>" => depth -= 2,
                ">>>" => depth -= 3,
                "?" | "," | "." | "&" | "[" | "]" | "extends" | "super" | "@" => {}
                _ if t.kind == TokenKind::Identifier || PRIMITIVE_TYPES.contains(&t.text.as_str()) => {}
                _ => return self.fail("bad type arguments"),
            }
            self.pos += 1;
            if depth == 0 {
                return Ok(());
            }
            if depth < 0 {
                return self.fail("unbalanced type arguments");
            }
        }
        self.fail("unterminated type arguments")
    }

    fn skip_annotation(&mut self) -> PResult<()> {
        self.expect("@")?;
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier => self.pos += 1,
            _ => return self.fail("bad annotation"),
        }
        while self.peek_text() == Some(".") {
            self.pos += 2;
        }
        if self.peek_text() == Some("(") {
            let mut depth = 0usize;
            while let Some(t) = self.peek() {
                self.pos += 1;
                match t.text.as_str() {
                    "(" => depth += 1,
                    ")" => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    /// Type syntax: primitive or dotted name, type arguments, array dims.
    fn skip_type(&mut self) -> PResult<()> {
        while self.peek_text() == Some("@") {
            self.skip_annotation()?;
        }
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier || PRIMITIVE_TYPES.contains(&t.text.as_str()) => {
                self.pos += 1
            }
            _ => return self.fail("expected type"),
        }
        loop {
            match self.peek_text() {
                Some("<") => self.skip_angles()?,
                Some(".") if self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Identifier) => self.pos += 2,
                Some("[") if self.peek_at(1).is_some_and(|t| t.text == "]") => self.pos += 2,
                _ => return Ok(()),
            }
        }
    }

    /// `(` at the cursor: is this `(T) operand`? Restores the cursor if not.
    fn try_cast(&mut self) -> PResult<Option<NodeId>> {
        let save = self.pos;
        let start = self.sig[self.pos];
        self.pos += 1;
        let primitive = self.peek().is_some_and(|t| PRIMITIVE_TYPES.contains(&t.text.as_str()));
        let ok_type = self.skip_type().is_ok();
        // Intersection casts `(A & B)`.
        let mut ok_type = ok_type;
        while ok_type && self.peek_text() == Some("&") && !primitive {
            self.pos += 1;
            ok_type = self.skip_type().is_ok();
        }
        if !ok_type || self.peek_text() != Some(")") {
            self.pos = save;
            return Ok(None);
        }
        let type_end = self.pos;
        self.pos += 1;
        let simple_primitive = primitive && type_end == save + 2;
        let follows = self.peek();
        let is_cast = match follows {
            None => false,
            Some(t) if simple_primitive => {
                // Primitive casts may be followed by unary +/- as well.
                !matches!(t.kind, TokenKind::Operator) || matches!(t.text.as_str(), "+" | "-" | "!" | "~" | "++" | "--")
            }
            Some(t) => match t.kind {
                TokenKind::Identifier | TokenKind::Keyword => {
                    !matches!(t.text.as_str(), "instanceof")
                }
                k if k.is_literal() => true,
                TokenKind::Separator => t.text == "(",
                TokenKind::Operator => matches!(t.text.as_str(), "!" | "~"),
                _ => false,
            },
        };
        // A lone parenthesised primitive like `(int)` followed by `)` is not a cast either.
        if !is_cast || follows.is_some_and(|t| matches!(t.text.as_str(), ")" | ";" | "," | "]" | "}" | ":" | "?")) {
            self.pos = save;
            return Ok(None);
        }
        let operand = self.expr(13)?;
        let end = self.nodes[operand].end;
        Ok(Some(self.push(NodeKind::Cast, None, vec![operand], start, end)))
    }

    /// `(` at the cursor: is this a parenthesised lambda parameter list?
    fn try_lambda(&mut self) -> PResult<Option<NodeId>> {
        let start = self.sig[self.pos];
        let mut depth = 0usize;
        let mut i = self.pos;
        while let Some(&ti) = self.sig.get(i) {
            match self.tokens[ti].text.as_str() {
                "(" => depth += 1,
                ")" => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                _ => {}
            }
            i += 1;
        }
        let arrow = self.sig.get(i + 1).is_some_and(|&ti| self.tokens[ti].text == "->");
        if !arrow {
            return Ok(None);
        }
        self.pos = i + 2;
        self.lambda_body(start).map(Some)
    }

    fn lambda_body(&mut self, start: usize) -> PResult<NodeId> {
        if self.peek_text() == Some("{") {
            let open = self.sig[self.pos];
            let close = self.skip_braces()?;
            self.nested.push(NestedBlock { open, close, class_body: false });
            let end = self.prev_end();
            return Ok(self.push(NodeKind::Other, Some("->"), vec![], start, end));
        }
        let body = self.expr(1)?;
        let end = self.nodes[body].end;
        Ok(self.push(NodeKind::Other, Some("->"), vec![body], start, end))
    }
}
