//! Locations and their application to an expression tree: rendering the
//! edited text and predicting the edited tree's canonical form so a re-parse
//! can confirm the edit means what it should.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::frontend::expr::is_relational_op;
use crate::frontend::{parse_expression, tokenize, ExprTree, NodeId, NodeKind, Token};

/// One place an edit can be made inside an expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Location {
    /// Exchange operands `pos` and `pos + 1` of an infix node. Relational
    /// operators are mirrored.
    Swap { node: NodeId, pos: usize },
    /// Wrap each node in one pair of parentheses (a group is added together).
    Wrap { nodes: Vec<NodeId> },
    /// Drop a paren node, keeping its inner expression.
    Unwrap { node: NodeId },
}

impl Location {
    /// The node whose operator characterizes the edit.
    pub fn focus(&self, tree: &ExprTree) -> NodeId {
        match self {
            Location::Swap { node, .. } => *node,
            Location::Wrap { nodes } => nodes[0],
            Location::Unwrap { node } => tree.node(*node).children[0],
        }
    }

    /// The node whose parent characterizes the edit's position.
    pub fn anchor(&self) -> NodeId {
        match self {
            Location::Swap { node, .. } | Location::Unwrap { node } => *node,
            Location::Wrap { nodes } => nodes[0],
        }
    }
}

pub fn mirror_op(op: &str) -> &str {
    match op {
        "<" => ">",
        ">" => "<",
        "<=" => ">=",
        ">=" => "<=",
        other => other,
    }
}

/// An edited view over a tree.
struct View<'a> {
    tree: &'a ExprTree,
    tokens: &'a [Token],
    order: HashMap<NodeId, Vec<usize>>,
    mirrored: HashSet<NodeId>,
    wrapped: HashSet<NodeId>,
    unwrapped: HashSet<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EditError {
    OutOfRange,
    NotApplicable,
}

impl<'a> View<'a> {
    fn new(tree: &'a ExprTree, tokens: &'a [Token], locations: &[&Location]) -> Result<View<'a>, EditError> {
        let mut v = View { tree, tokens, order: HashMap::new(), mirrored: HashSet::new(), wrapped: HashSet::new(), unwrapped: HashSet::new() };
        let mut swaps: Vec<(NodeId, usize)> = Vec::new();
        for loc in locations {
            match loc {
                Location::Swap { node, pos } => {
                    let n = tree.nodes.get(*node).ok_or(EditError::OutOfRange)?;
                    if n.kind != NodeKind::Infix || pos + 1 >= n.children.len() {
                        return Err(EditError::OutOfRange);
                    }
                    swaps.push((*node, *pos));
                }
                Location::Wrap { nodes } => {
                    for &id in nodes {
                        if id >= tree.nodes.len() || id == tree.root || !v.wrapped.insert(id) {
                            return Err(EditError::NotApplicable);
                        }
                    }
                }
                Location::Unwrap { node } => {
                    let n = tree.nodes.get(*node).ok_or(EditError::OutOfRange)?;
                    if n.kind != NodeKind::Paren || !v.unwrapped.insert(*node) {
                        return Err(EditError::NotApplicable);
                    }
                }
            }
        }
        swaps.sort_unstable();
        for (node, pos) in swaps {
            let n = tree.node(node);
            let order = v.order.entry(node).or_insert_with(|| (0..n.children.len()).collect());
            order.swap(pos, pos + 1);
            if n.op.as_deref().is_some_and(is_relational_op) && !v.mirrored.insert(node) {
                v.mirrored.remove(&node);
            }
        }
        Ok(v)
    }

    fn children(&self, id: NodeId) -> Vec<NodeId> {
        let n = self.tree.node(id);
        match self.order.get(&id) {
            Some(order) => order.iter().map(|&i| n.children[i]).collect(),
            None => n.children.clone(),
        }
    }

    fn op(&self, id: NodeId) -> &str {
        let op = self.tree.node(id).op.as_deref().unwrap_or("?");
        if self.mirrored.contains(&id) {
            mirror_op(op)
        } else {
            op
        }
    }

    fn gap(&self, id: NodeId, from: usize, to: usize, out: &mut String) {
        let mirror = self.mirrored.contains(&id);
        let op = self.tree.node(id).op.as_deref().unwrap_or("");
        for t in &self.tokens[from..to] {
            if mirror && t.text == op {
                out.push_str(mirror_op(op));
            } else {
                out.push_str(&t.text);
            }
        }
    }

    fn render(&self, id: NodeId, out: &mut String) {
        let n = self.tree.node(id);
        if self.unwrapped.contains(&id) {
            self.render(n.children[0], out);
            return;
        }
        if self.wrapped.contains(&id) {
            out.push('(');
        }
        let placed = self.children(id);
        let mut at = n.start;
        for (slot, &orig) in n.children.iter().enumerate() {
            let child = self.tree.node(orig);
            self.gap(id, at, child.start, out);
            self.render(placed[slot], out);
            at = child.end;
        }
        self.gap(id, at, n.end, out);
        if self.wrapped.contains(&id) {
            out.push(')');
        }
    }

    fn canonical(&self, id: NodeId, out: &mut String) {
        let n = self.tree.node(id);
        if self.unwrapped.contains(&id) {
            self.canonical(n.children[0], out);
            return;
        }
        if self.wrapped.contains(&id) {
            out.push_str("(paren ( ");
            self.canonical_plain(id, out);
            out.push_str(" ))");
        } else {
            self.canonical_plain(id, out);
        }
    }

    fn canonical_plain(&self, id: NodeId, out: &mut String) {
        let n = self.tree.node(id);
        let children = self.children(id);
        match n.kind {
            NodeKind::Infix => {
                let op = self.op(id);
                for _ in 1..children.len() {
                    let _ = write!(out, "({op} ");
                }
                self.canonical(children[0], out);
                for &c in &children[1..] {
                    out.push(' ');
                    self.canonical(c, out);
                    out.push(')');
                }
            }
            _ => {
                let _ = write!(out, "({}", n.kind.name());
                let mut at = n.start;
                for (slot, &orig) in n.children.iter().enumerate() {
                    push_significant(&self.tokens[at..self.tree.node(orig).start], out);
                    out.push(' ');
                    self.canonical(children[slot], out);
                    at = self.tree.node(orig).end;
                }
                push_significant(&self.tokens[at..n.end], out);
                out.push(')');
            }
        }
    }
}

fn push_significant(tokens: &[Token], out: &mut String) {
    for t in tokens.iter().filter(|t| !t.kind.is_trivia()) {
        out.push(' ');
        out.push_str(&t.text);
    }
}

/// Text of the whole expression with `locations` applied.
pub fn render_edited(tree: &ExprTree, tokens: &[Token], locations: &[&Location]) -> Result<String, EditError> {
    let view = View::new(tree, tokens, locations)?;
    let mut out = String::new();
    view.render(tree.root, &mut out);
    Ok(out)
}

/// Canonical form the edited expression must parse to.
pub fn expected_canonical(tree: &ExprTree, tokens: &[Token], locations: &[&Location]) -> Result<String, EditError> {
    let view = View::new(tree, tokens, locations)?;
    let mut out = String::new();
    view.canonical(tree.root, &mut out);
    Ok(out)
}

/// Parses `text` as one expression and returns its tokens and tree.
pub fn reparse(text: &str) -> Option<(Vec<Token>, ExprTree)> {
    let tokens = tokenize(text).ok()?;
    let parsed = parse_expression(&tokens, 0, tokens.len()).ok()?;
    Some((tokens, parsed.tree))
}

/// Would `new_text` placed between `before` and `after` lex into exactly the
/// same boundary tokens?
pub fn fits_between(before: Option<&Token>, new_text: &str, after: Option<&Token>) -> bool {
    let prefix = before.map_or("", |t| t.text.as_str());
    let suffix = after.map_or("", |t| t.text.as_str());
    let joined = format!("{prefix}{new_text}{suffix}");
    let Ok(all) = tokenize(&joined) else { return false };
    let Ok(inner) = tokenize(new_text) else { return false };
    let expect_len = inner.len() + before.is_some() as usize + after.is_some() as usize;
    if all.len() != expect_len {
        return false;
    }
    let head_ok = before.is_none_or(|b| all[0].text == b.text);
    let tail_ok = after.is_none_or(|a| all[all.len() - 1].text == a.text);
    head_ok && tail_ok
}

/// Renders and checks an edit. Returns the new expression text when it
/// differs from the original and re-parses to the predicted tree.
pub fn apply_checked(tree: &ExprTree, tokens: &[Token], locations: &[&Location], before: Option<&Token>, after: Option<&Token>) -> Option<String> {
    let text = render_edited(tree, tokens, locations).ok()?;
    let original = tree.text(tree.root, tokens);
    if text == original {
        return None;
    }
    let expected = expected_canonical(tree, tokens, locations).ok()?;
    let (new_tokens, new_tree) = reparse(&text)?;
    if new_tree.canonical(&new_tokens, false) != expected {
        return None;
    }
    if !fits_between(before, &text, after) {
        return None;
    }
    Some(text)
}

/// Child-index path from the root to `id`.
pub fn node_path(tree: &ExprTree, id: NodeId) -> Vec<usize> {
    let parents = tree.parents();
    let mut path = Vec::new();
    let mut cur = id;
    while let Some(p) = parents[cur] {
        path.push(tree.node(p).children.iter().position(|&c| c == cur).unwrap_or(0));
        cur = p;
    }
    path.reverse();
    path
}

pub fn node_at_path(tree: &ExprTree, path: &[usize]) -> Option<NodeId> {
    let mut cur = tree.root;
    for &i in path {
        cur = *tree.node(cur).children.get(i)?;
    }
    Some(cur)
}
