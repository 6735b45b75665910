//! Candidate locations per transformation kind.

use crate::frontend::expr::{is_assignment_op, is_relational_op};
use crate::frontend::{ExprTree, NodeId, NodeKind, Token, TokenKind};

use super::edit::Location;

/// No calls, object creation, increments or nested assignments anywhere in
/// the expression. An assignment at the root is allowed.
pub fn is_side_effect_free(tree: &ExprTree) -> bool {
    tree.preorder().into_iter().all(|id| {
        let n = tree.node(id);
        let op = n.op.as_deref().unwrap_or("");
        match n.kind {
            NodeKind::Call => false,
            NodeKind::Unary => !matches!(op, "++" | "--"),
            NodeKind::Infix => id == tree.root || !is_assignment_op(op),
            NodeKind::Other => matches!(op, "?:" | "instanceof"),
            _ => true,
        }
    })
}

/// Operand subtrees of arithmetic swaps may hold only numeric arithmetic.
fn is_numeric_arithmetic(tree: &ExprTree, id: NodeId) -> bool {
    tree.descendants(id).into_iter().all(|d| {
        let n = tree.node(d);
        let numeric = n.type_tag.is_numeric();
        match n.kind {
            NodeKind::Name | NodeKind::Literal | NodeKind::Paren => numeric,
            NodeKind::Unary => numeric && matches!(n.op.as_deref(), Some("+" | "-" | "~")),
            NodeKind::Infix => numeric && !is_assignment_op(n.op.as_deref().unwrap_or("")),
            _ => false,
        }
    })
}

pub fn arith_locations(tree: &ExprTree) -> Vec<Location> {
    if !is_side_effect_free(tree) {
        return Vec::new();
    }
    let mut out = Vec::new();
    for id in tree.preorder() {
        let n = tree.node(id);
        if n.kind != NodeKind::Infix || !matches!(n.op.as_deref(), Some("+" | "*")) || !n.type_tag.is_numeric() {
            continue;
        }
        if !n.children.iter().all(|&c| is_numeric_arithmetic(tree, c)) {
            continue;
        }
        if n.children.len() > 2 {
            let first = tree.node(n.children[0]).type_tag;
            let homogeneous = first.is_integral() && n.children.iter().all(|&c| tree.node(c).type_tag == first);
            if !homogeneous {
                continue;
            }
        }
        out.extend((0..n.children.len() - 1).map(|pos| Location::Swap { node: id, pos }));
    }
    out
}

pub fn rel_locations(tree: &ExprTree) -> Vec<Location> {
    if !is_side_effect_free(tree) {
        return Vec::new();
    }
    tree.preorder()
        .into_iter()
        .filter(|&id| {
            let n = tree.node(id);
            n.kind == NodeKind::Infix && n.children.len() == 2 && n.op.as_deref().is_some_and(is_relational_op)
        })
        .map(|id| Location::Swap { node: id, pos: 0 })
        .collect()
}

fn is_plain_infix(tree: &ExprTree, id: NodeId) -> bool {
    let n = tree.node(id);
    n.kind == NodeKind::Infix && !is_assignment_op(n.op.as_deref().unwrap_or(""))
}

/// Infix children of infix parents. Under `&&`/`||` whose operands are all
/// infix with one shared operator, the operands are wrapped together.
pub fn paren_add_locations(tree: &ExprTree) -> Vec<Location> {
    let mut out = Vec::new();
    for id in tree.preorder() {
        if !is_plain_infix(tree, id) {
            continue;
        }
        let n = tree.node(id);
        let targets: Vec<NodeId> = n.children.iter().copied().filter(|&c| is_plain_infix(tree, c)).collect();
        if targets.is_empty() {
            continue;
        }
        let logical = matches!(n.op.as_deref(), Some("&&" | "||"));
        let first_op = tree.node(n.children[0]).op.clone();
        let symmetric = logical
            && targets.len() == n.children.len()
            && n.children.iter().all(|&c| tree.node(c).op == first_op);
        if symmetric {
            out.push(Location::Wrap { nodes: targets });
        } else {
            out.extend(targets.into_iter().map(|t| Location::Wrap { nodes: vec![t] }));
        }
    }
    out
}

/// Every paren node whose inner gaps hold only whitespace.
pub fn paren_remove_locations(tree: &ExprTree, tokens: &[Token]) -> Vec<Location> {
    tree.preorder()
        .into_iter()
        .filter(|&id| {
            let n = tree.node(id);
            if n.kind != NodeKind::Paren {
                return false;
            }
            let inner = tree.node(n.children[0]);
            tokens[n.start..inner.start].iter().chain(&tokens[inner.end..n.end]).all(|t| t.kind != TokenKind::Comment)
        })
        .map(|id| Location::Unwrap { node: id })
        .collect()
}

/// Operator label of a node for covariates.
pub fn operator_label(tree: &ExprTree, id: NodeId) -> String {
    let n = tree.node(id);
    match &n.op {
        Some(op) => op.clone(),
        None => n.kind.name().to_string(),
    }
}
