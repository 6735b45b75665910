//! Random Java sources for property and acceptance checks.

use std::fmt::Write as _;

use rand::Rng;

use super::oracle::Ty;

/// Every method parameter and local of generated expression fixtures.
pub const VARS: [(&str, Ty); 10] = [
    ("a", Ty::Int),
    ("b", Ty::Int),
    ("c", Ty::Int),
    ("p", Ty::Long),
    ("q", Ty::Long),
    ("x", Ty::Double),
    ("y", Ty::Double),
    ("t", Ty::Int),
    ("u", Ty::Long),
    ("w", Ty::Double),
];

pub fn var_slot(name: &str) -> Option<usize> {
    VARS.iter().position(|(n, _)| *n == name)
}

pub fn var_types() -> Vec<Ty> {
    VARS.iter().map(|(_, t)| *t).collect()
}

pub fn java_type(ty: Ty) -> &'static str {
    match ty {
        Ty::Int => "int",
        Ty::Long => "long",
        Ty::Double => "double",
        Ty::Bool => "boolean",
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(String),
    Bin(&'static str, Box<Node>, Box<Node>),
    Not(Box<Node>),
}

fn prec(op: &str) -> u8 {
    match op {
        "||" => 3,
        "&&" => 4,
        "==" | "!=" => 8,
        "<" | ">" | "<=" | ">=" => 9,
        "<<" | ">>" => 10,
        "+" | "-" => 11,
        _ => 12,
    }
}

/// Generated expression trees printed with the parentheses their structure
/// needs plus occasional redundant ones.
pub struct ExprGen<'r, R: Rng> {
    pub rng: &'r mut R,
    /// Variables currently in scope.
    pub scope: Vec<&'static str>,
    pub redundant_parens: f64,
}

impl<R: Rng> ExprGen<'_, R> {
    fn pick_var(&mut self, types: &[Ty]) -> Option<String> {
        let candidates: Vec<&str> = self.scope.iter().copied().filter(|v| var_slot(v).is_some_and(|i| types.contains(&VARS[i].1))).collect();
        if candidates.is_empty() {
            return None;
        }
        Some(candidates[self.rng.random_range(0..candidates.len())].to_string())
    }

    fn int_literal(&mut self) -> String {
        match self.rng.random_range(0..10) {
            0 => self.rng.random_range(100_000..2_000_000_000i64).to_string(),
            1 => "0".into(),
            _ => self.rng.random_range(1..40).to_string(),
        }
    }

    fn leaf(&mut self, ty: Ty) -> Node {
        let var_types: &[Ty] = match ty {
            Ty::Int => &[Ty::Int],
            Ty::Long => &[Ty::Long, Ty::Long, Ty::Int],
            _ => &[Ty::Double, Ty::Double, Ty::Int, Ty::Long],
        };
        if self.rng.random_bool(0.75) {
            let t = var_types[self.rng.random_range(0..var_types.len())];
            if let Some(v) = self.pick_var(&[t]) {
                return Node::Leaf(v);
            }
        }
        Node::Leaf(match ty {
            Ty::Int => self.int_literal(),
            Ty::Long => format!("{}L", self.int_literal()),
            _ => ["0.5", "1.5", "2.0", "0.25", "3.75", "10.0"][self.rng.random_range(0..6)].to_string(),
        })
    }

    fn numeric(&mut self, ty: Ty, depth: u32) -> Node {
        if depth == 0 || self.rng.random_bool(0.3) {
            return self.leaf(ty);
        }
        let ops: &[&'static str] = match ty {
            Ty::Int | Ty::Long => &["+", "+", "+", "*", "*", "-", "/", "%", "<<", ">>"],
            _ => &["+", "+", "*", "*", "-", "/"],
        };
        let op = ops[self.rng.random_range(0..ops.len())];
        if op == "<<" || op == ">>" {
            let lhs = self.numeric(ty, depth - 1);
            return Node::Bin(op, Box::new(lhs), Box::new(Node::Leaf(self.rng.random_range(1..8).to_string())));
        }
        let lhs = self.numeric(ty, depth - 1);
        let rhs = self.numeric(ty, depth - 1);
        Node::Bin(op, Box::new(lhs), Box::new(rhs))
    }

    fn condition(&mut self, depth: u32) -> Node {
        if depth == 0 || self.rng.random_bool(0.4) {
            let ty = [Ty::Int, Ty::Int, Ty::Long, Ty::Double][self.rng.random_range(0..4)];
            let op = ["<", ">", "<=", ">=", "==", "!="][self.rng.random_range(0..6)];
            let lhs = self.numeric(ty, 1);
            let rhs = self.numeric(ty, 1);
            return Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        match self.rng.random_range(0..5) {
            0 => Node::Not(Box::new(self.condition(depth - 1))),
            1 | 2 => Node::Bin("&&", Box::new(self.condition(depth - 1)), Box::new(self.condition(depth - 1))),
            _ => Node::Bin("||", Box::new(self.condition(depth - 1)), Box::new(self.condition(depth - 1))),
        }
    }

    fn print(&mut self, n: &Node, out: &mut String) {
        match n {
            Node::Leaf(s) => out.push_str(s),
            Node::Not(inner) => {
                out.push_str("!(");
                self.print(inner, out);
                out.push(')');
            }
            Node::Bin(op, a, b) => {
                let p = prec(op);
                self.child(a, |cp| cp < p, out);
                let _ = write!(out, " {op} ");
                self.child(b, |cp| cp <= p, out);
            }
        }
    }

    fn child(&mut self, n: &Node, needs: impl Fn(u8) -> bool, out: &mut String) {
        let required = matches!(n, Node::Bin(op, ..) if needs(prec(op)));
        let extra = !required && matches!(n, Node::Bin(..)) && self.rng.random_bool(self.redundant_parens);
        if required || extra {
            out.push('(');
            self.print(n, out);
            out.push(')');
        } else {
            self.print(n, out);
        }
    }

    pub fn numeric_text(&mut self, ty: Ty, depth: u32) -> String {
        let n = self.numeric(ty, depth);
        let mut s = String::new();
        self.print(&n, &mut s);
        s
    }

    pub fn condition_text(&mut self, depth: u32) -> String {
        let n = self.condition(depth);
        let mut s = String::new();
        self.print(&n, &mut s);
        s
    }
}

/// Byte range of one generated method, header included.
#[derive(Debug, Clone, Copy)]
pub struct MethodRange {
    pub start: usize,
    pub end: usize,
}

pub struct GenFile {
    pub text: String,
    pub methods: Vec<MethodRange>,
}

/// A class of `methods` methods over the variables of [`VARS`], each mixing
/// integral, floating and boolean expressions.
pub fn expression_file<R: Rng>(rng: &mut R, class: &str, methods: usize) -> GenFile {
    let mut text = format!("public class {class} {{\n");
    let mut ranges = Vec::new();
    for m in 0..methods {
        let start = text.len();
        let _ = writeln!(text, "    int m{m}(int a, int b, int c, long p, long q, double x, double y) {{");
        let mut g = ExprGen { rng: &mut *rng, scope: vec!["a", "b", "c", "p", "q", "x", "y"], redundant_parens: 0.2 };
        let _ = writeln!(text, "        int t = {};", g.numeric_text(Ty::Int, 3));
        g.scope.push("t");
        let _ = writeln!(text, "        long u = {};", g.numeric_text(Ty::Long, 3));
        g.scope.push("u");
        let _ = writeln!(text, "        double w = {};", g.numeric_text(Ty::Double, 2));
        g.scope.push("w");
        let statements = g.rng.random_range(3..7);
        for _ in 0..statements {
            match g.rng.random_range(0..6) {
                0 => {
                    let cond = g.condition_text(2);
                    let body = g.numeric_text(Ty::Int, 3);
                    let _ = write!(text, "        if ({cond}) {{\n            t = {body};\n        }}\n");
                }
                1 => {
                    let cond = g.condition_text(2);
                    let body = g.numeric_text(Ty::Long, 3);
                    let _ = write!(text, "        while ({cond}) {{\n            u = {body};\n            break;\n        }}\n");
                }
                2 => {
                    let _ = writeln!(text, "        w = {};", g.numeric_text(Ty::Double, 3));
                }
                3 => {
                    let _ = writeln!(text, "        u = {};", g.numeric_text(Ty::Long, 3));
                }
                4 => {
                    let cond = g.condition_text(2);
                    let body = g.numeric_text(Ty::Double, 2);
                    let _ = write!(text, "        if ({cond}) {{\n            w = {body};\n        }}\n");
                }
                _ => {
                    let _ = writeln!(text, "        t = {};", g.numeric_text(Ty::Int, 3));
                }
            }
        }
        let _ = writeln!(text, "        return t;\n    }}");
        ranges.push(MethodRange { start, end: text.len() });
        text.push('\n');
    }
    text.push_str("}\n");
    GenFile { text, methods: ranges }
}

const NAMES: [&str; 24] = [
    "count", "index", "limit", "size", "total", "offset", "depth", "level", "width", "height", "margin", "retries", "score", "weight", "step", "row", "col", "page", "slot", "round",
    "tick", "span", "chunk", "batch",
];

/// A class whose comparisons are all written `identifier < literal`.
pub fn planted_file<R: Rng>(rng: &mut R, class: &str, target_lines: usize) -> String {
    let mut text = format!("public class {class} {{\n");
    let mut lines = 1;
    let mut m = 0;
    while lines < target_lines {
        let v1 = NAMES[rng.random_range(0..NAMES.len())];
        let v2 = NAMES[rng.random_range(0..NAMES.len())];
        let _ = writeln!(text, "    int run{m}(int {v1}, int step{m}) {{");
        let _ = writeln!(text, "        int acc = 0;");
        lines += 2;
        let blocks = rng.random_range(2..6);
        for _ in 0..blocks {
            let k = rng.random_range(1..64);
            match rng.random_range(0..3) {
                0 => {
                    let _ = write!(text, "        if ({v1} < {k}) {{\n            acc = acc + {v1};\n        }}\n");
                }
                1 => {
                    let _ = write!(text, "        while (acc < {k}) {{\n            acc = acc + step{m};\n        }}\n");
                }
                _ => {
                    let _ = write!(text, "        for (int {v2}x = 0; {v2}x < {k}; {v2}x++) {{\n            acc = acc + {v2}x;\n        }}\n");
                }
            }
            lines += 3;
        }
        let _ = writeln!(text, "        return acc;\n    }}");
        lines += 2;
        m += 1;
    }
    text.push_str("}\n");
    text
}

/// A block of statements that appears nowhere in the other fixtures.
pub const UNUSUAL_BLOCK: &str = "        quux = frobnicate(zorp, quux) ^ blarg;\n        if (zorp.wibble(blarg)) {\n            blarg = quux.wobble(zorp, 42);\n        }\n";

/// Project directories of generated sources under `root`.
pub fn write_projects<R: Rng>(rng: &mut R, root: &std::path::Path, projects: usize, files: usize, methods: usize) {
    for p in 0..projects {
        let dir = root.join(format!("proj{p}")).join("src");
        std::fs::create_dir_all(&dir).unwrap();
        for f in 0..files {
            let class = format!("P{p}F{f}");
            let file = expression_file(rng, &class, methods);
            std::fs::write(dir.join(format!("{class}.java")), file.text).unwrap();
        }
    }
}
